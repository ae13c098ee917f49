"""Problem files, reference data, expressions and perturbation error measures."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cones import Block, DisjunctiveSet, EC, Free, NonPos, Union, VC, Zero
from .geometry import ZERO, Polyhedron, frac, mat, vec


class ProblemError(ValueError):
    """Malformed or inconsistent problem description."""


class ExprSyntaxError(ProblemError):
    def __init__(self, msg, line=0, col=0):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line, self.col = line, col


class DomainError(ArithmeticError):
    """Expression evaluated outside its domain."""


# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple = ()
    value: object = None
    pos: int = 0

    def depends_on_x(self) -> bool:
        if self.op == "x":
            return True
        return any(a.depends_on_x() for a in self.args)

    def __str__(self):
        return _show(self)


def _show(e: Expr) -> str:
    if e.op == "const":
        return repr(e.value)
    if e.op in ("x", "w"):
        return f"{e.op}{e.value + 1}"
    if e.op == "neg":
        return f"(-{_show(e.args[0])})"
    if e.op in _BINOPS:
        return f"({_show(e.args[0])} {_BINOPS[e.op]} {_show(e.args[1])})"
    return f"{e.value}(" + ", ".join(_show(a) for a in e.args) + ")"


_BINOPS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "abs": 1, "log": 1, "ifzero": 3}
_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^(),]))")


def _tokenize(src: str, line: int, col0: int):
    toks, i = [], 0
    while i < len(src):
        if src[i:].strip() == "":
            break
        m = _TOKEN.match(src, i)
        if not m:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", line, col0 + i + 1)
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            toks.append(("name", m.group(2), start))
        else:
            toks.append(("op", "^" if m.group(3) == "**" else m.group(3), start))
        i = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src, n, s, line=0, col0=0):
        self.toks = _tokenize(src, line, col0)
        self.k = 0
        self.n, self.s, self.line, self.col0 = n, s, line, col0

    def err(self, msg, tok=None):
        tok = tok or self.toks[self.k]
        raise ExprSyntaxError(msg, self.line, self.col0 + tok[2] + 1)

    def peek(self):
        return self.toks[self.k]

    def take(self, kind=None, val=None):
        t = self.toks[self.k]
        if (kind and t[0] != kind) or (val and t[1] != val):
            self.err(f"expected {val or kind}, found {t[1]!r}" if t[1] else f"expected {val or kind}, found end of input")
        self.k += 1
        return t

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.err(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            t = self.take()
            e = Expr("add" if t[1] == "+" else "sub", (e, self.term()), pos=t[2])
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            t = self.take()
            e = Expr("mul" if t[1] == "*" else "div", (e, self.unary()), pos=t[2])
        return e

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] in ("-", "+"):
            self.take()
            inner = self.unary()
            return Expr("neg", (inner,), pos=t[2]) if t[1] == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        t = self.peek()
        if t[0] == "op" and t[1] == "^":
            self.take()
            return Expr("pow", (base, self.unary()), pos=t[2])
        return base

    def atom(self):
        t = self.peek()
        if t[0] == "num":
            self.take()
            return Expr("const", value=float(t[1]), pos=t[2])
        if t[0] == "op" and t[1] == "(":
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        if t[0] == "name":
            self.take()
            name = t[1]
            if name in FUNCTIONS:
                self.take("op", "(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                if len(args) != FUNCTIONS[name]:
                    self.err(f"{name} takes {FUNCTIONS[name]} argument(s)", t)
                return Expr("call", tuple(args), value=name, pos=t[2])
            if name == "pi":
                return Expr("const", value=float(np.pi), pos=t[2])
            m = re.fullmatch(r"x(\d+)", name)
            if m:
                i = int(m.group(1))
                if not 1 <= i <= self.n:
                    self.err(f"variable {name} out of range (n = {self.n})", t)
                return Expr("x", value=i - 1, pos=t[2])
            m = re.fullmatch(r"(?:w|omega)(\d*)", name)
            if m:
                i = int(m.group(1) or 1)
                if not 1 <= i <= self.s:
                    self.err(f"parameter {name} out of range (s = {self.s})", t)
                return Expr("w", value=i - 1, pos=t[2])
            self.err(f"unknown name {name!r}", t)
        self.err(f"unexpected {t[1]!r}" if t[1] else "unexpected end of input")


def parse_expr(src: str, n: int, s: int, line: int = 0, col0: int = 0) -> Expr:
    return _Parser(src, n, s, line, col0).parse()


# second-order forward mode over a batch: value (N,), gradient (N,n), Hessian (N,n,n)


class Jet:
    __slots__ = ("v", "g", "H")

    def __init__(self, v, g, H):
        self.v, self.g, self.H = v, g, H


def _const_jet(c, N, n):
    return Jet(np.full(N, float(c)), np.zeros((N, n)), np.zeros((N, n, n)))


def _chain(a: Jet, f, f1, f2) -> Jet:
    g = f1[:, None] * a.g
    H = f1[:, None, None] * a.H + f2[:, None, None] * np.einsum("ni,nj->nij", a.g, a.g)
    return Jet(f, g, H)


def _mul(a: Jet, b: Jet) -> Jet:
    outer = np.einsum("ni,nj->nij", a.g, b.g)
    return Jet(
        a.v * b.v,
        a.v[:, None] * b.g + b.v[:, None] * a.g,
        a.v[:, None, None] * b.H + b.v[:, None, None] * a.H + outer + outer.transpose(0, 2, 1),
    )


def _power_coeffs(v, p):
    with np.errstate(all="ignore"):
        f = np.power(v, p)
        f1 = np.zeros_like(v) if p == 0 else p * np.power(v, p - 1)
        f2 = np.zeros_like(v) if p * (p - 1) == 0 else p * (p - 1) * np.power(v, p - 2)
    return f, f1, f2


def _eval(e: Expr, X, W, n) -> Jet:
    N = X.shape[0]
    op = e.op
    if op == "const":
        return _const_jet(e.value, N, n)
    if op == "x":
        g = np.zeros((N, n))
        g[:, e.value] = 1.0
        return Jet(X[:, e.value].astype(float), g, np.zeros((N, n, n)))
    if op == "w":
        return _const_jet(0, N, n) if N == 0 else Jet(np.full(N, float(W[e.value])), np.zeros((N, n)), np.zeros((N, n, n)))
    if op == "neg":
        a = _eval(e.args[0], X, W, n)
        return Jet(-a.v, -a.g, -a.H)
    if op in ("add", "sub"):
        a, b = _eval(e.args[0], X, W, n), _eval(e.args[1], X, W, n)
        s = 1.0 if op == "add" else -1.0
        return Jet(a.v + s * b.v, a.g + s * b.g, a.H + s * b.H)
    if op == "mul":
        return _mul(_eval(e.args[0], X, W, n), _eval(e.args[1], X, W, n))
    if op == "div":
        a, b = _eval(e.args[0], X, W, n), _eval(e.args[1], X, W, n)
        with np.errstate(all="ignore"):
            inv = 1.0 / b.v
            r = _chain(b, inv, -inv * inv, 2 * inv * inv * inv)
        return _mul(a, r)
    if op == "pow":
        base, ex = e.args
        a = _eval(base, X, W, n)
        if not ex.depends_on_x():
            pv = _eval(ex, X, W, n).v
            if pv.size and np.all(pv == pv[0]):
                return _chain(a, *_power_coeffs(a.v, float(pv[0])))
        b = _eval(ex, X, W, n)
        with np.errstate(all="ignore"):
            la = _chain(a, np.log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v))
        prod = _mul(la, b)
        ev = np.exp(prod.v)
        return _chain(prod, ev, ev, ev)
    name = e.value
    if name == "ifzero":
        c = _eval(e.args[0], X, W, n).v
        mask = c == 0
        out = _const_jet(0, N, n)
        for sel, branch in ((mask, e.args[1]), (~mask, e.args[2])):
            if sel.any():
                r = _eval(branch, X[sel], W, n)
                out.v[sel], out.g[sel], out.H[sel] = r.v, r.g, r.H
        return out
    a = _eval(e.args[0], X, W, n)
    v = a.v
    with np.errstate(all="ignore"):
        if name == "sin":
            return _chain(a, np.sin(v), np.cos(v), -np.sin(v))
        if name == "cos":
            return _chain(a, np.cos(v), -np.sin(v), -np.cos(v))
        if name == "exp":
            ev = np.exp(v)
            return _chain(a, ev, ev, ev)
        if name == "log":
            return _chain(a, np.log(v), 1.0 / v, -1.0 / (v * v))
        if name == "sqrt":
            r = np.sqrt(v)
            return _chain(a, r, 0.5 / r, -0.25 / (r * v))
        if name == "abs":
            return _chain(a, np.abs(v), np.sign(v), np.zeros_like(v))
    raise ProblemError(f"unknown function {name}")


def eval_expr(e: Expr, X, W, n: int, strict: bool = True, label: str = "") -> Jet:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = _eval(e, X, np.asarray(W, dtype=float).ravel(), n)
    if strict and not (np.all(np.isfinite(r.v)) and np.all(np.isfinite(r.g)) and np.all(np.isfinite(r.H))):
        bad = _first_bad(e, X, np.asarray(W, dtype=float).ravel(), n)
        raise DomainError(f"{label or 'expression'}: non-finite value in sub-expression {bad}")
    return r


def _first_bad(e, X, W, n) -> str:
    """Locate the innermost sub-expression producing a non-finite value."""
    for a in e.args:
        if e.op == "call" and e.value == "ifzero":
            break
        r = _eval(a, X, W, n)
        if not (np.all(np.isfinite(r.v)) and np.all(np.isfinite(r.g))):
            return _first_bad(a, X, W, n)
    return f"'{e}' (offset {e.pos})"


# ---------------------------------------------------------------------------
# reference data and problems


@dataclass(frozen=True)
class ReferenceData:
    n: int
    m: int
    s: int
    P: DisjunctiveSet
    q: tuple
    J: tuple
    Hq: tuple
    grad_f: tuple
    Hf: tuple
    F: tuple | None = None
    JF: tuple | None = None
    x_bar: tuple = ()
    omega_bar: tuple = ()

    def __post_init__(self):
        n, m = self.n, self.m
        if self.P.dim != m or len(self.q) != m or len(self.J) != m or len(self.Hq) != m:
            raise ProblemError("constraint dimension m inconsistent with reference data")
        if any(len(r) != n for r in self.J) or len(self.grad_f) != n or len(self.Hf) != n:
            raise ProblemError("variable dimension n inconsistent with reference data")
        for name, H in [("hess_f", self.Hf)] + [(f"hess_q{i + 1}", h) for i, h in enumerate(self.Hq)]:
            if len(H) != n or any(len(r) != n for r in H):
                raise ProblemError(f"{name} must be {n}x{n}")
            if any(H[i][j] != H[j][i] for i in range(n) for j in range(i)):
                raise ProblemError(f"{name} is not symmetric")
        if (self.F is None) != (self.JF is None):
            raise ProblemError("F and jac_F must be given together")
        if not self.P.contains(self.q):
            raise ProblemError("reference point infeasible: q(x_bar, omega_bar) is not in P")

    @property
    def Fbar(self) -> tuple:
        return self.grad_f if self.F is None else self.F

    @property
    def JFbar(self) -> tuple:
        return self.Hf if self.JF is None else self.JF

    def Q(self, lam) -> tuple:
        """Σ λ_i ∇²q_i."""
        n = self.n
        return tuple(
            tuple(sum((l * H[i][j] for l, H in zip(lam, self.Hq) if l), ZERO) for j in range(n)) for i in range(n)
        )

    def hessians_vanish(self) -> bool:
        return all(x == 0 for H in self.Hq for r in H for x in r)


@dataclass(frozen=True)
class ParamProblem:
    name: str
    ref: ReferenceData
    f: Expr | None = None
    q: tuple = ()
    F: tuple = ()
    flags: frozenset = frozenset()
    layout: str = ""
    digest: str = ""
    source: str = field(default="", repr=False, compare=False)

    @property
    def P(self) -> DisjunctiveSet:
        return self.ref.P

    @property
    def x_bar(self) -> tuple:
        return self.ref.x_bar

    @property
    def omega_bar(self) -> tuple:
        return self.ref.omega_bar

    @property
    def has_expressions(self) -> bool:
        return self.f is not None and len(self.q) == self.ref.m


# ---------------------------------------------------------------------------
# file format


_SECTION = re.compile(r"^\[(\w+)\]\s*$")


def _parse_vector(txt: str, line: int) -> tuple:
    txt = txt.strip().strip("[]").replace(",", " ")
    try:
        return tuple(Fraction(t) for t in txt.split())
    except (ValueError, ZeroDivisionError) as exc:
        raise ExprSyntaxError(f"bad rational in {txt!r}: {exc}", line, 1) from None


def _parse_matrix(txt: str, line: int) -> tuple:
    txt = txt.strip().strip("[]")
    if not txt:
        return ()
    rows = tuple(_parse_vector(r, line) for r in txt.split(";") if r.strip())
    if len({len(r) for r in rows}) > 1:
        raise ExprSyntaxError("ragged matrix", line, 1)
    return rows


_UNION_PIECE = re.compile(r"(\w+)\s*=\s*\[([^\]]*)\]")


def _parse_block(txt: str, line: int) -> Block:
    parts = txt.split(None, 1)
    kind = parts[0].lower()
    rest = parts[1] if len(parts) > 1 else ""
    if kind in ("nonpos", "zero", "free"):
        try:
            k = int(rest)
        except ValueError:
            raise ExprSyntaxError(f"{kind} needs a dimension", line, len(parts[0]) + 2) from None
        return {"nonpos": NonPos, "zero": Zero, "free": Free}[kind](k)
    if kind == "ec":
        return EC()
    if kind == "vc":
        return VC()
    if kind == "union":
        m = re.match(r"(\d+)\s*:(.*)$", rest)
        if not m:
            raise ExprSyntaxError("union syntax: union <dim>: A=[..] b=[..] | ...", line, 1)
        dim = int(m.group(1))
        polys = []
        for piece in m.group(2).split("|"):
            fields = dict((k, v) for k, v in _UNION_PIECE.findall(piece))
            A = _parse_matrix(fields.get("A", ""), line)
            E = _parse_matrix(fields.get("E", ""), line)
            b = _parse_vector(fields.get("b", ""), line)
            e = _parse_vector(fields.get("e", ""), line)
            try:
                polys.append(Polyhedron(dim, A, b, E, e))
            except ValueError as exc:
                raise ExprSyntaxError(str(exc), line, 1) from None
        try:
            return Union(polys)
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), line, 1) from None
    raise ExprSyntaxError(f"unknown block kind {kind!r}", line, 1)


def _sections(text: str) -> dict:
    out: dict = {}
    cur = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = _SECTION.match(line.strip())
        if m:
            cur = m.group(1).lower()
            if cur in out:
                raise ExprSyntaxError(f"duplicate section [{cur}]", ln, 1)
            out[cur] = []
            continue
        if cur is None:
            raise ExprSyntaxError("content before the first section", ln, 1)
        out[cur].append((ln, line))
    return out


def _keyvals(lines) -> dict:
    out = {}
    for ln, line in lines:
        if "=" not in line:
            raise ExprSyntaxError("expected key = value", ln, 1)
        k, v = line.split("=", 1)
        key = k.strip()
        if key in out:
            raise ExprSyntaxError(f"duplicate key {key!r}", ln, 1)
        out[key] = (ln, v.strip(), len(line) - len(line.split("=", 1)[1].lstrip()) + 1)
    return out


def parse_problem(text: str, name: str = "problem", check_consistency: bool = True, tol: float = 1e-8) -> ParamProblem:
    sec = _sections(text)
    for required in ("dimensions", "blocks", "reference"):
        if required not in sec:
            raise ProblemError(f"missing section [{required}]")
    dims = _keyvals(sec["dimensions"])
    try:
        n = int(dims["n"][1])
        m = int(dims["m"][1])
        s = int(dims.get("s", (0, "0"))[1])
    except (KeyError, ValueError) as exc:
        raise ProblemError(f"[dimensions] needs integer n, m (and optional s): {exc}") from None
    blocks = tuple(_parse_block(line.strip(), ln) for ln, line in sec["blocks"])
    P = DisjunctiveSet(blocks)
    if P.dim != m:
        raise ProblemError(f"blocks have total dimension {P.dim}, expected m = {m}")
    ref_kv = _keyvals(sec["reference"])

    def get_vec(key, size, default=None):
        if key not in ref_kv:
            if default is not None:
                return default
            raise ProblemError(f"[reference] is missing {key}")
        ln, txt, _ = ref_kv[key]
        v = _parse_vector(txt, ln)
        if len(v) != size:
            raise ProblemError(f"line {ln}: {key} has length {len(v)}, expected {size}")
        return v

    def get_mat(key, rows, cols, default=None):
        if key not in ref_kv:
            if default is not None:
                return default
            raise ProblemError(f"[reference] is missing {key}")
        ln, txt, _ = ref_kv[key]
        M = _parse_matrix(txt, ln)
        if len(M) != rows or any(len(r) != cols for r in M):
            raise ProblemError(f"line {ln}: {key} must be {rows}x{cols}")
        return M

    zero_nn = tuple((ZERO,) * n for _ in range(n))
    x_bar = get_vec("x_bar", n)
    omega_bar = get_vec("omega_bar", s, ())
    q = get_vec("q", m)
    J = get_mat("jacobian", m, n)
    Hq = tuple(get_mat(f"hess_q{i + 1}", n, n, zero_nn) for i in range(m))
    grad_f = get_vec("grad_f", n)
    Hf = get_mat("hess_f", n, n, zero_nn)
    F = get_vec("F", n) if "F" in ref_kv else None
    JF = get_mat("jac_F", n, n) if "jac_F" in ref_kv else None
    ref = ReferenceData(n, m, s, P, q, J, Hq, grad_f, Hf, F, JF, x_bar, omega_bar)

    f_expr, q_expr, F_expr = None, [], []
    if "expressions" in sec:
        ex = _keyvals(sec["expressions"])
        q_expr = [None] * m
        F_expr = [None] * n if any(k.startswith("F") for k in ex) else []
        for key, (ln, txt, col) in ex.items():
            quote = 1 if txt.startswith('"') else 0
            e = parse_expr(txt.strip('"'), n, s, ln, col - 1 + quote)
            mm = re.fullmatch(r"([qF])(\d+)", key)
            if key == "f":
                f_expr = e
            elif mm:
                target = q_expr if mm.group(1) == "q" else F_expr
                i = int(mm.group(2)) - 1
                if not 0 <= i < len(target):
                    raise ProblemError(f"line {ln}: {key} out of range")
                target[i] = e
            else:
                raise ExprSyntaxError(f"unknown expression name {key!r}", ln, 1)
        if any(e is None for e in q_expr):
            raise ProblemError("[expressions] must define every constraint q1..qm")
        if F_expr and any(e is None for e in F_expr):
            raise ProblemError("[expressions] must define every F1..Fn when any is given")
    flags = frozenset()
    layout = ""
    if "flags" in sec:
        fl = _keyvals(sec["flags"])
        if "nondifferentiable_at_ref" in fl:
            flags = frozenset(x for x in re.split(r"[\s,\[\]]+", fl["nondifferentiable_at_ref"][1]) if x)
        if "layout" in fl:
            layout = fl["layout"][1].strip().lower()
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    prob = ParamProblem(name, ref, f_expr, tuple(q_expr), tuple(F_expr), flags, layout, digest, text)
    if check_consistency and prob.has_expressions:
        check_reference_consistency(prob, tol)
    return prob


def load_problem(path, **kw) -> ParamProblem:
    from pathlib import Path

    p = Path(path)
    return parse_problem(p.read_text(), name=p.stem, **kw)


def check_reference_consistency(prob: ParamProblem, tol: float = 1e-8):
    ref = prob.ref
    x = np.array([float(v) for v in ref.x_bar])
    w = np.array([float(v) for v in ref.omega_bar])
    n = ref.n

    def close(a, b):
        return np.allclose(np.asarray(a, float), np.asarray(b, float), atol=tol, rtol=tol)

    checks = [("f", prob.f, None, ref.grad_f, ref.Hf)]
    checks += [(f"q{i + 1}", e, ref.q[i], ref.J[i], ref.Hq[i]) for i, e in enumerate(prob.q)]
    if prob.F:
        checks += [(f"F{i + 1}", e, ref.F[i] if ref.F else None, ref.JF[i] if ref.JF else None, None) for i, e in enumerate(prob.F)]
    for label, e, val, grad, hess in checks:
        if label in prob.flags or e is None:
            continue
        r = eval_expr(e, x[None, :], w, n, label=label)
        if val is not None and not close(r.v[0], float(val)):
            raise ProblemError(f"{label}: value {r.v[0]:.12g} differs from reference {float(val)}")
        if grad is not None and not close(r.g[0], [float(v) for v in grad]):
            raise ProblemError(f"{label}: gradient {r.g[0]} differs from reference data")
        if hess is not None and not close(r.H[0], [[float(v) for v in row] for row in hess]):
            raise ProblemError(f"{label}: Hessian differs from reference data")


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Evaluation:
    q: np.ndarray  # (N, m)
    Jq: np.ndarray  # (N, m, n)
    Hq: np.ndarray  # (N, m, n, n)
    f: np.ndarray  # (N,)
    grad_f: np.ndarray  # (N, n)
    Hf: np.ndarray  # (N, n, n)
    F: np.ndarray | None = None  # (N, n)
    JF: np.ndarray | None = None  # (N, n, n)


def evaluate(prob: ParamProblem, X, omega, strict: bool = True) -> Evaluation:
    """Batched values and x-derivatives of f, q (and F) at rows of X."""
    if not prob.has_expressions:
        raise ProblemError("problem has no [expressions] section")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = prob.ref.n
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    fj = eval_expr(prob.f, X, w, n, strict, "f")
    qs = [eval_expr(e, X, w, n, strict, f"q{i + 1}") for i, e in enumerate(prob.q)]
    out = Evaluation(
        q=np.stack([r.v for r in qs], axis=1),
        Jq=np.stack([r.g for r in qs], axis=1),
        Hq=np.stack([r.H for r in qs], axis=1),
        f=fj.v,
        grad_f=fj.g,
        Hf=fj.H,
    )
    if prob.F:
        Fs = [eval_expr(e, X, w, n, strict, f"F{i + 1}") for i, e in enumerate(prob.F)]
        out.F = np.stack([r.v for r in Fs], axis=1)
        out.JF = np.stack([r.g for r in Fs], axis=1)
    return out


def eval_qf(prob: ParamProblem, x, omega) -> dict:
    ev = evaluate(prob, np.asarray(x, dtype=float)[None, :], omega)
    out = {"q": ev.q[0], "jac_q": ev.Jq[0], "f": float(ev.f[0]), "grad_f": ev.grad_f[0]}
    if ev.F is not None:
        out["F"] = ev.F[0]
    return out


def _mnorm(A, kind: str) -> float:
    if A.size == 0:
        return 0.0
    if kind == "frobenius":
        return float(np.linalg.norm(A))
    return float(np.linalg.norm(A, 2))


def error_measures(prob: ParamProblem, omega, norm: str = "spectral") -> dict:
    """e_l, τ_l and τ̂_l for l = 1, 2 at parameter omega."""
    if norm not in ("spectral", "frobenius"):
        raise ValueError("norm must be 'spectral' or 'frobenius'")
    x = np.array([[float(v) for v in prob.x_bar]])
    a = evaluate(prob, x, omega)
    b = evaluate(prob, x, [float(v) for v in prob.omega_bar])
    dJ = _mnorm(a.Jq[0] - b.Jq[0], norm)
    dq = float(np.linalg.norm(a.q[0] - b.q[0]))
    dg = float(np.linalg.norm(a.grad_f[0] - b.grad_f[0]))
    dF = dg if a.F is None else float(np.linalg.norm(a.F[0] - b.F[0]))
    out = {}
    for l in (1, 2):
        e = dJ + dq ** (1.0 / l)
        out[f"e{l}"] = e
        out[f"tau{l}"] = e + dg
        out[f"tauhat{l}"] = e + dF
    return out
