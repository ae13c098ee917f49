"""Exact rational polyhedral toolkit.

LP feasibility with Motzkin certificates, cone generators (double description),
hyperplane-arrangement cells and quadratic forms restricted to cones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from math import gcd, lcm

import numpy as np

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# rationals, vectors, matrices


def frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot convert {x!r} to a rational")


def vec(xs) -> tuple:
    return tuple(frac(x) for x in xs)


def mat(rows) -> tuple:
    m = tuple(vec(r) for r in rows)
    if len({len(r) for r in m}) > 1:
        raise ValueError("ragged matrix")
    return m


def dot(a, b) -> Fraction:
    s = ZERO
    for x, y in zip(a, b):
        if x and y:
            s += x * y
    return s


def mat_vec(A, x) -> tuple:
    return tuple(dot(r, x) for r in A)


def transpose(A, ncols: int) -> tuple:
    return tuple(tuple(r[j] for r in A) for j in range(ncols))


def vscale(c, v) -> tuple:
    return tuple(c * x for x in v)


def vadd(u, v) -> tuple:
    return tuple(a + b for a, b in zip(u, v))


def vsub(u, v) -> tuple:
    return tuple(a - b for a, b in zip(u, v))


def is_zero(v) -> bool:
    return all(x == 0 for x in v)


def identity(n: int) -> tuple:
    return tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n))


def rref(A, ncols: int):
    """Reduced row echelon form; returns (rows, pivot columns)."""
    R = [list(r) for r in A]
    pivots = []
    row = 0
    for col in range(ncols):
        p = next((i for i in range(row, len(R)) if R[i][col] != 0), None)
        if p is None:
            continue
        R[row], R[p] = R[p], R[row]
        inv = 1 / R[row][col]
        R[row] = [v * inv for v in R[row]]
        for i in range(len(R)):
            if i != row and R[i][col] != 0:
                f = R[i][col]
                R[i] = [a - f * b for a, b in zip(R[i], R[row])]
        pivots.append(col)
        row += 1
        if row == len(R):
            break
    return [tuple(r) for r in R[: len(pivots)]], pivots


def rank(A, ncols: int) -> int:
    return len(rref(A, ncols)[1])


def nullspace(A, ncols: int) -> list:
    """Exact basis of {x | A x = 0}."""
    R, pivots = rref(A, ncols)
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        x = [ZERO] * ncols
        x[f] = ONE
        for r, p in zip(R, pivots):
            x[p] = -r[f]
        basis.append(tuple(x))
    return basis


def solve_linear(A, b, ncols: int):
    """One exact solution of A x = b, or None."""
    aug = [tuple(r) + (bi,) for r, bi in zip(A, b)]
    R, pivots = rref(aug, ncols + 1)
    if ncols in pivots:
        return None
    x = [ZERO] * ncols
    for r, p in zip(R, pivots):
        x[p] = r[-1]
    return tuple(x)


def primitive(v) -> tuple:
    """Scale a rational vector to coprime integers, keeping direction."""
    if is_zero(v):
        return tuple(ZERO for _ in v)
    den = lcm(*(x.denominator for x in v))
    ints = [int(x * den) for x in v]
    g = 0
    for k in ints:
        g = gcd(g, k)
    return tuple(Fraction(k // g) for k in ints)


def canonical_line(v) -> tuple:
    """Primitive representative of span{v} with positive leading entry."""
    p = primitive(v)
    lead = next((x for x in p if x != 0), ZERO)
    return tuple(-x for x in p) if lead < 0 else p


# ---------------------------------------------------------------------------
# verdicts and certificates


class Status(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Certificate:
    kind: str  # "infeasibility_dual" | "witness" | "ray_list" | free-form tags
    payload: tuple = ()

    def to_json(self):
        return {"kind": self.kind, "payload": _jsonable(self.payload)}


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if hasattr(x, "to_json"):
        return x.to_json()
    return x


@dataclass(frozen=True)
class Verdict:
    """Three-valued outcome: HOLDS carries a certificate, FAILS a witness."""

    status: Status
    payload: object = None
    reason: str = ""
    route: str = ""
    details: tuple = ()

    @classmethod
    def holds(cls, payload=None, reason="", route="", details=()):
        return cls(Status.HOLDS, payload, reason, route, tuple(details))

    @classmethod
    def fails(cls, payload=None, reason="", route="", details=()):
        return cls(Status.FAILS, payload, reason, route, tuple(details))

    @classmethod
    def inconclusive(cls, reason, payload=None, route="", details=()):
        return cls(Status.INCONCLUSIVE, payload, reason, route, tuple(details))

    @property
    def is_holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def is_fails(self) -> bool:
        return self.status is Status.FAILS

    @property
    def is_inconclusive(self) -> bool:
        return self.status is Status.INCONCLUSIVE

    def to_json(self):
        out = {"status": self.status.value}
        if self.route:
            out["route"] = self.route
        if self.reason:
            out["reason"] = self.reason
        if self.payload is not None:
            out["payload"] = _jsonable(self.payload)
        return out


# ---------------------------------------------------------------------------
# constraints


SENSES = ("<=", "<", "==")


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple
    sense: str
    rhs: Fraction

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")

    def holds_at(self, x) -> bool:
        v = dot(self.coeffs, x)
        if self.sense == "<=":
            return v <= self.rhs
        if self.sense == "<":
            return v < self.rhs
        return v == self.rhs


def le(a, b=0) -> Constraint:
    return Constraint(vec(a), "<=", frac(b))


def lt(a, b=0) -> Constraint:
    return Constraint(vec(a), "<", frac(b))


def ge(a, b=0) -> Constraint:
    return Constraint(tuple(-x for x in vec(a)), "<=", -frac(b))


def gt(a, b=0) -> Constraint:
    return Constraint(tuple(-x for x in vec(a)), "<", -frac(b))


def eq(a, b=0) -> Constraint:
    return Constraint(vec(a), "==", frac(b))


def satisfies(cons, x) -> bool:
    return all(c.holds_at(x) for c in cons)


class LinearSystem:
    """Named variable blocks to assemble constraint lists conveniently."""

    def __init__(self):
        self.blocks: dict = {}
        self.nvars = 0
        self.cons: list = []

    def block(self, name, size: int) -> range:
        r = range(self.nvars, self.nvars + size)
        self.blocks[name] = r
        self.nvars += size
        return r

    def row(self, terms: dict) -> list:
        """Coefficient row from {block name: coefficient sequence}."""
        out = [ZERO] * self.nvars
        for name, coeffs in terms.items():
            r = self.blocks[name]
            if len(coeffs) != len(r):
                raise ValueError(f"block {name!r} expects {len(r)} coefficients")
            for j, c in zip(r, coeffs):
                out[j] += frac(c)
        return out

    def add(self, terms: dict, sense: str, rhs=0):
        self.cons.append(Constraint(tuple(self.row(terms)), sense, frac(rhs)))

    def add_raw(self, c: Constraint):
        self.cons.append(c)

    def fix(self, name, values):
        r = self.blocks[name]
        for j, v in zip(r, values):
            row = [ZERO] * self.nvars
            row[j] = ONE
            self.cons.append(Constraint(tuple(row), "==", frac(v)))

    def extract(self, x, name) -> tuple:
        return tuple(x[j] for j in self.blocks[name])


# ---------------------------------------------------------------------------
# simplex core (tableau, Bland's rule)


def _pivot(T, cost, r, c):
    row = T[r]
    piv = row[c]
    if piv != 1:
        inv = 1 / piv
        row = [v * inv for v in row]
        T[r] = row
    nz = [j for j, v in enumerate(row) if v]
    for i, other in enumerate(T):
        if i != r:
            f = other[c]
            if f:
                other = list(other)
                for j in nz:
                    other[j] -= f * row[j]
                T[i] = other
    f = cost[c]
    if f:
        for j in nz:
            cost[j] -= f * row[j]


def _bland(T, basis, cost, allowed) -> bool:
    """Minimize; returns False when unbounded."""
    while True:
        enter = next((j for j in allowed if cost[j] < 0), None)
        if enter is None:
            return True
        best = None
        for i, row in enumerate(T):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return False
        _pivot(T, cost, best[1], enter)
        basis[best[1]] = enter


def _solve_weak(cons, nvars, nonneg=frozenset(), maximize=None):
    """Point satisfying weak/equality rows (optionally maximizing one nonneg
    variable, assumed bounded) or None when infeasible."""
    colmap = []  # per variable: (plus column, minus column or None)
    ncols = 0
    for j in range(nvars):
        if j in nonneg:
            colmap.append((ncols, None))
            ncols += 1
        else:
            colmap.append((ncols, ncols + 1))
            ncols += 2
    nslack = sum(1 for c in cons if c.sense != "==")
    nstruct = ncols + nslack
    rows, basis, art_rows = [], [], []
    slack = ncols
    for c in cons:
        r = [ZERO] * nstruct
        for j, a in enumerate(c.coeffs):
            if a:
                p, m = colmap[j]
                r[p] += a
                if m is not None:
                    r[m] -= a
        rhs = c.rhs
        s_col = None
        if c.sense != "==":
            r[slack] = ONE
            s_col = slack
            slack += 1
        if rhs < 0:
            r = [-v for v in r]
            rhs = -rhs
        if s_col is not None and r[s_col] == 1:
            basis.append(s_col)
        else:
            basis.append(None)
            art_rows.append(len(rows))
        rows.append(r + [rhs])
    nart = len(art_rows)
    width = nstruct + nart
    T = []
    for i, r in enumerate(rows):
        full = r[:-1] + [ZERO] * nart + [r[-1]]
        T.append(full)
    for k, i in enumerate(art_rows):
        T[i][nstruct + k] = ONE
        basis[i] = nstruct + k
    cost = [ZERO] * (width + 1)
    for i in art_rows:
        for j in range(nstruct):
            cost[j] -= T[i][j]
        cost[-1] -= T[i][-1]
    if nart:
        _bland(T, basis, cost, range(width))
        if cost[-1] != 0:  # -(sum of artificials) at optimum
            return None
        keep = []
        for i in range(len(T)):
            if basis[i] >= nstruct:
                j = next((j for j in range(nstruct) if T[i][j] != 0), None)
                if j is None:
                    continue  # redundant row
                _pivot(T, cost, i, j)
                basis[i] = j
            keep.append(i)
        T = [T[i][:nstruct] + [T[i][-1]] for i in keep]
        basis = [basis[i] for i in keep]
    if maximize is not None:
        col = colmap[maximize][0]
        c = [ZERO] * nstruct
        c[col] = -ONE
        cost = list(c) + [ZERO]
        for i, b in enumerate(basis):
            cb = c[b]
            if cb:
                row = T[i]
                for j in range(nstruct + 1):
                    cost[j] -= cb * row[j]
        if not _bland(T, basis, cost, range(nstruct)):
            raise ArithmeticError("maximized variable is unbounded")
    values = [ZERO] * nstruct
    for i, b in enumerate(basis):
        values[b] = T[i][-1]
    x = []
    for p, m in colmap:
        x.append(values[p] - (values[m] if m is not None else ZERO))
    return tuple(x)


def find_point(cons, nvars: int):
    """A rational point satisfying all constraints (strict ones strictly) or None."""
    strict = [c for c in cons if c.sense == "<"]
    if not strict:
        return _solve_weak(cons, nvars)
    t = nvars
    ext = []
    for c in cons:
        if c.sense == "<":
            ext.append(Constraint(c.coeffs + (ONE,), "<=", c.rhs))
        else:
            ext.append(Constraint(c.coeffs + (ZERO,), c.sense, c.rhs))
    ext.append(Constraint((ZERO,) * nvars + (ONE,), "<=", ONE))
    sol = _solve_weak(ext, nvars + 1, nonneg=frozenset({t}), maximize=t)
    if sol is None or sol[t] <= 0:
        return None
    return sol[:nvars]


def _alternative(cons, nvars):
    """Multipliers y certifying infeasibility (Motzkin), or None."""
    m = len(cons)
    nonneg = frozenset(i for i, c in enumerate(cons) if c.sense != "==")
    alt = []
    for j in range(nvars):
        alt.append(Constraint(tuple(c.coeffs[j] for c in cons), "==", ZERO))
    b = tuple(c.rhs for c in cons)
    alt.append(Constraint(b, "<=", ZERO))
    alt.append(Constraint(tuple(-bi + (ONE if c.sense == "<" else ZERO) for bi, c in zip(b, cons)), "==", ONE))
    return _solve_weak(alt, m, nonneg=nonneg)


def verify_dual(cons, y, nvars: int) -> bool:
    """Exact check of a Motzkin infeasibility certificate."""
    if len(y) != len(cons):
        return False
    for c, yi in zip(cons, y):
        if c.sense != "==" and yi < 0:
            return False
    for j in range(nvars):
        if sum((yi * c.coeffs[j] for c, yi in zip(cons, y)), ZERO) != 0:
            return False
    by = sum((yi * c.rhs for c, yi in zip(cons, y)), ZERO)
    if by < 0:
        return True
    strict_mass = sum((yi for c, yi in zip(cons, y) if c.sense == "<"), ZERO)
    return by == 0 and strict_mass > 0


def _check_dims(cons, nvars):
    for c in cons:
        if len(c.coeffs) != nvars:
            raise ValueError(f"constraint has {len(c.coeffs)} coefficients, expected {nvars}")


def lp_feasible(cons, nvars: int | None = None) -> Verdict:
    """Exact feasibility of mixed weak/strict/equality linear constraints.

    HOLDS carries a witness point, FAILS a Motzkin dual; never inconclusive.
    """
    cons = list(cons)
    if nvars is None:
        if not cons:
            raise ValueError("variable count needed for an empty system")
        nvars = len(cons[0].coeffs)
    if nvars < 1:
        raise ValueError("need at least one variable")
    _check_dims(cons, nvars)
    x = find_point(cons, nvars)
    if x is not None:
        if not satisfies(cons, x):
            raise ArithmeticError("simplex produced an infeasible point")
        return Verdict.holds(Certificate("witness", x))
    y = _alternative(cons, nvars)
    if y is None or not verify_dual(cons, y, nvars):
        raise ArithmeticError("primal and alternative systems are both infeasible")
    return Verdict.fails(Certificate("infeasibility_dual", y))


# ---------------------------------------------------------------------------
# polyhedra and cones


@dataclass(frozen=True)
class Polyhedron:
    """{y | A y <= b, E y = e}."""

    dim: int
    A: tuple = ()
    b: tuple = ()
    E: tuple = ()
    e: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "A", mat(self.A))
        object.__setattr__(self, "b", vec(self.b))
        object.__setattr__(self, "E", mat(self.E))
        object.__setattr__(self, "e", vec(self.e))
        if len(self.A) != len(self.b) or len(self.E) != len(self.e):
            raise ValueError("row counts of matrix and right-hand side differ")
        for r in self.A + self.E:
            if len(r) != self.dim:
                raise ValueError("row length does not match dimension")

    def rows(self) -> list:
        """All rows as inequalities (equalities become pairs)."""
        out = list(zip(self.A, self.b))
        for r, v in zip(self.E, self.e):
            out.append((r, v))
            out.append((tuple(-x for x in r), -v))
        return out

    def constraints(self, offset=0, total=None) -> list:
        total = self.dim if total is None else total
        out = []
        for r, v in zip(self.A, self.b):
            out.append(Constraint(_embed(r, offset, total), "<=", v))
        for r, v in zip(self.E, self.e):
            out.append(Constraint(_embed(r, offset, total), "==", v))
        return out

    def contains(self, y) -> bool:
        return all(dot(r, y) <= v for r, v in zip(self.A, self.b)) and all(
            dot(r, y) == v for r, v in zip(self.E, self.e)
        )

    def is_empty(self) -> bool:
        if not self.A and not self.E:
            return False
        return find_point(self.constraints(), self.dim) is None

    def to_json(self):
        return {"A": _jsonable(self.A), "b": _jsonable(self.b), "E": _jsonable(self.E), "e": _jsonable(self.e)}


def _embed(row, offset, total) -> tuple:
    out = [ZERO] * total
    out[offset : offset + len(row)] = row
    return tuple(out)


@dataclass(frozen=True)
class ConvexCone:
    """{z | G z <= 0, H z = 0}."""

    dim: int
    G: tuple = ()
    H: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "G", mat(self.G))
        object.__setattr__(self, "H", mat(self.H))
        for r in self.G + self.H:
            if len(r) != self.dim:
                raise ValueError("row length does not match cone dimension")

    def constraints(self, offset=0, total=None) -> list:
        total = self.dim if total is None else total
        out = [Constraint(_embed(r, offset, total), "<=", ZERO) for r in self.G]
        out += [Constraint(_embed(r, offset, total), "==", ZERO) for r in self.H]
        return out

    def contains(self, z) -> bool:
        return all(dot(r, z) <= 0 for r in self.G) and all(dot(r, z) == 0 for r in self.H)

    def canonical(self) -> "ConvexCone":
        G = sorted({primitive(r) for r in self.G if not is_zero(r)})
        H = sorted({canonical_line(r) for r in self.H if not is_zero(r)})
        return ConvexCone(self.dim, tuple(G), tuple(H))

    def intersect(self, other: "ConvexCone") -> "ConvexCone":
        return ConvexCone(self.dim, self.G + other.G, self.H + other.H).canonical()

    def with_equalities(self, rows) -> "ConvexCone":
        return ConvexCone(self.dim, self.G, self.H + mat(rows))

    def as_polyhedron(self) -> Polyhedron:
        return Polyhedron(self.dim, self.G, (ZERO,) * len(self.G), self.H, (ZERO,) * len(self.H))

    def is_trivial(self) -> bool:
        return not cone_nontrivial(self).is_holds

    def is_subset(self, other: "ConvexCone") -> bool:
        return cone_subset(self, other)

    def describe(self, names=None) -> str:
        names = names or [f"z{i + 1}" for i in range(self.dim)]
        parts = [_lin_str(r, names) + " <= 0" for r in self.G]
        parts += [_lin_str(r, names) + " = 0" for r in self.H]
        return "{" + ", ".join(parts) + "}" if parts else f"R^{self.dim}"

    def to_json(self):
        return {"G": _jsonable(self.G), "H": _jsonable(self.H)}


def _lin_str(row, names) -> str:
    terms = []
    for c, n in zip(row, names):
        if c == 0:
            continue
        if c == 1:
            terms.append(f"+{n}")
        elif c == -1:
            terms.append(f"-{n}")
        else:
            terms.append(f"{'+' if c > 0 else ''}{c}*{n}")
    s = " ".join(terms) or "0"
    return s[1:] if s.startswith("+") else s


def whole_space(n: int) -> ConvexCone:
    return ConvexCone(n)


def zero_cone(n: int) -> ConvexCone:
    return ConvexCone(n, (), identity(n))


def product_cone(a: ConvexCone, b: ConvexCone) -> ConvexCone:
    n = a.dim + b.dim
    G = [_embed(r, 0, n) for r in a.G] + [_embed(r, a.dim, n) for r in b.G]
    H = [_embed(r, 0, n) for r in a.H] + [_embed(r, a.dim, n) for r in b.H]
    return ConvexCone(n, tuple(G), tuple(H))


def cone_subset(a: ConvexCone, b: ConvexCone) -> bool:
    """a ⊆ b, decided by one LP per row of b."""
    base = a.constraints()
    for r in b.G:
        if find_point(base + [Constraint(tuple(-x for x in r), "<", ZERO)], a.dim):
            return False
    for r in b.H:
        if find_point(base + [Constraint(r, "<", ZERO)], a.dim) or find_point(
            base + [Constraint(tuple(-x for x in r), "<", ZERO)], a.dim
        ):
            return False
    return True


def cone_equal(a: ConvexCone, b: ConvexCone) -> bool:
    return cone_subset(a, b) and cone_subset(b, a)


def cone_nontrivial(C: ConvexCone, extra_eq=()) -> Verdict:
    """Is {λ ∈ C | extra_eq λ = 0} ≠ {0}?  One LP per normalization λ_k = ±1."""
    extra = mat(extra_eq)
    for r in extra:
        if len(r) != C.dim:
            raise ValueError("extra equality rows do not match cone dimension")
    base = C.constraints() + [Constraint(r, "==", ZERO) for r in extra]
    duals = []
    for k in range(C.dim):
        for s in (ONE, -ONE):
            row = tuple(ONE if j == k else ZERO for j in range(C.dim))
            v = lp_feasible(base + [Constraint(row, "==", s)], C.dim)
            if v.is_holds:
                return Verdict.holds(Certificate("witness", v.payload.payload), route="normalization")
            duals.append(((k, s), v.payload.payload))
    return Verdict.fails(Certificate("infeasibility_dual", tuple(duals)), route="normalization")


def polar(C: ConvexCone) -> ConvexCone:
    rays, lin = extreme_rays(C)
    return ConvexCone(C.dim, tuple(rays), tuple(lin)).canonical()


def implicit_equalities(C: ConvexCone) -> list:
    """Rows of G that vanish on all of C."""
    base = C.constraints()
    return [r for r in C.G if find_point(base + [Constraint(r, "<", ZERO)], C.dim) is None]


def linear_span_basis(C: ConvexCone) -> list:
    """Exact basis of span(C)."""
    rows = list(C.H) + implicit_equalities(C)
    return nullspace(rows, C.dim)


# ---------------------------------------------------------------------------
# double description


def extreme_rays(C: ConvexCone):
    """Generators of C: (rays, lineality basis), each a primitive integer vector.

    Every element of C is a nonnegative combination of rays plus a lineality vector.
    """
    n = C.dim
    lin = [tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)]
    rays: list = []
    tight: list = []  # per ray: frozenset of processed inequality indices tight at it
    rows = list(C.G) + list(C.H) + [tuple(-x for x in h) for h in C.H]
    for idx, a in enumerate(rows):
        if is_zero(a):
            continue
        vals = [dot(a, l) for l in lin]
        k = next((i for i, v in enumerate(vals) if v != 0), None)
        if k is not None:
            l0, v0 = lin[k], vals[k]
            if v0 > 0:
                l0, v0 = tuple(-x for x in l0), -v0
            lin = [vsub(l, vscale(dot(a, l) / v0, l0)) for i, l in enumerate(lin) if i != k]
            rays = [vsub(r, vscale(dot(a, r) / v0, l0)) for r in rays]
            tight = [t | {idx} for t in tight]
            rays.append(l0)
            tight.append(frozenset(range(idx)))
            continue
        vals = [dot(a, r) for r in rays]
        pos = [i for i, v in enumerate(vals) if v > 0]
        neg = [i for i, v in enumerate(vals) if v < 0]
        zer = [i for i, v in enumerate(vals) if v == 0]
        new_rays = [rays[i] for i in neg] + [rays[i] for i in zer]
        new_tight = [tight[i] for i in neg] + [tight[i] | {idx} for i in zer]
        for p in pos:
            for q in neg:
                common = tight[p] & tight[q]
                if any(i not in (p, q) and common <= tight[i] for i in range(len(rays))):
                    continue
                r = vsub(vscale(vals[p], rays[q]), vscale(vals[q], rays[p]))
                if is_zero(r):
                    continue
                new_rays.append(r)
                new_tight.append(common | {idx})
        rays, tight = new_rays, new_tight
    out_rays = []
    seen = set()
    for r in rays:
        if is_zero(r):
            continue
        p = primitive(r)
        if p not in seen:
            seen.add(p)
            out_rays.append(p)
    out_lin = [canonical_line(l) for l in lin]
    return out_rays, out_lin


def conic_hull_contains(rays, lin, z) -> bool:
    """Exact membership of z in cone(rays) + span(lin)."""
    k = len(rays) + len(lin)
    n = len(z)
    if k == 0:
        return is_zero(z)
    cons = []
    for i in range(n):
        row = tuple(r[i] for r in rays) + tuple(l[i] for l in lin)
        cons.append(Constraint(row, "==", z[i]))
    for j in range(len(rays)):
        row = tuple(-ONE if i == j else ZERO for i in range(k))
        cons.append(Constraint(row, "<=", ZERO))
    return find_point(cons, k) is not None


def polyhedron_generators(P: Polyhedron):
    """(vertices, rays, lineality) of a nonempty polyhedron via homogenization."""
    n = P.dim
    G = [tuple(r) + (-v,) for r, v in zip(P.A, P.b)]
    G.append((ZERO,) * n + (-ONE,))
    H = [tuple(r) + (-v,) for r, v in zip(P.E, P.e)]
    rays, lin = extreme_rays(ConvexCone(n + 1, tuple(G), tuple(H)))
    verts, drays, dlin = [], [], []
    for r in rays:
        if r[-1] > 0:
            verts.append(tuple(x / r[-1] for x in r[:-1]))
        else:
            drays.append(primitive(r[:-1]))
    for l in lin:
        if l[-1] != 0:
            raise ArithmeticError("homogenized lineality leaves the slice")
        dlin.append(canonical_line(l[:-1]))
    return verts, drays, dlin


def polyhedral_union_subset(xs, ys) -> bool:
    """Is ∪xs ⊆ ∪ys?  Exact: searches a point of some x violating one row of each y."""
    ys = list(ys)
    for X in xs:
        base = X.constraints()
        if find_point(base, X.dim) is None:
            continue
        if _escape(base, X.dim, [Y.rows() for Y in ys], 0):
            return False
    return True


def _escape(cons, n, yrows, k) -> bool:
    if k == len(yrows):
        return True
    for r, v in yrows[k]:
        c = cons + [Constraint(tuple(-x for x in r), "<", -v)]
        if find_point(c, n) is not None and _escape(c, n, yrows, k + 1):
            return True
    return False


def polyhedral_union_equal(xs, ys) -> bool:
    return polyhedral_union_subset(xs, ys) and polyhedral_union_subset(ys, xs)


# ---------------------------------------------------------------------------
# hyperplane arrangements


@dataclass(frozen=True)
class CellSignature:
    """Sign vector of a nonempty relatively open cell, with a representative."""

    signs: tuple
    point: tuple = field(compare=False, default=())

    def constraints(self, hyperplanes, strict=True) -> list:
        out = []
        for h, s in zip(hyperplanes, self.signs):
            if s == 0:
                out.append(Constraint(tuple(h), "==", ZERO))
            elif s > 0:
                out.append(Constraint(tuple(-x for x in h), "<" if strict else "<=", ZERO))
            else:
                out.append(Constraint(tuple(h), "<" if strict else "<=", ZERO))
        return out

    def closure(self, hyperplanes, restrict_to: ConvexCone) -> ConvexCone:
        G = list(restrict_to.G)
        H = list(restrict_to.H)
        for h, s in zip(hyperplanes, self.signs):
            if s == 0:
                H.append(tuple(h))
            elif s > 0:
                G.append(tuple(-x for x in h))
            else:
                G.append(tuple(h))
        return ConvexCone(restrict_to.dim, tuple(G), tuple(H))

    def is_zero_signature(self) -> bool:
        return all(s == 0 for s in self.signs)

    def to_json(self):
        return {"signs": "".join("-0+"[s + 1] for s in self.signs), "point": _jsonable(self.point)}


def sign_of(x) -> int:
    return (x > 0) - (x < 0)


def arrangement_cells(hyperplanes, restrict_to: ConvexCone, allowed=None) -> list:
    """Nonempty cells of the arrangement inside restrict_to.

    `allowed` optionally restricts the sign choices per hyperplane.
    """
    hyperplanes = [vec(h) for h in hyperplanes]
    n = restrict_to.dim
    base = restrict_to.constraints()
    root = find_point(base, n)
    if root is None:
        return []
    partial = [((), [], root)]
    for k, h in enumerate(hyperplanes):
        choices = (-1, 0, 1) if allowed is None else allowed[k]
        nxt = []
        for signs, cons, pt in partial:
            here = sign_of(dot(h, pt))
            for s in choices:
                c = cons + [_sign_constraint(h, s)]
                if s == here:
                    p = pt
                else:
                    p = find_point(base + c, n)
                    if p is None:
                        continue
                nxt.append((signs + (s,), c, p))
        partial = nxt
    return [CellSignature(s, p) for s, _, p in sorted(partial, key=lambda t: t[0])]


def _sign_constraint(h, s) -> Constraint:
    if s == 0:
        return Constraint(h, "==", ZERO)
    if s > 0:
        return Constraint(tuple(-x for x in h), "<", ZERO)
    return Constraint(h, "<", ZERO)


def cell_generators(cell: CellSignature, hyperplanes, restrict_to: ConvexCone):
    """Generators of the closure of a cell."""
    return extreme_rays(cell.closure(hyperplanes, restrict_to))


def cell_dimension(cell: CellSignature, hyperplanes, restrict_to: ConvexCone) -> int:
    return len(linear_span_basis(cell.closure(hyperplanes, restrict_to)))


# ---------------------------------------------------------------------------
# quadratic forms on cones


class QSign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ZERO = "zero"
    INCONCLUSIVE = "inconclusive"
    EMPTY = "empty"


@dataclass(frozen=True)
class QuadraticSup:
    sign: QSign
    value: float
    maximizer: tuple = ()
    exact: bool = False  # maximizer rational and its value sign checked exactly


def _float_null(M, n, tol=1e-10):
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[r:].T


def _to_rational_vec(z, den=10**6) -> tuple:
    return tuple(Fraction(float(x)).limit_denominator(den) for x in z)


def quad(Q, u) -> Fraction:
    return dot(u, mat_vec(Q, u))


def max_quadratic_on_cone(Q, C: ConvexCone, tol: float = 1e-9, max_rows: int = 14) -> QuadraticSup:
    """Sign of sup{z^T Q z | z ∈ C, |z| = 1} by face enumeration."""
    Q = mat(Q)
    n = C.dim
    if len(Q) != n or any(len(r) != n for r in Q):
        raise ValueError("Q must be square of the cone dimension")
    if any(Q[i][j] != Q[j][i] for i in range(n) for j in range(i)):
        raise ValueError("Q must be symmetric")
    span = linear_span_basis(C)
    if not span:
        return QuadraticSup(QSign.EMPTY, float("-inf"))
    restricted = [[quad_bilinear(Q, a, b) for b in span] for a in span]
    if all(v == 0 for row in restricted for v in row):
        return QuadraticSup(QSign.ZERO, 0.0, _unit_rep(C), True)
    Gf = np.array([[float(x) for x in r] for r in C.G], dtype=float).reshape(len(C.G), n)
    Hf = np.array([[float(x) for x in r] for r in C.H], dtype=float).reshape(len(C.H), n)
    Qf = np.array([[float(x) for x in r] for r in Q], dtype=float)
    m = len(C.G)
    if m > max_rows:
        raise ValueError(f"face enumeration limited to {max_rows} inequality rows")
    best_val, best_z = -np.inf, None
    seen = set()
    for size in range(m + 1):
        for S in combinations(range(m), size):
            M = np.vstack([Gf[list(S)], Hf]) if S else Hf
            B = _float_null(M, n)
            if B.shape[1] == 0:
                continue
            key = tuple(np.round((B @ B.T).ravel(), 8))
            if key in seen:
                continue
            seen.add(key)
            w, V = np.linalg.eigh(B.T @ Qf @ B)
            for val, v in zip(w, V.T):
                z = B @ v
                z /= np.linalg.norm(z)
                for cand in (z, -z):
                    if _in_cone_float(Gf, Hf, cand) and val > best_val:
                        best_val, best_z = float(val), cand
    if best_z is None:
        return QuadraticSup(QSign.INCONCLUSIVE, float("nan"))
    if best_val > tol:
        z, ok = _rationalize_in_cone(Q, C, best_z, positive=True)
        return QuadraticSup(QSign.POSITIVE, best_val, z, ok)
    if best_val < -tol:
        return QuadraticSup(QSign.NEGATIVE, best_val, tuple(best_z))
    if nullspace(Q, n):
        v = cone_nontrivial(C.with_equalities(Q))
        if v.is_holds:
            return QuadraticSup(QSign.ZERO, best_val, v.payload.payload, True)
    return QuadraticSup(QSign.INCONCLUSIVE, best_val, tuple(best_z))


def quad_bilinear(Q, a, b) -> Fraction:
    return dot(a, mat_vec(Q, b))


def _in_cone_float(Gf, Hf, z, tol=1e-9) -> bool:
    if Gf.size and np.max(Gf @ z) > tol:
        return False
    if Hf.size and np.max(np.abs(Hf @ z)) > tol:
        return False
    return True


def _unit_rep(C: ConvexCone) -> tuple:
    v = cone_nontrivial(C)
    return v.payload.payload if v.is_holds else ()


def _rationalize_in_cone(Q, C: ConvexCone, z, positive: bool):
    """Rational point near z inside C with the same strict sign of z^T Q z."""
    interior = _relative_interior_point(C)
    for den in (10**6, 10**9):
        zr = _to_rational_vec(z, den)
        for eps in (ZERO, Fraction(1, 10**4), Fraction(1, 10**2)):
            cand = vadd(zr, vscale(eps, interior)) if interior else zr
            if C.contains(cand):
                val = quad(Q, cand)
                if (val > 0) if positive else (val < 0):
                    return cand, True
    return tuple(float(x) for x in z), False


def _relative_interior_point(C: ConvexCone):
    """A point in the relative interior of C (strict on non-implicit rows)."""
    imp = set(implicit_equalities(C))
    cons = [Constraint(r, "==", ZERO) for r in C.H] + [Constraint(r, "==", ZERO) for r in imp]
    cons += [Constraint(r, "<", ZERO) for r in C.G if r not in imp]
    if not any(c.sense == "<" for c in cons):
        return ()
    p = find_point(cons, C.dim)
    return p or ()
