"""Disjunctive sets and their tangent / normal cones.

P is a product of blocks; each block is a finite union of convex polyhedra.
Structured blocks (nonpositive orthant, zero, free, complementarity EC,
vanishing VC) use closed-form cone tables; generic unions go through an
arrangement-cell construction on the localized tangent cone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from .geometry import (
    ONE,
    ZERO,
    ConvexCone,
    Polyhedron,
    arrangement_cells,
    canonical_line,
    cone_subset,
    dot,
    extreme_rays,
    find_point,
    frac,
    identity,
    is_zero,
    mat_vec,
    polyhedral_union_equal,
    polyhedral_union_subset,
    product_cone,
    sign_of,
    solve_linear,
    vec,
    vsub,
    Constraint,
)


class NotInSet(ValueError):
    """Raised when a point lies outside the disjunctive set."""


# ---------------------------------------------------------------------------
# blocks


BLOCK_KINDS = ("nonpos", "zero", "free", "ec", "vc", "union")


@dataclass(frozen=True)
class Block:
    kind: str
    dim: int
    polys: tuple = ()

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.kind in ("ec", "vc") and self.dim != 2:
            raise ValueError(f"{self.kind} blocks are two-dimensional")
        if self.kind == "union":
            if not self.polys:
                raise ValueError("union block needs at least one polyhedron")
            for p in self.polys:
                if p.dim != self.dim:
                    raise ValueError("union member dimension mismatch")
                if p.is_empty():
                    raise ValueError("union members must be nonempty")

    def pieces(self) -> tuple:
        return _block_pieces(self)

    def contains(self, a) -> bool:
        return any(p.contains(a) for p in self.pieces())

    def label(self) -> str:
        if self.kind in ("ec", "vc"):
            return self.kind
        if self.kind == "union":
            return f"union({len(self.polys)})"
        return f"{self.kind} {self.dim}"


def NonPos(k: int) -> Block:
    return Block("nonpos", k)


def Zero(k: int) -> Block:
    return Block("zero", k)


def Free(k: int) -> Block:
    return Block("free", k)


def EC() -> Block:
    return Block("ec", 2)


def VC() -> Block:
    return Block("vc", 2)


def Union(polys) -> Block:
    polys = tuple(polys)
    return Block("union", polys[0].dim, polys)


@lru_cache(maxsize=None)
def _block_pieces(b: Block) -> tuple:
    k = b.dim
    if b.kind == "nonpos":
        return (Polyhedron(k, identity(k), (ZERO,) * k),)
    if b.kind == "zero":
        return (Polyhedron(k, (), (), identity(k), (ZERO,) * k),)
    if b.kind == "free":
        return (Polyhedron(k),)
    if b.kind == "ec":
        # R_- x {0}  and  {0} x R_-
        return (
            Polyhedron(2, [[1, 0]], [0], [[0, 1]], [0]),
            Polyhedron(2, [[0, 1]], [0], [[1, 0]], [0]),
        )
    if b.kind == "vc":
        # R_+ x R_-  and  {0} x R_+
        return (
            Polyhedron(2, [[-1, 0], [0, 1]], [0, 0]),
            Polyhedron(2, [[0, -1]], [0], [[1, 0]], [0]),
        )
    return b.polys


# ---------------------------------------------------------------------------
# cone unions


@dataclass(frozen=True)
class ConeUnion:
    dim: int
    pieces: tuple = ()

    def contains(self, z) -> bool:
        z = vec(z)
        return any(p.contains(z) for p in self.pieces)

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    def dedup(self) -> "ConeUnion":
        return ConeUnion(self.dim, dedup_cones(self.pieces))

    def equals(self, other: "ConeUnion") -> bool:
        return polyhedral_union_equal(
            [p.as_polyhedron() for p in self.pieces], [p.as_polyhedron() for p in other.pieces]
        )

    def subset_of(self, other: "ConeUnion") -> bool:
        return polyhedral_union_subset(
            [p.as_polyhedron() for p in self.pieces], [p.as_polyhedron() for p in other.pieces]
        )

    def describe(self, names=None) -> str:
        if not self.pieces:
            return "empty set"
        return " ∪ ".join(p.describe(names) for p in self.pieces)

    def to_json(self):
        return {"dim": self.dim, "pieces": [p.to_json() for p in self.pieces]}


def dedup_cones(pieces) -> tuple:
    """Drop syntactic duplicates, then pieces contained in another piece."""
    uniq = []
    seen = set()
    for p in pieces:
        c = p.canonical()
        if c not in seen:
            seen.add(c)
            uniq.append(c)
    keep = []
    dropped = set()
    for i, p in enumerate(uniq):
        if any(j != i and j not in dropped and cone_subset(p, q) for j, q in enumerate(uniq)):
            dropped.add(i)
        else:
            keep.append(p)
    return tuple(keep)


def cone_product_union(parts) -> tuple:
    """All cross products of per-block piece lists."""
    out = []
    for combo in product(*parts):
        c = combo[0]
        for nxt in combo[1:]:
            c = product_cone(c, nxt)
        out.append(c.canonical())
    return tuple(out)


def polar_of_union(cones, dim: int) -> ConvexCone:
    G, H = [], []
    for c in cones:
        rays, lin = extreme_rays(c)
        G += rays
        H += lin
    return ConvexCone(dim, tuple(G), tuple(H)).canonical()


# ---------------------------------------------------------------------------
# disjunctive sets


@dataclass(frozen=True)
class ActivePattern:
    """Pieces containing y and, per piece, the active row indices of piece.rows()."""

    pieces: tuple
    active: tuple  # aligned with pieces

    def as_dict(self) -> dict:
        return dict(zip(self.pieces, self.active))


@dataclass(frozen=True)
class DisjunctiveSet:
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def offsets(self) -> list:
        out, o = [], 0
        for b in self.blocks:
            out.append(o)
            o += b.dim
        return out

    def split(self, y) -> list:
        y = vec(y)
        if len(y) != self.dim:
            raise ValueError(f"vector of length {len(y)} for a set of dimension {self.dim}")
        return [y[o : o + b.dim] for o, b in zip(self.offsets(), self.blocks)]

    def contains(self, y) -> bool:
        return all(b.contains(a) for b, a in zip(self.blocks, self.split(y)))

    def flat_pieces(self) -> tuple:
        return _flat_pieces(self)

    def flatten(self) -> "DisjunctiveSet":
        return DisjunctiveSet((Block("union", self.dim, self.flat_pieces()),))

    def piece_count(self) -> int:
        n = 1
        for b in self.blocks:
            n *= len(b.pieces())
        return n

    def layout(self) -> tuple:
        return tuple(b.kind for b in self.blocks)


@lru_cache(maxsize=None)
def _flat_pieces(P: DisjunctiveSet) -> tuple:
    m = P.dim
    offs = P.offsets()
    out = []
    for combo in product(*(b.pieces() for b in P.blocks)):
        A, bb, E, e = [], [], [], []
        for o, piece in zip(offs, combo):
            for r, v in zip(piece.A, piece.b):
                A.append(_pad(r, o, m))
                bb.append(v)
            for r, v in zip(piece.E, piece.e):
                E.append(_pad(r, o, m))
                e.append(v)
        out.append(Polyhedron(m, A, bb, E, e))
    return tuple(out)


def _pad(row, o, m) -> tuple:
    out = [ZERO] * m
    out[o : o + len(row)] = row
    return tuple(out)


def _pieces_pattern(pieces, y) -> list:
    pat = []
    for i, p in enumerate(pieces):
        if p.contains(y):
            rows = p.rows()
            pat.append((i, tuple(j for j, (r, v) in enumerate(rows) if dot(r, y) == v)))
    return pat


def active_pattern(P: DisjunctiveSet, y) -> ActivePattern:
    y = vec(y)
    if len(y) != P.dim:
        raise ValueError("dimension mismatch")
    pat = _pieces_pattern(P.flat_pieces(), y)
    if not pat:
        raise NotInSet(f"point {_fmt(y)} is not in the set")
    return ActivePattern(tuple(i for i, _ in pat), tuple(a for _, a in pat))


def _fmt(y) -> str:
    return "(" + ", ".join(str(x) for x in y) + ")"


# ---------------------------------------------------------------------------
# generic union machinery (also used for flattened sets)


def _active_tangents(pieces, y) -> list:
    """[(piece index, active rows, tangent cone)] at y."""
    out = []
    dim = pieces[0].dim
    for i, act in _pieces_pattern(pieces, y):
        rows = pieces[i].rows()
        G = tuple(rows[j][0] for j in act)
        out.append((i, act, ConvexCone(dim, G)))
    return out


@lru_cache(maxsize=4096)
def _generic_tangent(pieces: tuple, y: tuple) -> tuple:
    tans = _active_tangents(pieces, y)
    if not tans:
        raise NotInSet(f"point {_fmt(y)} is not in the set")
    return dedup_cones([t for _, _, t in tans])


@lru_cache(maxsize=4096)
def _generic_regular(pieces: tuple, y: tuple) -> ConvexCone:
    return polar_of_union(_generic_tangent(pieces, y), pieces[0].dim)


@lru_cache(maxsize=4096)
def _generic_dir_normal(pieces: tuple, y: tuple, d: tuple) -> tuple:
    dim = pieces[0].dim
    tans = _active_tangents(pieces, y)
    if not tans:
        raise NotInSet(f"point {_fmt(y)} is not in the set")
    if not any(t.contains(d) for _, _, t in tans):
        return ()
    hyper = []
    for _, _, t in tans:
        for r in t.G:
            if not is_zero(r):
                h = canonical_line(r)
                if h not in hyper:
                    hyper.append(h)
    allowed = []
    for h in hyper:
        s = sign_of(dot(h, d))
        allowed.append((s,) if s != 0 else (-1, 0, 1))
    cells = {}
    for _, _, t in tans:
        for c in arrangement_cells(hyper, t, allowed):
            cells.setdefault(c.signs, c)
    normals = []
    for signs in sorted(cells):
        z = cells[signs].point
        local = []
        for i, act, t in tans:
            if t.contains(z):
                rows = pieces[i].rows()
                G = tuple(rows[j][0] for j in act if dot(rows[j][0], z) == 0)
                local.append(ConvexCone(dim, G))
        normals.append(polar_of_union(local, dim))
    return dedup_cones(normals)


# ---------------------------------------------------------------------------
# closed-form tables for structured blocks


def _cc(dim, G=(), H=()) -> ConvexCone:
    return ConvexCone(dim, G, H).canonical()


def _ortho(c: ConvexCone, u) -> ConvexCone:
    if is_zero(u):
        return c
    return c.with_equalities([u]).canonical()


def _nonpos_tangent(k, g) -> tuple:
    if any(x > 0 for x in g):
        raise NotInSet(f"point {_fmt(g)} is not nonpositive")
    return (_cc(k, [_unit(k, i) for i in range(k) if g[i] == 0]),)


def _unit(k, i, s=1) -> tuple:
    return tuple(frac(s) if j == i else ZERO for j in range(k))


def _nonpos_regular(k, g) -> ConvexCone:
    _nonpos_tangent(k, g)
    G = [_unit(k, i, -1) for i in range(k) if g[i] == 0]
    H = [_unit(k, i) for i in range(k) if g[i] < 0]
    return _cc(k, G, H)


def _ec_case(a) -> str:
    a1, a2 = a
    if a1 == 0 and a2 == 0:
        return "00"
    if a1 == 0 and a2 < 0:
        return "0-"
    if a1 < 0 and a2 == 0:
        return "-0"
    raise NotInSet(f"point {_fmt(a)} is not in the complementarity set")


def _ec_tangent(a) -> tuple:
    case = _ec_case(a)
    if case == "0-":
        return (_cc(2, H=[(ONE, ZERO)]),)
    if case == "-0":
        return (_cc(2, H=[(ZERO, ONE)]),)
    return (_cc(2, [(ONE, ZERO)], [(ZERO, ONE)]), _cc(2, [(ZERO, ONE)], [(ONE, ZERO)]))


def _ec_regular(a) -> ConvexCone:
    case = _ec_case(a)
    if case == "0-":
        return _cc(2, H=[(ZERO, ONE)])
    if case == "-0":
        return _cc(2, H=[(ONE, ZERO)])
    return _cc(2, [(-ONE, ZERO), (ZERO, -ONE)])


def _ec_limiting(a) -> tuple:
    if _ec_case(a) != "00":
        return (_ec_regular(a),)
    return (
        _cc(2, [(-ONE, ZERO), (ZERO, -ONE)]),
        _cc(2, H=[(ONE, ZERO)]),
        _cc(2, H=[(ZERO, ONE)]),
    )


def _vc_case(a) -> str:
    a1, a2 = a
    if a1 < 0 or a1 * a2 > 0:
        raise NotInSet(f"point {_fmt(a)} is not in the vanishing-constraint set")
    if a1 > 0:
        return "+-" if a2 < 0 else "+0"
    if a2 > 0:
        return "0+"
    if a2 < 0:
        return "0-"
    return "00"


def _vc_tangent(a) -> tuple:
    case = _vc_case(a)
    if case == "+-":
        return (_cc(2),)
    if case == "+0":
        return (_cc(2, [(ZERO, ONE)]),)
    if case == "0+":
        return (_cc(2, H=[(ONE, ZERO)]),)
    if case == "0-":
        return (_cc(2, [(-ONE, ZERO)]),)
    return (_cc(2, [(-ONE, ZERO), (ZERO, ONE)]), _cc(2, [(ZERO, -ONE)], [(ONE, ZERO)]))


def _vc_regular(a) -> ConvexCone:
    case = _vc_case(a)
    if case == "+-":
        return _cc(2, H=[(ONE, ZERO), (ZERO, ONE)])
    if case == "+0":
        return _cc(2, [(ZERO, -ONE)], [(ONE, ZERO)])
    if case == "0+":
        return _cc(2, H=[(ZERO, ONE)])
    return _cc(2, [(ONE, ZERO)], [(ZERO, ONE)])


def _vc_limiting(a) -> tuple:
    if _vc_case(a) != "00":
        return (_vc_regular(a),)
    return (_cc(2, H=[(ZERO, ONE)]), _cc(2, [(ZERO, -ONE)], [(ONE, ZERO)]))


def block_tangent(b: Block, a) -> tuple:
    a = vec(a)
    if b.kind == "nonpos":
        return _nonpos_tangent(b.dim, a)
    if b.kind == "zero":
        if not is_zero(a):
            raise NotInSet(f"point {_fmt(a)} is not zero")
        return (_cc(b.dim, H=identity(b.dim)),)
    if b.kind == "free":
        return (_cc(b.dim),)
    if b.kind == "ec":
        return _ec_tangent(a)
    if b.kind == "vc":
        return _vc_tangent(a)
    return _generic_tangent(b.pieces(), a)


def block_regular_normal(b: Block, a) -> ConvexCone:
    a = vec(a)
    if b.kind == "nonpos":
        return _nonpos_regular(b.dim, a)
    if b.kind == "zero":
        block_tangent(b, a)
        return _cc(b.dim)
    if b.kind == "free":
        return _cc(b.dim, H=identity(b.dim))
    if b.kind == "ec":
        return _ec_regular(a)
    if b.kind == "vc":
        return _vc_regular(a)
    return _generic_regular(b.pieces(), a)


def block_dir_normal(b: Block, a, u) -> tuple:
    a, u = vec(a), vec(u)
    if b.kind == "union":
        return _generic_dir_normal(b.pieces(), a, u)
    tans = block_tangent(b, a)
    if not any(t.contains(u) for t in tans):
        return ()
    if b.kind == "nonpos":
        return (_ortho(_nonpos_regular(b.dim, a), u),)
    if b.kind in ("zero", "free"):
        return (block_regular_normal(b, a),)
    if b.kind == "ec":
        if _ec_case(a) == "00":
            return _ec_limiting(u)
        return (_ortho(_ec_regular(a), u),)
    if _vc_case(a) == "00":
        return _vc_limiting(u)
    return (_ortho(_vc_regular(a), u),)


def block_generic(b: Block) -> Block:
    """Same set, but routed through the generic union machinery."""
    return Block("union", b.dim, b.pieces())


# ---------------------------------------------------------------------------
# public cone operators


def tangent_cone(P: DisjunctiveSet, y, method: str = "blockwise") -> ConeUnion:
    y = vec(y)
    if method == "flat":
        return ConeUnion(P.dim, _generic_tangent(P.flat_pieces(), _check_in(P, y)))
    parts = [block_tangent(b, a) for b, a in zip(P.blocks, P.split(y))]
    return ConeUnion(P.dim, cone_product_union(parts))


def regular_normal_cone(P: DisjunctiveSet, y, method: str = "blockwise") -> ConvexCone:
    y = vec(y)
    if method == "flat":
        return _generic_regular(P.flat_pieces(), _check_in(P, y))
    parts = [(block_regular_normal(b, a),) for b, a in zip(P.blocks, P.split(y))]
    return cone_product_union(parts)[0]


def dir_limiting_normal_cone(P: DisjunctiveSet, y, d, method: str = "blockwise") -> ConeUnion:
    y, d = vec(y), vec(d)
    if len(d) != P.dim:
        raise ValueError("direction dimension mismatch")
    if method == "flat":
        return ConeUnion(P.dim, _generic_dir_normal(P.flat_pieces(), _check_in(P, y), d))
    parts = [block_dir_normal(b, a, u) for b, a, u in zip(P.blocks, P.split(y), P.split(d))]
    return ConeUnion(P.dim, cone_product_union(parts))


def limiting_normal_cone(P: DisjunctiveSet, y, method: str = "blockwise") -> ConeUnion:
    return dir_limiting_normal_cone(P, y, (ZERO,) * P.dim, method)


def product_cones(blocks, points, directions) -> ConeUnion:
    """Blockwise assembly of directional limiting normal cones."""
    parts = [block_dir_normal(b, a, u) for b, a, u in zip(blocks, points, directions)]
    return ConeUnion(sum(b.dim for b in blocks), cone_product_union(parts))


def _check_in(P, y) -> tuple:
    if not P.contains(y):
        raise NotInSet(f"point {_fmt(y)} is not in the set")
    return y


def coderivative_membership(J, P: DisjunctiveSet, qbar, u, v, lam) -> bool:
    """λ ∈ N(q̄; P; J u − v)."""
    d = vsub(mat_vec(J, vec(u)), vec(v))
    return dir_limiting_normal_cone(P, qbar, d).contains(lam)


# ---------------------------------------------------------------------------
# brute-force oracle (independent of the arrangement construction)


def project_polyhedron(P: Polyhedron, x) -> tuple:
    """Exact Euclidean projection by enumerating candidate active sets."""
    from itertools import combinations

    x = vec(x)
    if P.contains(x):
        return x
    rows = P.rows()
    best, best_d = None, None
    for k in range(1, min(len(rows), P.dim) + 1):
        for S in combinations(range(len(rows)), k):
            A = [rows[j][0] for j in S]
            rhs = [dot(rows[j][0], x) - rows[j][1] for j in S]
            gram = [[dot(a, b) for b in A] for a in A]
            w = solve_linear(gram, rhs, k)
            if w is None:
                continue
            z = tuple(xi - sum((wj * a[i] for wj, a in zip(w, A)), ZERO) for i, xi in enumerate(x))
            if P.contains(z):
                dist = sum(((a - b) ** 2 for a, b in zip(z, x)), ZERO)
                if best_d is None or dist < best_d:
                    best, best_d = z, dist
    if best is None:
        raise ArithmeticError("projection failed")
    return best


def project_block(b: Block, a) -> tuple:
    best, best_d = None, None
    for p in b.pieces():
        z = project_polyhedron(p, a)
        dist = sum(((s - t) ** 2 for s, t in zip(z, a)), ZERO)
        if best_d is None or dist < best_d:
            best, best_d = z, dist
    return best


def default_net(m: int, extra=()) -> list:
    """Integer offsets {-1,0,1}^m together with optional extra vectors."""
    net = [tuple(frac(c) for c in w) for w in product((-1, 0, 1), repeat=m)]
    for e in extra:
        for s in (1, -1):
            v = tuple(frac(s) * x for x in e)
            if v not in net:
                net.append(v)
    return net


def bruteforce_dir_normal_cone(P: DisjunctiveSet, y, d, net=None, ts=None) -> ConeUnion:
    """Union of regular normal cones at projected points y + t(d + (t/10) w).

    Only samples whose active pattern is local to y (pieces and active rows a
    subset of y's) are kept.
    """
    y, d = vec(y), vec(d)
    m = P.dim
    pieces = P.flat_pieces()
    base = dict(_pieces_pattern(pieces, y))
    if not base:
        raise NotInSet(f"point {_fmt(y)} is not in the set")
    if net is None:
        normals = [r for p in pieces for r, _ in p.rows()]
        net = default_net(m, normals)
    ts = ts or [frac(10) ** -k for k in range(1, 7)]
    seen = {}
    for t in ts:
        for w in net:
            x = tuple(yi + t * di + t * t * wi / 10 for yi, di, wi in zip(y, d, w))
            xp = []
            for b, a in zip(P.blocks, P.split(x)):
                xp.extend(project_block(b, a))
            xp = tuple(xp)
            # displacement must be O(t^2): otherwise d is not a tangent direction
            if max(abs(a - yi - t * di) for a, yi, di in zip(xp, y, d)) > t * t * (1 + max(abs(c) for c in w)):
                continue
            pat = tuple(_pieces_pattern(pieces, xp))
            if not all(i in base and set(act) <= set(base[i]) for i, act in pat):
                continue
            if pat not in seen:
                seen[pat] = _generic_regular(pieces, xp)
    return ConeUnion(m, dedup_cones(seen.values()))
