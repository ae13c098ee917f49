"""Stationarity tests and upper Lipschitz / upper Hölder certificates.

The certificate systems quantify over a direction u, a multiplier λ and a
tangent direction μ of the normal cone at λ (plus v for the Hölder case).
They are enumerated as *patterns*: a direction cell, a λ-face given by
equalities and strict inequalities, and the tangent cone of the normal-cone
piece at that face.  Within a pattern everything is linear except the
Hessian coupling Q(λ)u, which a small decision ladder resolves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .cones import Block, ConeUnion, DisjunctiveSet, dir_limiting_normal_cone, limiting_normal_cone, tangent_cone
from .cq import (
    CQReport,
    DirectionCell,
    check_foscms,
    check_metric_regularity,
    cq_report,
    direction_cells,
    in_lin_cone,
    lin_cone,
)
from .geometry import (
    ONE,
    ZERO,
    Certificate,
    Constraint,
    ConvexCone,
    LinearSystem,
    Polyhedron,
    QSign,
    Verdict,
    dot,
    extreme_rays,
    find_point,
    frac,
    is_zero,
    linear_span_basis,
    lp_feasible,
    mat_vec,
    max_quadratic_on_cone,
    nullspace,
    polyhedron_generators,
    quad,
    transpose,
    vadd,
    vec,
    vscale,
)
from .problem import ReferenceData


class LayoutError(ValueError):
    """The constraint set does not follow the layout a specialization needs."""


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class MultiplierSet:
    """Finite union of polyhedra in λ-space, each tagged with a label."""

    dim: int
    entries: tuple = ()

    @property
    def polyhedra(self) -> tuple:
        return tuple(p for _, p in self.entries)

    def is_empty(self) -> bool:
        return not self.entries

    def contains(self, lam) -> bool:
        return any(p.contains(vec(lam)) for p in self.polyhedra)

    def to_json(self):
        return [{"label": lab, "polyhedron": p.to_json()} for lab, p in self.entries]


@dataclass(frozen=True)
class GrowthAttestation:
    """Evidence that x̄ is an essential local minimizer of second order."""

    source: str  # "user" or "harness"
    eta: float | None = None
    radius: float | None = None
    grid: int | None = None

    @classmethod
    def user_asserted(cls):
        return cls("user")

    @classmethod
    def harness_verified(cls, eta, radius, grid):
        return cls("harness", float(eta), float(radius), int(grid))

    def to_json(self):
        return {"source": self.source, "eta": self.eta, "radius": self.radius, "grid": self.grid}


@dataclass(frozen=True)
class StabilityReport:
    b_stationary: Verdict
    m_stationary: Verdict
    rsssoc: Verdict
    lipschitz_cert: Verdict
    hoelder_cert: Verdict
    existence_flag: bool
    existence_reason: str
    growth: GrowthAttestation | None = None
    cq: CQReport | None = field(default=None, compare=False)

    def to_json(self):
        return {
            "b_stationary": self.b_stationary.to_json(),
            "m_stationary": self.m_stationary.to_json(),
            "rsssoc": self.rsssoc.to_json(),
            "lipschitz": self.lipschitz_cert.to_json(),
            "hoelder": self.hoelder_cert.to_json(),
            "existence": {"flag": self.existence_flag, "reason": self.existence_reason},
            "growth": None if self.growth is None else self.growth.to_json(),
        }


# ---------------------------------------------------------------------------
# small helpers


def _jt(ref) -> tuple:
    return transpose(ref.J, ref.n)


def _gradient_eq(ref, F) -> list:
    """F + J^T λ = 0 as constraints over λ."""
    return [Constraint(row, "==", -F[j]) for j, row in enumerate(_jt(ref))]


def _first_order_data(ref, use_F: bool):
    return (ref.Fbar, ref.JFbar) if use_F else (ref.grad_f, ref.Hf)


def _unit(n, k, s=ONE) -> tuple:
    return tuple(s if i == k else ZERO for i in range(n))


def _single_piece_tangent(poly: Polyhedron, y) -> ConvexCone:
    rows = [r for r, v in poly.rows() if dot(r, y) == v]
    return ConvexCone(poly.dim, tuple(rows)).canonical()


def _cone_tangent(cone: ConvexCone, lam) -> ConvexCone:
    """T(λ; C) for a polyhedral cone C containing λ."""
    return ConvexCone(cone.dim, tuple(g for g in cone.G if dot(g, lam) == 0), cone.H)


def hoelder_cones(ref: ReferenceData, u) -> tuple:
    """Tangent cones T(q̄; P_i) over the pieces i with J u ∈ T(q̄; P_i)."""
    Ju = mat_vec(ref.J, vec(u))
    out = []
    for poly in ref.P.flat_pieces():
        if not poly.contains(ref.q):
            continue
        T = _single_piece_tangent(poly, ref.q)
        if T.contains(Ju) and T not in out:
            out.append(T)
    return tuple(out)


# ---------------------------------------------------------------------------
# stationarity


def check_m_stationary(ref: ReferenceData) -> Verdict:
    N = limiting_normal_cone(ref.P, ref.q)
    duals = []
    for k, piece in enumerate(N.pieces):
        v = lp_feasible(piece.constraints() + _gradient_eq(ref, ref.grad_f), ref.m)
        if v.is_holds:
            return Verdict.holds(Certificate("witness", v.payload.payload), route="limiting normal cone", details=(("piece", k),))
        duals.append(v.payload.payload)
    return Verdict.fails(Certificate("infeasibility_dual", tuple(duals)), reason="no multiplier in any limiting-cone piece", route="limiting normal cone")


def check_b_stationary_linearized(ref: ReferenceData) -> Verdict:
    """No u ∈ T^lin with ∇f·u < 0.  Equals B-stationarity under subregularity."""
    subregular = check_foscms(ref).is_holds
    caveat = () if subregular else (("caveat", "no subregularity certificate; linearized test only"),)
    for piece in lin_cone(ref).pieces:
        u = find_point(piece.constraints() + [Constraint(ref.grad_f, "<", ZERO)], ref.n)
        if u is not None:
            return Verdict.fails(Certificate("witness", u), reason="linearized descent direction", route="linearized", details=caveat)
    return Verdict.holds(route="linearized", details=caveat)


# ---------------------------------------------------------------------------
# critical directions, Λ¹ and RSSOSC


def critical_cells(ref: ReferenceData) -> tuple:
    """Cells of 𝒞 = {u ∈ T^lin | ∇f·u ≤ 0} minus the origin."""
    cells = direction_cells(ref, (ref.grad_f,)) if not is_zero(ref.grad_f) else direction_cells(ref)
    return tuple(c for c in cells if dot(ref.grad_f, c.point) <= 0)


def lambda1_set(ref: ReferenceData, cell) -> MultiplierSet:
    u = cell.point if isinstance(cell, DirectionCell) else vec(cell)
    if is_zero(u) or not in_lin_cone(ref, u) or dot(ref.grad_f, u) > 0:
        raise ValueError("direction is not a nonzero critical direction")
    N = dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, u))
    entries = []
    for k, piece in enumerate(N.pieces):
        E = tuple(piece.H) + _jt(ref)
        e = (ZERO,) * len(piece.H) + tuple(-x for x in ref.grad_f)
        poly = Polyhedron(ref.m, piece.G, (ZERO,) * len(piece.G), E, e)
        if not poly.is_empty():
            entries.append((f"piece {k}", poly))
    return MultiplierSet(ref.m, tuple(entries))


def _quadratic_zero_on_span(Q, C: ConvexCone) -> bool:
    B = linear_span_basis(C)
    return all(sum((a[i] * Q[i][j] * b[j] for i in range(len(a)) for j in range(len(b))), ZERO) == 0 for a in B for b in B)


def _hess_lagrangian(ref, lam) -> tuple:
    Q = ref.Q(lam)
    return tuple(tuple(ref.Hf[i][j] + Q[i][j] for j in range(ref.n)) for i in range(ref.n))


def verify_rsssoc_witness(ref: ReferenceData, u, lam) -> bool:
    u, lam = vec(u), vec(lam)
    if is_zero(u) or not in_lin_cone(ref, u) or dot(ref.grad_f, u) > 0:
        return False
    if not lambda1_set(ref, u).contains(lam):
        return False
    return quad(_hess_lagrangian(ref, lam), u) <= 0


def check_rsssoc(ref: ReferenceData, tol: float = 1e-9) -> Verdict:
    cells = critical_cells(ref)
    if not cells:
        return Verdict.holds(reason="critical cone is {0}", route="vacuous")
    pending = None
    for cell in cells:
        closure = cell.closure()
        for lab, poly in lambda1_set(ref, cell).entries:
            verts, rays, lin = polyhedron_generators(poly)
            base = verts[0]
            witness = None
            for v in verts:
                res = max_quadratic_on_cone(tuple(tuple(-x for x in r) for r in _hess_lagrangian(ref, v)), closure, tol)
                if res.sign in (QSign.POSITIVE, QSign.ZERO) and res.exact:
                    witness = (res.maximizer, v)
                    break
                if res.sign is QSign.INCONCLUSIVE or (res.sign in (QSign.POSITIVE, QSign.ZERO) and not res.exact):
                    pending = pending or f"cell {cell.label()}: vertex value undecided"
            for r in [] if witness else list(rays) + list(lin) + [tuple(-x for x in l) for l in lin]:
                Qr = ref.Q(r)
                res = max_quadratic_on_cone(tuple(tuple(-x for x in row) for row in Qr), closure, tol)
                if res.sign is QSign.POSITIVE and res.exact:
                    u = res.maximizer
                    slope = quad(Qr, u)  # < 0
                    t = max(ZERO, quad(_hess_lagrangian(ref, base), u)) / (-slope) + 1
                    witness = (u, vadd(base, vscale(t, r)))
                    break
                if res.sign is QSign.ZERO and _quadratic_zero_on_span(Qr, closure):
                    continue
                if res.sign is not QSign.NEGATIVE:
                    pending = pending or f"cell {cell.label()}: ray contribution undecided"
            if witness is not None:
                u, lam = witness
                if verify_rsssoc_witness(ref, u, lam):
                    return Verdict.fails(
                        Certificate("witness", (u, lam)),
                        reason=f"u^T ∇²L u = {quad(_hess_lagrangian(ref, lam), u)} <= 0 on cell {cell.label()}",
                        route="generators",
                    )
                pending = pending or f"cell {cell.label()}: witness failed exact check"
    if pending:
        return Verdict.inconclusive(pending, route="generators")
    return Verdict.holds(Certificate("cells", tuple(c.label() for c in cells)), route="generators")


# ---------------------------------------------------------------------------
# pattern engine for the triple / quadruple systems


@dataclass(frozen=True)
class Pattern:
    cell: DirectionCell
    lam: tuple  # constraints over λ, senses "==" or "<"
    mu: tuple  # homogeneous constraints over μ
    vcones: tuple = ()
    label: str = ""


@dataclass(frozen=True)
class LadderConfig:
    samples: int = 16
    seed: int = 0


def _lam_point(ref, pat, F):
    return find_point(list(pat.lam) + _gradient_eq(ref, F), ref.m)


def _assemble(ref, pat, F, JF, *, u=None, Q0=None, vcone=None, norm=None) -> LinearSystem:
    n, m = ref.n, ref.m
    S = LinearSystem()
    if u is None:
        S.block("u", n)
    S.block("lam", m)
    S.block("mu", m)
    if vcone is not None:
        S.block("v", n)
    if u is None:
        for c in pat.cell.signature.constraints(pat.cell.hyperplanes):
            S.add({"u": c.coeffs}, c.sense, c.rhs)
        if norm is not None:
            k, s = norm
            S.add({"u": _unit(n, k)}, "==", s)
    for c in pat.lam:
        S.add({"lam": c.coeffs}, c.sense, c.rhs)
    for c in pat.mu:
        S.add({"mu": c.coeffs}, c.sense, c.rhs)
    JT = _jt(ref)
    for j in range(n):
        S.add({"lam": JT[j]}, "==", -F[j])
    for i in range(n):
        terms = {"mu": JT[i]}
        if u is None:
            row = JF[i] if Q0 is None else tuple(a + b for a, b in zip(JF[i], Q0[i]))
            terms["u"] = row
            S.add(terms, "==", 0)
        else:
            terms["lam"] = tuple(dot(Hk[i], u) for Hk in ref.Hq)
            S.add(terms, "==", -dot(JF[i], u))
    if vcone is not None:
        w = (ZERO,) * m if u is None else tuple(quad(Hk, u) for Hk in ref.Hq)
        for g in vcone.G:
            S.add({"v": mat_vec(JT, g)}, "<=", -dot(g, w))
        for h in vcone.H:
            S.add({"v": mat_vec(JT, h)}, "==", -dot(h, w))
        S.add({"v": F, "lam": tuple(-x for x in w)}, "==", 0)
    return S


def _solve(S: LinearSystem, u=None):
    x = find_point(S.cons, S.nvars)
    if x is None:
        return None
    sol = {
        "u": tuple(u) if u is not None else S.extract(x, "u"),
        "lam": S.extract(x, "lam"),
        "mu": S.extract(x, "mu"),
    }
    if "v" in S.blocks:
        sol["v"] = S.extract(x, "v")
    return sol


def _normalizations(cell: DirectionCell, n: int):
    if not cell.signature.is_zero_signature():
        return [None]
    return [(k, s) for k in range(n) for s in (ONE, -ONE)]


def _fixed_directions(cell: DirectionCell):
    if cell.signature.is_zero_signature():
        return [cell.point, tuple(-x for x in cell.point)]
    return [cell.point]


def _sample_directions(cell: DirectionCell, cfg: LadderConfig):
    rays, lin = cell.generators()
    gens = list(rays) + list(lin) + [tuple(-x for x in l) for l in lin]
    out = list(_fixed_directions(cell)) + gens
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.samples):
        if not gens:
            break
        wts = rng.random(len(gens))
        u = [ZERO] * len(cell.point)
        for wt, g in zip(wts, gens):
            u = vadd(u, vscale(Fraction(float(wt)).limit_denominator(64), g))
        if not is_zero(u):
            out.append(tuple(u))
    seen, uniq = set(), []
    for u in out:
        if u not in seen and not is_zero(u):
            seen.add(u)
            uniq.append(u)
    return uniq


def _q_constant_on_face(ref, pat):
    """Q(λ0) if Q is constant on the affine hull of the λ-face, else None."""
    eq_rows = [c.coeffs for c in pat.lam if c.sense == "=="] + list(_jt(ref))
    for d in nullspace(eq_rows, ref.m):
        if any(x != 0 for row in ref.Q(d) for x in row):
            return None
    return True


def _decide_pattern(ref, pat, F, JF, hoelder, cfg):
    """('infeasible', route) | ('feasible', solution) | ('unknown', reason)."""
    lam0 = _lam_point(ref, pat, F)
    if lam0 is None:
        return "infeasible", "multiplier face infeasible"
    vcones = pat.vcones if hoelder else (None,)
    if hoelder and not vcones:
        return "infeasible", "no tangent piece for the second-order direction"
    if ref.hessians_vanish():
        for vc in vcones:
            for norm in _normalizations(pat.cell, ref.n):
                sol = _solve(_assemble(ref, pat, F, JF, vcone=vc, norm=norm))
                if sol is not None:
                    return "feasible", sol
        return "infeasible", "joint linear system"
    if pat.cell.dim == 1:
        for u in _fixed_directions(pat.cell):
            for vc in vcones:
                sol = _solve(_assemble(ref, pat, F, JF, u=u, vcone=vc), u)
                if sol is not None:
                    return "feasible", sol
        return "infeasible", "one-dimensional cell, direction fixed"
    if not hoelder and _q_constant_on_face(ref, pat):
        Q0 = ref.Q(lam0)
        for norm in _normalizations(pat.cell, ref.n):
            sol = _solve(_assemble(ref, pat, F, JF, Q0=Q0, norm=norm))
            if sol is not None:
                return "feasible", sol
        return "infeasible", "Hessian coupling constant on the face"
    for u in _sample_directions(pat.cell, cfg):
        for vc in vcones:
            sol = _solve(_assemble(ref, pat, F, JF, u=u, vcone=vc), u)
            if sol is not None:
                return "feasible", sol
    return "unknown", f"pattern {pat.label}: bilinear system not decided by sampling"


def _run_patterns(ref, patterns, F, JF, hoelder, cfg, verify, route):
    routes = []
    pending = None
    for pat in patterns:
        status, info = _decide_pattern(ref, pat, F, JF, hoelder, cfg)
        if status == "feasible":
            w = (info["u"], info["lam"], info["mu"]) + ((info["v"],) if hoelder else ())
            if verify(*w):
                return Verdict.fails(Certificate("witness", w), reason=f"system solvable on pattern {pat.label}", route=route)
            pending = pending or f"pattern {pat.label}: candidate failed exact verification"
        elif status == "unknown":
            pending = pending or info
        else:
            routes.append((pat.label, info))
    if pending:
        return Verdict.inconclusive(pending, route=route)
    return Verdict.holds(Certificate("patterns", tuple(routes)), route=route)


# ---------------------------------------------------------------------------
# general patterns


@lru_cache(maxsize=4096)
def _lambda_faces(piece: ConvexCone, JT: tuple, F: tuple) -> tuple:
    """Index sets A with {G_A λ = 0, G_rest λ < 0, Hλ = 0, F + J^T λ = 0} nonempty."""
    m = piece.dim
    base = [Constraint(h, "==", ZERO) for h in piece.H] + [Constraint(row, "==", -F[j]) for j, row in enumerate(JT)]
    if find_point(base, m) is None:
        return ()
    partial = [((), base)]
    for i, g in enumerate(piece.G):
        nxt = []
        for act, cons in partial:
            for sense in ("==", "<"):
                c = cons + [Constraint(g, sense, ZERO)]
                if find_point(c, m) is not None:
                    nxt.append((act + ((i,) if sense == "==" else ()), c))
        partial = nxt
    return tuple(a for a, _ in partial)


def general_patterns(ref: ReferenceData, F, hoelder=False):
    JT = _jt(ref)
    for cell in direction_cells(ref):
        N = dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, cell.point))
        vcones = hoelder_cones(ref, cell.point) if hoelder else ()
        for k, piece in enumerate(N.pieces):
            for act in _lambda_faces(piece, JT, tuple(F)):
                lam = [Constraint(g, "==" if i in act else "<", ZERO) for i, g in enumerate(piece.G)]
                lam += [Constraint(h, "==", ZERO) for h in piece.H]
                mu = [Constraint(piece.G[i], "<=", ZERO) for i in act] + [Constraint(h, "==", ZERO) for h in piece.H]
                yield Pattern(cell, tuple(lam), tuple(mu), vcones, f"{cell.label()}/N{k}/A{list(act)}")


def verify_triple(ref: ReferenceData, u, lam, mu, v=None, use_F: bool = True) -> bool:
    """Exact re-substitution into the Lipschitz (or, with v, Hölder) system."""
    F, JF = _first_order_data(ref, use_F)
    u, lam, mu = vec(u), vec(lam), vec(mu)
    if is_zero(u) or not in_lin_cone(ref, u):
        return False
    N = dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, u))
    if not N.contains(lam):
        return False
    if not any(_cone_tangent(p, lam).contains(mu) for p in N.pieces if p.contains(lam)):
        return False
    JT = _jt(ref)
    if any(F[j] + dot(JT[j], lam) != 0 for j in range(ref.n)):
        return False
    Qu = mat_vec(ref.Q(lam), u)
    if any(dot(JF[i], u) + Qu[i] + dot(JT[i], mu) != 0 for i in range(ref.n)):
        return False
    if v is None:
        return True
    v = vec(v)
    w = tuple(quad(Hk, u) for Hk in ref.Hq)
    z = vadd(mat_vec(ref.J, v), w)
    if not any(T.contains(z) for T in hoelder_cones(ref, u)):
        return False
    return quad(ref.Q(lam), u) == dot(F, v)


def check_lipschitz_certificate(ref: ReferenceData, use_F: bool = True, cfg: LadderConfig = LadderConfig()) -> Verdict:
    F, JF = _first_order_data(ref, use_F)
    if not direction_cells(ref):
        return Verdict.holds(reason="linearized cone is {0}", route="vacuous")
    return _run_patterns(
        ref, general_patterns(ref, F), F, JF, False, cfg, lambda u, l, m: verify_triple(ref, u, l, m, use_F=use_F), "triple"
    )


def check_hoelder_certificate(ref: ReferenceData, use_F: bool = True, cfg: LadderConfig = LadderConfig()) -> Verdict:
    F, JF = _first_order_data(ref, use_F)
    if not direction_cells(ref):
        return Verdict.holds(reason="linearized cone is {0}", route="vacuous")
    return _run_patterns(
        ref,
        general_patterns(ref, F, hoelder=True),
        F,
        JF,
        True,
        cfg,
        lambda u, l, m, v: verify_triple(ref, u, l, m, v, use_F=use_F),
        "quadruple",
    )


# ---------------------------------------------------------------------------
# local-minimizer route


def check_stab_via_thm2(
    ref: ReferenceData,
    growth: GrowthAttestation | None = None,
    cq: CQReport | None = None,
    cfg: LadderConfig = LadderConfig(),
    tol: float = 1e-9,
) -> StabilityReport:
    cq = cq or cq_report(ref, tol)
    b = check_b_stationary_linearized(ref)
    ms = check_m_stationary(ref)
    rs = check_rsssoc(ref, tol)

    if cq.foscms.is_holds and rs.is_holds:
        lip = Verdict.holds(route="local-minimizer", reason="first-order condition and RSSOSC")
    else:
        trip = check_lipschitz_certificate(ref, use_F=False, cfg=cfg)
        if trip.is_holds and cq.r1.is_holds:
            lip = Verdict.holds(trip.payload, route="triple", reason="no solution of the triple system")
        elif trip.is_fails:
            lip = trip
        else:
            missing = "R1 not attested" if trip.is_holds else trip.reason
            lip = Verdict.inconclusive(missing, route="triple")

    if cq.soscms.is_holds and growth is not None:
        hol = Verdict.holds(route="local-minimizer", reason=f"second-order condition and growth ({growth.source})")
    else:
        quadv = check_hoelder_certificate(ref, use_F=False, cfg=cfg)
        if quadv.is_holds and cq.r2.is_holds:
            hol = Verdict.holds(quadv.payload, route="quadruple", reason="no solution of the quadruple system")
        elif quadv.is_fails:
            hol = quadv
        else:
            why = "no growth attestation" if growth is None else (quadv.reason or "R2 not attested")
            hol = Verdict.inconclusive(why, route="quadruple")

    cells = direction_cells(ref)
    if cells:
        flag, reason = True, f"nonzero linearized direction {tuple(str(x) for x in cells[0].point)}"
    elif cq.metric_regularity.is_holds:
        flag, reason = True, "metric regularity"
    else:
        flag, reason = False, "linearized cone is {0} and metric regularity fails"
    return StabilityReport(b, ms, rs, lip, hol, flag, reason, growth, cq)


# ---------------------------------------------------------------------------
# MPEC specialization


@dataclass(frozen=True)
class MPECLayout:
    """Per q-component role: ('g', i), ('h', i), ('G', i) or ('H', i), 1-based."""

    roles: tuple
    ec_pairs: tuple  # (a, b) q-indices per complementarity pair

    @property
    def m_I(self):
        return sum(1 for r, _ in self.roles if r == "g")


def mpec_layout(ref: ReferenceData) -> MPECLayout:
    roles, pairs = [], []
    ng = nh = nc = 0
    off = 0
    for b in ref.P.blocks:
        if b.kind == "nonpos":
            for _ in range(b.dim):
                ng += 1
                roles.append(("g", ng))
        elif b.kind == "zero":
            for _ in range(b.dim):
                nh += 1
                roles.append(("h", nh))
        elif b.kind == "ec":
            nc += 1
            roles += [("G", nc), ("H", nc)]
            pairs.append((off, off + 1))
        else:
            raise LayoutError(f"block {b.label()} does not fit the complementarity layout")
        off += b.dim
    return MPECLayout(tuple(roles), tuple(pairs))


def mpec_index_sets(ref: ReferenceData, u=None) -> dict:
    """Index sets at q̄ (1-based); with u also the directional refinements."""
    lay = mpec_layout(ref)
    q = ref.q
    out = {"I_g": set(), "I_0+": set(), "I_+0": set(), "I_00": set()}
    for k, (role, i) in enumerate(lay.roles):
        if role == "g" and q[k] == 0:
            out["I_g"].add(i)
    for i, (a, b) in enumerate(lay.ec_pairs, 1):
        G, H = -q[a], -q[b]
        if G == 0 and H > 0:
            out["I_0+"].add(i)
        elif G > 0 and H == 0:
            out["I_+0"].add(i)
        elif G == 0 and H == 0:
            out["I_00"].add(i)
    if u is not None:
        Ju = mat_vec(ref.J, vec(u))
        out["I_g(u)"] = {i for k, (role, i) in enumerate(lay.roles) if role == "g" and i in out["I_g"] and Ju[k] == 0}
        out["I_0+(u)"], out["I_+0(u)"], out["I_00(u)"] = set(), set(), set()
        for i, (a, b) in enumerate(lay.ec_pairs, 1):
            if i not in out["I_00"]:
                continue
            dG, dH = -Ju[a], -Ju[b]
            if dG == 0 and dH > 0:
                out["I_0+(u)"].add(i)
            elif dG > 0 and dH == 0:
                out["I_+0(u)"].add(i)
            elif dG == 0 and dH == 0:
                out["I_00(u)"].add(i)
    return {k: frozenset(v) for k, v in out.items()}


# per complementarity pair at I^00(u): λ sign case -> μ options
_EC_FACE_TABLE = {
    (0, 0): [("ge", "ge"), ("eq", "free"), ("free", "eq")],
    (0, 1): [("ge", "free")],
    (0, -1): [("eq", "free")],
    (1, 0): [("free", "ge")],
    (-1, 0): [("free", "eq")],
    (1, 1): [("free", "free")],
}


def _sign_cons(m, k, s) -> Constraint:
    """Sign condition on component k: s ∈ {-1, 0, 1} strict, or 'ge'/'eq'."""
    e = _unit(m, k)
    if s == 0 or s == "eq":
        return Constraint(e, "==", ZERO)
    if s == 1:
        return Constraint(tuple(-x for x in e), "<", ZERO)
    if s == -1:
        return Constraint(e, "<", ZERO)
    return Constraint(tuple(-x for x in e), "<=", ZERO)  # "ge"


def _mpec_component_options(ref, lay, idx):
    """Per-component-group list of (λ constraints, μ constraints) options."""
    m = ref.m
    groups = []
    role_of = dict(enumerate(lay.roles))
    for k, (role, i) in role_of.items():
        if role == "g":
            if i in idx["I_g(u)"]:
                groups.append([([_sign_cons(m, k, 0)], [_sign_cons(m, k, "ge")]), ([_sign_cons(m, k, 1)], [])])
            else:
                groups.append([([_sign_cons(m, k, 0)], [_sign_cons(m, k, 0)])])
    for i, (a, b) in enumerate(lay.ec_pairs, 1):
        if i in idx["I_0+"] or i in idx["I_0+(u)"]:
            groups.append([([_sign_cons(m, b, 0)], [_sign_cons(m, b, 0)])])
        elif i in idx["I_+0"] or i in idx["I_+0(u)"]:
            groups.append([([_sign_cons(m, a, 0)], [_sign_cons(m, a, 0)])])
        elif i in idx["I_00(u)"]:
            opts = []
            for (sa, sb), mus in _EC_FACE_TABLE.items():
                lam = [_sign_cons(m, a, sa), _sign_cons(m, b, sb)]
                for ma, mb in mus:
                    mu = [_sign_cons(m, a, ma)] if ma != "free" else []
                    mu += [_sign_cons(m, b, mb)] if mb != "free" else []
                    opts.append((lam, mu))
            groups.append(opts)
    return groups


def _mpec_vcones(ref, lay, idx) -> tuple:
    m = ref.m
    base_G, base_H = [], []
    for k, (role, i) in enumerate(lay.roles):
        if role == "g" and i in idx["I_g"]:
            base_G.append(_unit(m, k))
        elif role == "h":
            base_H.append(_unit(m, k))
    branches = [([], [])]
    for i, (a, b) in enumerate(lay.ec_pairs, 1):
        if i in idx["I_0+"] or i in idx["I_0+(u)"]:
            branches = [(G, H + [_unit(m, a)]) for G, H in branches]
        elif i in idx["I_+0"] or i in idx["I_+0(u)"]:
            branches = [(G, H + [_unit(m, b)]) for G, H in branches]
        elif i in idx["I_00(u)"]:
            branches = [
                nb for G, H in branches for nb in ((G + [_unit(m, a)], H + [_unit(m, b)]), (G + [_unit(m, b)], H + [_unit(m, a)]))
            ]
    return tuple(ConvexCone(m, tuple(base_G + G), tuple(base_H + H)).canonical() for G, H in branches)


def mpec_patterns(ref: ReferenceData, hoelder=False):
    lay = mpec_layout(ref)
    for cell in direction_cells(ref):
        idx = mpec_index_sets(ref, cell.point)
        vcones = _mpec_vcones(ref, lay, idx) if hoelder else ()
        groups = _mpec_component_options(ref, lay, idx)
        for n_opt, combo in enumerate(itertools.product(*groups)):
            lam = tuple(c for l, _ in combo for c in l)
            mu = tuple(c for _, mm in combo for c in mm)
            yield Pattern(cell, lam, mu, vcones, f"{cell.label()}/table{n_opt}")


def check_mpec_certificates(ref: ReferenceData, cfg: LadderConfig = LadderConfig()) -> dict:
    F, JF = ref.grad_f, ref.Hf
    mpec_layout(ref)
    if not direction_cells(ref):
        v = Verdict.holds(reason="linearized cone is {0}", route="vacuous")
        return {"lipschitz": v, "hoelder": v}
    lip = _run_patterns(
        ref, mpec_patterns(ref), F, JF, False, cfg, lambda u, l, m: verify_triple(ref, u, l, m, use_F=False), "mpec"
    )
    hol = _run_patterns(
        ref, mpec_patterns(ref, True), F, JF, True, cfg, lambda u, l, m, v: verify_triple(ref, u, l, m, v, use_F=False), "mpec"
    )
    return {"lipschitz": lip, "hoelder": hol}


def mpec_multiplier_set(ref: ReferenceData) -> MultiplierSet:
    """M-multipliers: gradient of the Lagrangian vanishes, sign cases per biactive pair."""
    lay = mpec_layout(ref)
    idx = mpec_index_sets(ref)
    m = ref.m
    G, H = [], []
    for k, (role, i) in enumerate(lay.roles):
        if role == "g" and i in idx["I_g"]:
            G.append(tuple(-x for x in _unit(m, k)))
        elif role == "g":
            H.append(_unit(m, k))
    for i, (a, b) in enumerate(lay.ec_pairs, 1):
        if i in idx["I_0+"]:
            H.append(_unit(m, b))
        elif i in idx["I_+0"]:
            H.append(_unit(m, a))
        elif i not in idx["I_00"]:
            raise LayoutError(f"pair {i} is infeasible at the reference point")
    biactive = [lay.ec_pairs[i - 1] for i in sorted(idx["I_00"])]
    cases = {0: "both nonnegative", 1: "G-multiplier zero", 2: "H-multiplier zero"}
    entries = []
    JT = _jt(ref)
    for combo in itertools.product(range(3), repeat=len(biactive)):
        GG, HH = list(G), list(H)
        for c, (a, b) in zip(combo, biactive):
            if c == 0:
                GG += [tuple(-x for x in _unit(m, a)), tuple(-x for x in _unit(m, b))]
            elif c == 1:
                HH.append(_unit(m, a))
            else:
                HH.append(_unit(m, b))
        E = tuple(HH) + JT
        e = (ZERO,) * len(HH) + tuple(-x for x in ref.grad_f)
        poly = Polyhedron(m, tuple(GG), (ZERO,) * len(GG), E, e)
        if not poly.is_empty():
            entries.append((", ".join(cases[c] for c in combo) or "no biactive pair", poly))
    return MultiplierSet(m, tuple(entries))


# ---------------------------------------------------------------------------
# NLP specialization


def _nlp_layout(ref):
    for b in ref.P.blocks:
        if b.kind not in ("nonpos", "zero"):
            raise LayoutError(f"block {b.label()} is not an inequality or equality block")
    return [b.kind == "nonpos" for b in ref.P.blocks for _ in range(b.dim)]


def kkt_multiplier_set(ref: ReferenceData) -> MultiplierSet:
    ineq = _nlp_layout(ref)
    m = ref.m
    G = [tuple(-x for x in _unit(m, k)) for k in range(m) if ineq[k] and ref.q[k] == 0]
    H = [_unit(m, k) for k in range(m) if ineq[k] and ref.q[k] != 0]
    E = tuple(H) + _jt(ref)
    e = (ZERO,) * len(H) + tuple(-x for x in ref.grad_f)
    poly = Polyhedron(m, tuple(G), (ZERO,) * len(G), E, e)
    return MultiplierSet(m, () if poly.is_empty() else (("KKT", poly),))


def nlp_patterns(ref: ReferenceData):
    ineq = _nlp_layout(ref)
    m = ref.m
    active = [k for k in range(m) if ineq[k] and ref.q[k] == 0]
    for cell in direction_cells(ref):
        Ju = mat_vec(ref.J, cell.point)
        for support in itertools.product((0, 1), repeat=len(active)):
            pos = {k for k, s in zip(active, support) if s}
            if any(Ju[k] != 0 for k in pos):
                continue
            lam = [_sign_cons(m, k, 1 if k in pos else 0) for k in active]
            lam += [_sign_cons(m, k, 0) for k in range(m) if ineq[k] and k not in active]
            mu = []
            for k in range(m):
                if not ineq[k]:
                    continue
                if k in active and k not in pos and Ju[k] == 0:
                    mu.append(_sign_cons(m, k, "ge"))
                elif k not in pos:
                    mu.append(_sign_cons(m, k, 0))
            yield Pattern(cell, tuple(lam), tuple(mu), (), f"{cell.label()}/S{sorted(pos)}")


def verify_cstab(ref: ReferenceData, u, lam, alpha) -> bool:
    """Exact check of a solution of the Klatte–Kummer system for a KKT multiplier."""
    ineq = _nlp_layout(ref)
    u, lam, alpha = vec(u), vec(lam), vec(alpha)
    if is_zero(u) or not in_lin_cone(ref, u) or not kkt_multiplier_set(ref).contains(lam):
        return False
    Ju = mat_vec(ref.J, u)
    for k in range(ref.m):
        if not ineq[k]:
            continue
        act = ref.q[k] == 0
        if act and lam[k] > 0 and Ju[k] != 0:
            return False
        if act and lam[k] == 0 and (alpha[k] < 0 or alpha[k] * Ju[k] != 0):
            return False
        if not act and alpha[k] != 0:
            return False
    r = vadd(mat_vec(_hess_lagrangian(ref, lam), u), mat_vec(_jt(ref), alpha))
    return is_zero(r)


def check_nlp_klatte_kummer(ref: ReferenceData, cfg: LadderConfig = LadderConfig()) -> Verdict:
    _nlp_layout(ref)
    if not check_metric_regularity(ref).is_holds:
        return Verdict.inconclusive("not applicable: MFCQ (metric regularity) fails", route="klatte-kummer")
    if kkt_multiplier_set(ref).is_empty():
        return Verdict.inconclusive("not applicable: reference point is not KKT-stationary", route="klatte-kummer")
    if not direction_cells(ref):
        return Verdict.holds(reason="linearized cone is {0}", route="klatte-kummer")
    return _run_patterns(
        ref, nlp_patterns(ref), ref.grad_f, ref.Hf, False, cfg, lambda u, l, a: verify_cstab(ref, u, l, a), "klatte-kummer"
    )
