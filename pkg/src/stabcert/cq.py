"""Constraint qualifications at the reference point.

The quantifier "for every nonzero linearized direction u" is discharged by
enumerating the cells of the arrangement formed by the active rows composed
with the constraint Jacobian; the directional normal cone is constant on
each such cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .cones import ConeUnion, dir_limiting_normal_cone, limiting_normal_cone, tangent_cone
from .geometry import (
    ZERO,
    Certificate,
    CellSignature,
    ConvexCone,
    QSign,
    Verdict,
    arrangement_cells,
    canonical_line,
    cone_nontrivial,
    dot,
    extreme_rays,
    is_zero,
    linear_span_basis,
    mat_vec,
    max_quadratic_on_cone,
    nullspace,
    quad,
    transpose,
    vec,
    whole_space,
)
from .problem import ReferenceData

DEFAULT_TOL = 1e-9


# ---------------------------------------------------------------------------
# linearized cone and direction cells


def lin_cone(ref: ReferenceData) -> ConeUnion:
    """T^lin = {u | J u ∈ T(q̄; P)}, one piece per tangent piece."""
    T = tangent_cone(ref.P, ref.q)
    pieces = []
    for c in T.pieces:
        G = tuple(_compose(r, ref.J) for r in c.G)
        H = tuple(_compose(r, ref.J) for r in c.H)
        pieces.append(ConvexCone(ref.n, G, H).canonical())
    return ConeUnion(ref.n, tuple(dict.fromkeys(pieces)))


def _compose(row, J) -> tuple:
    """row^T J as a vector over x."""
    n = len(J[0]) if J else 0
    return tuple(sum((row[i] * J[i][j] for i in range(len(row)) if row[i]), ZERO) for j in range(n))


@dataclass(frozen=True)
class DirectionCell:
    """A relatively open cell of nonzero linearized directions."""

    signature: CellSignature
    hyperplanes: tuple
    point: tuple
    dim: int

    def closure(self) -> ConvexCone:
        return self.signature.closure(self.hyperplanes, whole_space(len(self.point)))

    def generators(self):
        return extreme_rays(self.closure())

    def label(self) -> str:
        return "".join("-0+"[s + 1] for s in self.signature.signs) or "·"

    def to_json(self):
        return {"signs": self.label(), "point": [str(x) for x in self.point], "dim": self.dim}


def direction_hyperplanes(ref: ReferenceData) -> tuple:
    """Active rows at q̄ composed with J, up to scaling."""
    hyper = []
    for piece in ref.P.flat_pieces():
        if not piece.contains(ref.q):
            continue
        for r, v in piece.rows():
            if dot(r, ref.q) == v:
                h = _compose(r, ref.J)
                if not is_zero(h):
                    h = canonical_line(h)
                    if h not in hyper:
                        hyper.append(h)
    return tuple(hyper)


@lru_cache(maxsize=256)
def direction_cells(ref: ReferenceData, extra: tuple = ()) -> tuple:
    """Nonzero cells of T^lin, optionally refined by extra hyperplanes."""
    L = lin_cone(ref)
    hyper = list(direction_hyperplanes(ref))
    for h in [r for c in L.pieces for r in c.G + c.H] + list(extra):
        if not is_zero(h) and canonical_line(h) not in hyper:
            hyper.append(canonical_line(h))
    hyper = tuple(hyper)
    cells = {}
    for piece in L.pieces:
        for c in arrangement_cells(hyper, piece):
            cells.setdefault(c.signs, c)
    out = []
    for signs in sorted(cells):
        c = cells[signs]
        closure = c.closure(hyper, whole_space(ref.n))
        if all(s == 0 for s in signs):
            basis = nullspace(list(closure.H), ref.n)
            if not basis:
                continue
            point = basis[0]
            dim = len(basis)
        else:
            point = c.point
            dim = len(linear_span_basis(closure))
        out.append(DirectionCell(CellSignature(signs, point), hyper, point, dim))
    return tuple(out)


def cell_normal_cone(ref: ReferenceData, cell: DirectionCell) -> ConeUnion:
    return dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, cell.point))


def in_lin_cone(ref: ReferenceData, u) -> bool:
    return tangent_cone(ref.P, ref.q).contains(mat_vec(ref.J, vec(u)))


def _jt(ref) -> tuple:
    return transpose(ref.J, ref.n)


# ---------------------------------------------------------------------------
# checkers


def check_metric_regularity(ref: ReferenceData) -> Verdict:
    """J^T λ = 0, λ ∈ N(q̄; P)  ⟹  λ = 0."""
    N = limiting_normal_cone(ref.P, ref.q)
    duals = []
    for k, piece in enumerate(N.pieces):
        v = cone_nontrivial(piece, _jt(ref))
        if v.is_holds:
            lam = v.payload.payload
            return Verdict.fails(Certificate("witness", (lam,)), reason=f"nonzero multiplier in limiting-cone piece {k}", route="normal-cone criterion")
        duals.append(v.payload)
    return Verdict.holds(Certificate("infeasibility_dual", tuple(duals)), route="normal-cone criterion")


@dataclass(frozen=True)
class CellDiagnostic:
    cell: DirectionCell
    piece: int
    verdict: Verdict

    def to_json(self):
        return {"cell": self.cell.to_json(), "piece": self.piece, "verdict": self.verdict.to_json()}


def _foscms(ref):
    diags = []
    for cell in direction_cells(ref):
        N = cell_normal_cone(ref, cell)
        for k, piece in enumerate(N.pieces):
            v = cone_nontrivial(piece, _jt(ref))
            diags.append(CellDiagnostic(cell, k, v))
            if v.is_holds:
                lam = v.payload.payload
                return Verdict.fails(
                    Certificate("witness", (cell.point, lam)),
                    reason=f"cell {cell.label()}: nonzero multiplier with J^T λ = 0",
                    route="cells",
                ), diags
    return Verdict.holds(Certificate("cells", tuple(c.cell.label() for c in diags)), route="cells"), diags


def check_foscms(ref: ReferenceData) -> Verdict:
    return _foscms(ref)[0]


def multiplier_cone(piece: ConvexCone, ref: ReferenceData) -> ConvexCone:
    """{λ ∈ piece | J^T λ = 0}."""
    return piece.with_equalities(_jt(ref))


def verify_second_order_witness(ref: ReferenceData, u, lam) -> bool:
    u, lam = vec(u), vec(lam)
    if is_zero(u) or is_zero(lam) or not in_lin_cone(ref, u):
        return False
    if any(x != 0 for x in mat_vec(_jt(ref), lam)):
        return False
    if not dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, u)).contains(lam):
        return False
    return quad(ref.Q(lam), u) >= 0


def _soscms(ref, tol):
    diags = []
    pending = None
    for cell in direction_cells(ref):
        N = cell_normal_cone(ref, cell)
        closure = cell.closure()
        for k, piece in enumerate(N.pieces):
            Lam = multiplier_cone(piece, ref)
            if not cone_nontrivial(Lam).is_holds:
                diags.append(CellDiagnostic(cell, k, Verdict.holds(route="first-order")))
                continue
            rays, lin = extreme_rays(Lam)
            if lin:
                l = lin[0]
                lam = l if quad(ref.Q(l), cell.point) >= 0 else tuple(-x for x in l)
                v = Verdict.fails(Certificate("witness", (cell.point, lam)), reason="multiplier cone contains a line", route="generators")
                diags.append(CellDiagnostic(cell, k, v))
                return v, diags
            for r in rays:
                res = max_quadratic_on_cone(ref.Q(r), closure, tol)
                if res.sign in (QSign.POSITIVE, QSign.ZERO):
                    u = res.maximizer
                    if res.exact and verify_second_order_witness(ref, u, r):
                        v = Verdict.fails(
                            Certificate("witness", (u, r)),
                            reason=f"cell {cell.label()}: u^T Q(λ) u = {quad(ref.Q(r), u)} >= 0",
                            route="generators",
                        )
                        diags.append(CellDiagnostic(cell, k, v))
                        return v, diags
                    pending = pending or Verdict.inconclusive(f"cell {cell.label()}: witness could not be verified exactly", route="generators")
                elif res.sign is QSign.INCONCLUSIVE:
                    pending = pending or Verdict.inconclusive(
                        f"cell {cell.label()}: quadratic supremum {res.value:.3g} within tolerance", route="generators"
                    )
            diags.append(CellDiagnostic(cell, k, Verdict.holds(route="generators", details=tuple(rays))))
    if pending is not None:
        return pending, diags
    return Verdict.holds(Certificate("cells", tuple(d.cell.label() for d in diags)), route="generators"), diags


def check_soscms(ref: ReferenceData, tol: float = DEFAULT_TOL) -> Verdict:
    return _soscms(ref, tol)[0]


def check_dir_subregularity(ref: ReferenceData, u) -> Verdict:
    """First- or second-order directional criterion at a fixed direction u."""
    u = vec(u)
    if not in_lin_cone(ref, u):
        return Verdict.holds(reason="direction outside the linearized cone", route="vacuous")
    N = dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, u))
    nontrivial = []
    for piece in N.pieces:
        Lam = multiplier_cone(piece, ref)
        if cone_nontrivial(Lam).is_holds:
            nontrivial.append(Lam)
    if not nontrivial:
        return Verdict.holds(route="first-order")
    for Lam in nontrivial:
        rays, lin = extreme_rays(Lam)
        for l in lin:
            lam = l if quad(ref.Q(l), u) >= 0 else tuple(-x for x in l)
            return Verdict.fails(Certificate("witness", (u, lam)), route="second-order")
        for r in rays:
            if quad(ref.Q(r), u) >= 0:
                return Verdict.fails(Certificate("witness", (u, r)), route="second-order")
    return Verdict.holds(route="second-order")


def check_dir_first_order(ref: ReferenceData, u) -> Verdict:
    u = vec(u)
    if not in_lin_cone(ref, u):
        return Verdict.holds(route="vacuous")
    N = dir_limiting_normal_cone(ref.P, ref.q, mat_vec(ref.J, u))
    for piece in N.pieces:
        v = cone_nontrivial(piece, _jt(ref))
        if v.is_holds:
            return Verdict.fails(Certificate("witness", (u, v.payload.payload)), route="first-order")
    return Verdict.holds(route="first-order")


def find_feasibility_direction(ref: ReferenceData, order: int = 1):
    """A nonzero linearized direction satisfying the order-l directional criterion."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    cells = direction_cells(ref)
    if not cells:
        return None, Verdict.fails(reason="no nonzero direction")
    test = check_dir_first_order if order == 1 else check_dir_subregularity
    for cell in cells:
        rays, lin = cell.generators()
        for u in [cell.point] + list(rays) + list(lin):
            if is_zero(u):
                continue
            if test(ref, u).is_holds:
                return u, Verdict.holds(Certificate("witness", (u,)), route=f"order-{order} cell {cell.label()}")
    return None, Verdict.fails(reason="no cell qualifies")


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class CQReport:
    metric_regularity: Verdict
    foscms: Verdict
    soscms: Verdict
    r1: Verdict
    r2: Verdict
    diagnostics: tuple = field(default=(), compare=False)

    def to_json(self):
        return {
            "metric_regularity": self.metric_regularity.to_json(),
            "foscms": self.foscms.to_json(),
            "soscms": self.soscms.to_json(),
            "r1": self.r1.to_json(),
            "r2": self.r2.to_json(),
            "cells": [d.to_json() for d in self.diagnostics],
        }


def cq_report(ref: ReferenceData, tol: float = DEFAULT_TOL) -> CQReport:
    mr = check_metric_regularity(ref)
    fo, d1 = _foscms(ref)
    so, d2 = _soscms(ref, tol)
    r1 = Verdict.holds(route="foscms") if fo.is_holds else Verdict.inconclusive("first-order condition does not hold", route="foscms")
    r2 = Verdict.holds(route="soscms") if so.is_holds else Verdict.inconclusive("second-order condition does not hold", route="soscms")
    return CQReport(mr, fo, so, r1, r2, tuple(d1 + d2))
