"""Perturbation harness: stationary points of perturbed problems, growth checks
and empirical Lipschitz / Hölder ratios.

Everything here is floating point and desk-scale (n ≤ 4).  Exactness is
reintroduced only when classifying found points: constraint values within
`snap` of a piece boundary are snapped, and the cones at the snapped point
come from the exact cone calculus.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize
from scipy.stats import norm, qmc

from .cones import DisjunctiveSet, NotInSet, limiting_normal_cone, project_block, tangent_cone
from .geometry import Certificate, Polyhedron, Verdict, extreme_rays
from .problem import ParamProblem, error_measures, evaluate
from .stability import GrowthAttestation

log = logging.getLogger(__name__)

M_STAT = "M-stat"
B_STAT_LIN = "linearized-B-stat"
LOCAL_MIN = "local-min-candidate"
MULTIPLIER_BOUND = 1e6


# ---------------------------------------------------------------------------
# branches


@dataclass(frozen=True)
class Branch:
    index: int
    selection: tuple  # piece index per block
    polyhedron: Polyhedron  # branch set in q-space

    def arrays(self):
        P = self.polyhedron
        A = np.array([[float(x) for x in r] for r in P.A]).reshape(len(P.A), P.dim)
        E = np.array([[float(x) for x in r] for r in P.E]).reshape(len(P.E), P.dim)
        return A, np.array([float(x) for x in P.b]), E, np.array([float(x) for x in P.e])

    @property
    def label(self) -> str:
        return "branch " + "".join(str(i) for i in self.selection)

    def describe(self, names=None) -> str:
        m = self.polyhedron.dim
        names = names or [f"q{i + 1}" for i in range(m)]

        def lin(r):
            terms = [f"{'' if c == 1 else '-' if c == -1 else str(c) + '*'}{names[i]}" for i, c in enumerate(r) if c != 0]
            return " + ".join(terms).replace("+ -", "- ") or "0"

        rows = [f"{lin(r)} <= {v}" for r, v in zip(self.polyhedron.A, self.polyhedron.b)]
        rows += [f"{lin(r)} == {v}" for r, v in zip(self.polyhedron.E, self.polyhedron.e)]
        return "; ".join(rows) or "(no constraints)"


def enumerate_branches(P: DisjunctiveSet) -> list:
    out, seen = [], set()
    for sel, poly in zip(itertools.product(*(range(len(b.pieces())) for b in P.blocks)), P.flat_pieces()):
        if poly in seen:
            continue
        seen.add(poly)
        out.append(Branch(len(out), sel, poly))
    return out


# ---------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class SearchConfig:
    radius: float = 1.0  # half-width of the search box around x̄
    axis_points: int = 41  # uniform points per axis line through x̄
    geometric_points: int = 72  # per half-axis, clustered towards x̄
    min_step: float = 1e-3
    scattered: int = 600  # low-discrepancy starts in the box (and as many in a box of radius/10)
    max_iter: int = 150
    tol: float = 1e-10
    merge: float = 1e-7
    snap: float = 1e-8
    min_radius: float = 0.0  # resolution cutoff: points closer than this to x̄ (other than x̄) are dropped
    probe_radius: float = 0.05
    probe_starts: int = 4
    seed: int = 0


@dataclass
class StationaryPoint:
    x: np.ndarray
    tags: frozenset
    branch: int
    residual: float
    f: float
    multiplier: np.ndarray | None = None
    snapped: int = 0  # number of constraint values snapped onto boundaries

    def to_json(self):
        return {
            "x": [float(v) for v in self.x],
            "tags": sorted(self.tags),
            "branch": self.branch,
            "residual": self.residual,
            "f": self.f,
            "multiplier": None if self.multiplier is None else [float(v) for v in self.multiplier],
            "snapped": self.snapped,
        }


@dataclass
class PerturbSample:
    omega: tuple
    e1: float
    e2: float
    tau1: float
    tau2: float
    points: list = field(default_factory=list)
    dist_min: float = math.inf
    dist_max_local: float = math.nan
    feas_dist: float = math.nan

    def to_json(self):
        d = {k: v for k, v in asdict(self).items() if k != "points"}
        d["omega"] = list(self.omega)
        d["points"] = [p.to_json() for p in self.points]
        return d


@dataclass
class RatioEstimate:
    order: int
    sup: float
    argmax_omega: tuple | None
    grid: str
    prefix_sups: tuple
    bounded: bool
    slope: float  # least-squares slope of log ratio against log τ; negative means growth as τ → 0
    n_used: int
    consistent: bool = True

    def to_json(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# batched Levenberg–Marquardt


def _lm(fun, Z, max_iter, tol):
    """Minimize ‖r(Z)‖² per row of Z; fun returns (r, J) batched."""
    Z = Z.copy()
    N, d = Z.shape
    with np.errstate(all="ignore"):
        r, J = fun(Z)
    cost = np.where(np.isfinite(r).all(1), (r**2).sum(1), np.inf)
    mu = np.full(N, 1e-8)
    active = np.isfinite(cost)
    eye = np.eye(d)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ja, ra = J[idx], r[idx]
        JT = Ja.transpose(0, 2, 1)
        JTJ = JT @ Ja
        # Marquardt scaling: flat directions (double roots) are damped relative to their own curvature
        A = JTJ + mu[idx, None, None] * ((np.einsum("nii->ni", JTJ) + 1e-30)[:, :, None] * eye)
        g = (JT @ ra[..., None])[..., 0]
        try:
            step = -np.linalg.solve(A, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.einsum("nij,nj->ni", np.linalg.pinv(A), g)
        Zn = Z[idx] + step
        with np.errstate(all="ignore"):
            rn, Jn = fun(Zn)
        cn = np.where(np.isfinite(rn).all(1) & np.isfinite(Jn).all((1, 2)), (rn**2).sum(1), np.inf)
        # doubled step: restores fast convergence at double roots, rejected elsewhere
        Zd = Z[idx] + 2 * step
        with np.errstate(all="ignore"):
            rd, Jd = fun(Zd)
        cd = np.where(np.isfinite(rd).all(1) & np.isfinite(Jd).all((1, 2)), (rd**2).sum(1), np.inf)
        better = cd < cn
        Zn[better], rn[better], Jn[better], cn[better] = Zd[better], rd[better], Jd[better], cd[better]
        ok = cn < cost[idx]
        acc = idx[ok]
        Z[acc], r[acc], J[acc], cost[acc] = Zn[ok], rn[ok], Jn[ok], cn[ok]
        mu[acc] = np.maximum(mu[acc] / 5, 1e-14)
        rej = idx[~ok]
        mu[rej] = mu[rej] * 8
        small = np.linalg.norm(step, axis=1) <= 1e-15 * (1 + np.linalg.norm(Zn, axis=1))
        # no cost threshold: at a double root a tiny residual still leaves x off by its square root
        done = (ok & small) | (cost[idx] == 0) | (mu[idx] > 1e12)
        active[idx[done]] = False
    return Z, np.sqrt(cost)


# ---------------------------------------------------------------------------
# start points


def _axis_values(cfg: SearchConfig):
    geo = np.geomspace(cfg.min_step, cfg.radius, cfg.geometric_points)
    vals = np.concatenate([np.linspace(-cfg.radius, cfg.radius, cfg.axis_points), geo, -geo, [0.0]])
    return np.unique(vals)


def start_points(x_bar, cfg: SearchConfig) -> np.ndarray:
    """x̄, axis lines through x̄, and two scrambled Halton clouds."""
    x_bar = np.asarray(x_bar, dtype=float)
    n = x_bar.size
    pts = [x_bar[None, :]]
    vals = _axis_values(cfg)
    for i in range(n):
        line = np.repeat(x_bar[None, :], vals.size, axis=0)
        line[:, i] += vals
        pts.append(line)
    for scale in (1.0, 0.1):
        h = qmc.Halton(d=n, scramble=True, seed=cfg.seed).random(cfg.scattered)
        pts.append(x_bar + scale * cfg.radius * (2 * h - 1))
    return np.vstack(pts)


# ---------------------------------------------------------------------------
# systems per branch


def _feasibility_fun(prob, omega, rows, rhs):
    def fun(X):
        ev = evaluate(prob, X, omega, strict=False)
        r = ev.q @ rows.T - rhs
        J = np.einsum("km,nmj->nkj", rows, ev.Jq)
        return r, J

    return fun


def _kkt_fun(prob, omega, rows, rhs, n):
    """Residual of ∇f + (R Jq)^T y = 0, R q = rhs over (x, y)."""
    k = rows.shape[0]

    def fun(Z):
        X, Y = Z[:, :n], Z[:, n:]
        ev = evaluate(prob, X, omega, strict=False)
        RJ = np.einsum("km,nmj->nkj", rows, ev.Jq)  # (N,k,n)
        grad = ev.grad_f + np.einsum("nkj,nk->nj", RJ, Y)
        w = Y @ rows  # (N,m) weights on q-components
        H = ev.Hf + np.einsum("nm,nmij->nij", w, ev.Hq)
        r = np.concatenate([grad, ev.q @ rows.T - rhs], axis=1)
        top = np.concatenate([H, RJ.transpose(0, 2, 1)], axis=2)
        bot = np.concatenate([RJ, np.zeros((Z.shape[0], k, k))], axis=2)
        return r, np.concatenate([top, bot], axis=1)

    return fun


def _merge(points, radius):
    out = []
    for p in points:
        if all(np.linalg.norm(p[0] - q[0]) > radius for q in out):
            out.append(p)
    return out


def _branch_feasible_mask(Q, A, b, E, e, S, tol):
    """Rows solved for (S and E) within tol; every other inequality ≤ 0 exactly.

    A small absolute tolerance on the other rows would admit corner points of
    systems that miss a row whose violation is below any fixed scale; if that
    row is genuinely active, the system containing it finds the point.
    """
    ok = np.isfinite(Q).all(1)
    if A.size:
        V = Q @ A.T - b
        inS = np.zeros(A.shape[0], bool)
        inS[list(S)] = True
        ok &= (V[:, inS] <= tol).all(1) & (V[:, ~inS] <= 0).all(1)
    if E.size:
        ok &= (np.abs(Q @ E.T - e) <= tol).all(1)
    return ok


def _candidates(prob, omega, branches, cfg):
    """Branch-feasible KKT points and constraint-determined points: (x, branch, residual)."""
    n = prob.ref.n
    X0 = start_points([float(v) for v in prob.x_bar], cfg)
    found = []
    for br in branches:
        A, b, E, e = br.arrays()
        for size in range(0, A.shape[0] + 1):
            for S in itertools.combinations(range(A.shape[0]), size):
                rows = np.vstack([A[list(S)], E]) if (S or E.size) else np.zeros((0, A.shape[1]))
                rhs = np.concatenate([b[list(S)], e])
                k = rows.shape[0]
                if k > n:
                    continue
                if k == n:
                    X, res = _lm(_feasibility_fun(prob, omega, rows, rhs), X0, cfg.max_iter, cfg.tol)
                    good = res <= cfg.tol
                else:
                    Z0 = np.hstack([X0, np.zeros((X0.shape[0], k))])
                    Z, res = _lm(_kkt_fun(prob, omega, rows, rhs, n), Z0, cfg.max_iter, cfg.tol)
                    X = Z[:, :n]
                    good = (res <= cfg.tol) & (Z[:, n : n + len(S)] >= -1e-8).all(1)
                if not good.any():
                    continue
                X, res = X[good], res[good]
                Q = evaluate(prob, X, omega, strict=False).q
                keep = _branch_feasible_mask(Q, A, b, E, e, S, cfg.tol)
                found += [(x, br.index, float(r)) for x, r in zip(X[keep], res[keep])]
    return found


def _feasible(prob, omega, x, P: DisjunctiveSet, tol=1e-8) -> bool:
    ev = evaluate(prob, x[None, :], omega, strict=False)
    return bool(np.isfinite(ev.q).all()) and constraint_distance(P, ev.q[0]) <= tol


# ---------------------------------------------------------------------------
# distances to the constraint set (blockwise closed forms)


def _block_distance_sq(b, a) -> float:
    a = np.asarray(a, dtype=float)
    if b.kind == "nonpos":
        return float(np.sum(np.maximum(a, 0) ** 2))
    if b.kind == "zero":
        return float(np.sum(a**2))
    if b.kind == "free":
        return 0.0
    if b.kind == "ec":
        x, y = a
        return min(max(x, 0) ** 2 + y**2, x**2 + max(y, 0) ** 2)
    if b.kind == "vc":
        x, y = a
        return min(min(x, 0) ** 2 + max(y, 0) ** 2, x**2 + min(y, 0) ** 2)
    best = math.inf
    for poly in b.pieces():
        best = min(best, _poly_distance_sq(poly, a))
    return best


def _poly_distance_sq(poly: Polyhedron, a) -> float:
    if poly.contains(tuple(Fraction(x) for x in a)):
        return 0.0
    A = np.array([[float(x) for x in r] for r in poly.A]).reshape(len(poly.A), poly.dim)
    b = np.array([float(x) for x in poly.b])
    E = np.array([[float(x) for x in r] for r in poly.E]).reshape(len(poly.E), poly.dim)
    e = np.array([float(x) for x in poly.e])
    cons = []
    if A.size:
        cons.append({"type": "ineq", "fun": lambda z: b - A @ z, "jac": lambda z: -A})
    if E.size:
        cons.append({"type": "eq", "fun": lambda z: E @ z - e, "jac": lambda z: E})
    res = minimize(lambda z: 0.5 * np.sum((z - a) ** 2), a, jac=lambda z: z - a, constraints=cons, method="SLSQP")
    return float(np.sum((res.x - a) ** 2))


def constraint_distance(P: DisjunctiveSet, y) -> float:
    """dist(y, P) using per-block closed forms (numeric projection for union blocks)."""
    return math.sqrt(sum(_block_distance_sq(b, a) for b, a in zip(P.blocks, P.split(list(y)))))


# ---------------------------------------------------------------------------
# classification


def _snap(P: DisjunctiveSet, y, tol):
    """Exact point of P near y: tiny components go to 0, the rest are rationalized."""
    ys, count = [], 0
    for v in y:
        if abs(v) <= tol:
            ys.append(Fraction(0))
            count += int(v != 0.0)
        else:
            ys.append(Fraction(float(v)).limit_denominator(10**12))
    parts = []
    for b, a in zip(P.blocks, P.split(ys)):
        if not b.contains(a):
            proj = project_block(b, a)
            if max(abs(float(x - z)) for x, z in zip(a, proj)) > 1e-7:
                raise NotInSet("point is not feasible")
            a, count = tuple(proj), count + 1
        parts.extend(a)
    return tuple(parts), count


@lru_cache(maxsize=4096)
def _cone_generators(cone):
    rays, lin = extreme_rays(cone)
    return np.array([[float(x) for x in r] for r in rays]).reshape(len(rays), cone.dim), np.array(
        [[float(x) for x in l] for l in lin]
    ).reshape(len(lin), cone.dim)


def _m_stationary(P, y, g, Jq, tol):
    best, lam = math.inf, None
    for piece in limiting_normal_cone(P, y).pieces:
        R, L = _cone_generators(piece)
        G = np.vstack([R, L]).T  # (m, k)
        if G.shape[1] == 0:
            res = float(np.linalg.norm(g))
            if res < best:
                best, lam = res, np.zeros(Jq.shape[0])
            continue
        M = Jq.T @ G
        lb = np.concatenate([np.zeros(R.shape[0]), np.full(L.shape[0], -np.inf)])
        # bounded multipliers: near-degenerate points would otherwise pass with huge ones
        ub = np.full(G.shape[1], MULTIPLIER_BOUND)
        lb = np.maximum(lb, -MULTIPLIER_BOUND)
        sol = lsq_linear(M, -g, bounds=(lb, ub), method="bvls")
        res = float(np.linalg.norm(M @ sol.x + g))
        if res < best:
            best, lam = res, G @ sol.x
    return best <= tol * max(1.0, float(np.linalg.norm(g))), lam


def _b_stationary_lin(P, y, g, Jq, tol):
    n = Jq.shape[1]
    for T in tangent_cone(P, y).pieces:
        Gm = np.array([[float(x) for x in r] for r in T.G]).reshape(len(T.G), T.dim) @ Jq
        Hm = np.array([[float(x) for x in r] for r in T.H]).reshape(len(T.H), T.dim) @ Jq
        res = linprog(
            g,
            A_ub=Gm if Gm.size else None,
            b_ub=np.zeros(Gm.shape[0]) if Gm.size else None,
            A_eq=Hm if Hm.size else None,
            b_eq=np.zeros(Hm.shape[0]) if Hm.size else None,
            bounds=[(-1, 1)] * n,
            method="highs",
        )
        if res.status == 0 and res.fun < -tol:
            return False
    return True


def _branch_minimize(prob, omega, br: Branch, x0, objective, center, radius):
    """Local solve of min objective over the branch set, optionally within a ball.

    Variables are rescaled so that the ball (or a unit box) has size one; the
    probes run at scales down to 1e-6.
    """
    A, b, E, e = br.arrays()
    c = np.asarray(center if center is not None else x0, dtype=float)
    scale = radius if radius is not None else 1.0
    cache = {}

    def at(z):
        key = z.tobytes()
        if key not in cache:
            x = c + scale * z
            ev = evaluate(prob, x[None, :], omega, strict=False)
            cache.clear()
            cache[key] = (ev.q[0], ev.Jq[0] * scale)
        return cache[key]

    f0, _ = objective(c)

    def fobj(z):
        fv, g = objective(c + scale * z)
        return (fv - f0) / scale, g

    cons = []
    if A.size:
        cons.append({"type": "ineq", "fun": lambda z: b - A @ at(z)[0], "jac": lambda z: -A @ at(z)[1]})
    if E.size:
        cons.append({"type": "eq", "fun": lambda z: E @ at(z)[0] - e, "jac": lambda z: E @ at(z)[1]})
    if radius is not None:
        cons.append({"type": "ineq", "fun": lambda z: 1.0 - z @ z, "jac": lambda z: -2 * z})
    with np.errstate(all="ignore"):
        res = minimize(fobj, (np.asarray(x0, float) - c) / scale, jac=True, constraints=cons, method="SLSQP", options={"maxiter": 100, "ftol": 1e-12})
    x = c + scale * res.x
    q = evaluate(prob, x[None, :], omega, strict=False).q[0]
    viol = 0.0
    if A.size:
        viol = max(viol, float(np.max(A @ q - b)))
    if E.size:
        viol = max(viol, float(np.max(np.abs(E @ q - e))))
    if radius is not None:
        viol = max(viol, float(np.linalg.norm(x - c)) - radius)
    return x, viol


def _objective(prob, omega):
    def fun(x):
        ev = evaluate(prob, x[None, :], omega, strict=False)
        return float(ev.f[0]), ev.grad_f[0]

    return fun


def _is_local_min_candidate(prob, omega, x, fx, others, evidence, branches, cfg, rng):
    """No feasible improvement in a ball around x, neither among `evidence` nor by local solves.

    The ball radius is capped at half the distance to the nearest other reported point,
    so isolated feasible points (discrete feasible sets) are judged locally.
    """
    gaps = [np.linalg.norm(y - x) for y in others]
    gaps = [g for g in gaps if g > 0]
    radius = min([cfg.probe_radius] + [0.5 * g for g in gaps])
    obj = _objective(prob, omega)
    gain = 1e-9 * (1 + abs(fx))
    for y in evidence:
        if 0 < np.linalg.norm(y - x) <= radius and obj(y)[0] < fx - gain:
            return False
    q = evaluate(prob, x[None, :], omega, strict=False).q[0]
    for br in branches:
        A, b, E, e = br.arrays()
        if (A.size and np.max(A @ q - b) > 1e-8) or (E.size and np.max(np.abs(E @ q - e)) > 1e-8):
            continue
        for _ in range(cfg.probe_starts):
            x0 = x + rng.normal(size=x.size) * radius * 0.2
            y, _ = _branch_minimize(prob, omega, br, x0, obj, x, radius)
            if not np.isfinite(y).all() or obj(y)[0] >= fx - gain:
                continue
            # the solver's output is only nearly feasible; restore exactly before trusting the gain
            y, ok = _restore(prob, omega, br, y)
            if ok and np.linalg.norm(y - x) <= radius * (1 + 1e-9) and obj(y)[0] < fx - gain:
                return False
    return True


def _restore(prob, omega, br: Branch, y, iters: int = 40, eq_tol: float = 1e-14):
    """Gauss–Newton onto the near-active rows until the inequalities hold exactly.

    At least one step is always taken.  Any slack in the branch rows can be traded
    for an O(√slack) gain along a quadratically tight constraint, hence the exact
    inequality test and the tiny equality tolerance.
    """
    A, b, E, e = br.arrays()
    margin = 1e-13
    for it in range(iters + 1):
        ev = evaluate(prob, y[None, :], omega, strict=False)
        q, Jq = ev.q[0], ev.Jq[0]
        if not np.isfinite(q).all():
            return y, False
        va = A @ q - b if A.size else np.zeros(0)
        ve = E @ q - e if E.size else np.zeros(0)
        if it > 0 and (va <= 0).all() and (np.abs(ve) <= eq_tol).all():
            return y, True
        if it == iters:
            break
        near = va > -margin
        R = np.concatenate([va[near] + margin, ve])
        M = np.vstack([(A @ Jq)[near], E @ Jq]) if E.size else (A @ Jq)[near]
        step = np.linalg.lstsq(M, -R, rcond=None)[0]
        if not np.isfinite(step).all():
            return y, False
        y = y + step
    return y, False


def classify_point(prob: ParamProblem, omega, x, cfg: SearchConfig = SearchConfig()):
    """(tags, multiplier, snapped count) for a feasible point; tags exclude the local-min test."""
    ev = evaluate(prob, np.asarray(x, dtype=float)[None, :], omega, strict=False)
    y, snapped = _snap(prob.P, ev.q[0], cfg.snap)
    g, Jq = ev.grad_f[0], ev.Jq[0]
    tags = set()
    is_m, lam = _m_stationary(prob.P, y, g, Jq, 1e-7)
    if is_m:
        tags.add(M_STAT)
    if _b_stationary_lin(prob.P, y, g, Jq, 1e-7):
        tags.add(B_STAT_LIN)
    return tags, (lam if is_m else None), snapped


def find_stationary_points(prob: ParamProblem, omega, cfg: SearchConfig = SearchConfig()) -> list:
    """Stationary points of the perturbed problem near x̄, classified and merged."""
    if not prob.has_expressions:
        raise ValueError("problem has no expressions; the harness needs f and q")
    if prob.ref.n > 4:
        log.warning("stationary-point search is desk-scale; n=%d may be slow", prob.ref.n)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    branches = enumerate_branches(prob.P)
    x_bar = np.array([float(v) for v in prob.x_bar])
    raw = [r for r in _candidates(prob, omega, branches, cfg) if np.isfinite(r[0]).all()]
    raw.sort(key=lambda r: (r[2], tuple(np.round(r[0], 9))))
    # cheap pre-merge on a fine lattice before the quadratic merge
    seen, pre = set(), []
    for r in raw:
        key = tuple(np.round(r[0] / (cfg.merge / 10)).astype(np.int64))
        if key not in seen:
            seen.add(key)
            pre.append(r)
    # points below the resolution cutoff are not reported but still count as evidence against local minimality
    evidence = _merge(pre, cfg.merge)
    merged = [r for r in evidence if not cfg.merge < np.linalg.norm(r[0] - x_bar) < cfg.min_radius]
    obj = _objective(prob, omega)
    xs = [r[0] for r in merged]
    rng = np.random.default_rng(cfg.seed)
    out = []
    for x, bi, res in merged:
        fx = obj(x)[0]
        try:
            tags, lam, snapped = classify_point(prob, omega, x, cfg)
        except NotInSet:
            continue
        if _is_local_min_candidate(prob, omega, x, fx, xs, [r[0] for r in evidence], branches, cfg, rng):
            tags.add(LOCAL_MIN)
        if tags:
            out.append(StationaryPoint(x, frozenset(tags), bi, res, fx, lam, snapped))
    out.sort(key=lambda p: tuple(p.x))
    return out


# ---------------------------------------------------------------------------
# feasibility distance and growth


def feasibility_distance(prob: ParamProblem, omega, starts: int = 4, seed: int = 0) -> float:
    """dist(x̄, ℱ(ω)) by minimizing ½‖x − x̄‖² over each branch."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    x_bar = np.array([float(v) for v in prob.x_bar])
    if _feasible(prob, omega, x_bar, prob.P, 1e-12):
        return 0.0

    def obj(x):
        return 0.5 * float(np.sum((x - x_bar) ** 2)), x - x_bar

    rng = np.random.default_rng(seed)
    best = math.inf
    for br in enumerate_branches(prob.P):
        for k in range(starts):
            x0 = x_bar + (0 if k == 0 else rng.normal(size=x_bar.size) * 0.1)
            y, viol = _branch_minimize(prob, omega, br, x0, obj, None, None)
            if viol <= 1e-9 and np.isfinite(y).all():
                best = min(best, float(np.linalg.norm(y - x_bar)))
    return best


def verify_growth(prob: ParamProblem, eta: float, radius: float, grid_n: int) -> Verdict:
    """Check max{f(x) − f(x̄), dist(q(x), P)} ≥ η‖x − x̄‖² on a grid in the radius-ball at ω̄.

    Holds carries a GrowthAttestation; Fails carries the worst violating x.
    """
    x_bar = np.array([float(v) for v in prob.x_bar])
    omega = np.array([float(v) for v in prob.omega_bar])
    n = x_bar.size
    axes = [np.linspace(-radius, radius, grid_n)] * n
    D = np.array(list(itertools.product(*axes)))
    D = D[np.linalg.norm(D, axis=1) <= radius + 1e-12]
    X = x_bar + D
    ev = evaluate(prob, X, omega, strict=False)
    f0 = float(evaluate(prob, x_bar[None, :], omega).f[0])
    gap = ev.f - f0
    dist = np.array([constraint_distance(prob.P, q) if np.isfinite(q).all() else math.inf for q in ev.q])
    lhs = np.maximum(gap, dist)
    rhs = eta * np.sum(D**2, axis=1)
    margin = lhs - rhs
    bad = margin < -1e-12
    if bad.any():
        k = int(np.argmin(margin))
        return Verdict.fails(
            Certificate("witness", tuple(float(v) for v in X[k])),
            reason=f"growth inequality violated by {-margin[k]:.3g}",
            route="grid",
        )
    att = GrowthAttestation.harness_verified(eta, radius, grid_n)
    return Verdict.holds(Certificate("attestation", att), route="grid", details=(("points", int(len(X))),))


# ---------------------------------------------------------------------------
# perturbation study


def _sample(args):
    prob, omega, cfg, locality = args
    em = error_measures(prob, omega)
    s = PerturbSample(tuple(float(w) for w in np.atleast_1d(omega)), em["e1"], em["e2"], em["tau1"], em["tau2"])
    x_bar = np.array([float(v) for v in prob.x_bar])
    s.points = find_stationary_points(prob, omega, cfg)
    d = [float(np.linalg.norm(p.x - x_bar)) for p in s.points]
    s.dist_min = min(d) if d else math.inf
    local = [v for v in d if v <= locality]
    s.dist_max_local = max(local) if local else math.nan
    s.feas_dist = feasibility_distance(prob, omega)
    return s


def run_perturbation_study(
    prob: ParamProblem,
    omegas,
    order: int = 1,
    cfg=SearchConfig(),
    locality: float = 0.5,
    certified: bool | None = None,
    workers: int = 1,
):
    """Samples over the ω grid (kept in grid order) and the sup of dist/τ_order.

    `cfg` is a SearchConfig or a function ω ↦ SearchConfig, for solution sets whose
    scale shrinks with ω.  With workers > 1 it must be picklable.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    omegas = [np.atleast_1d(np.asarray(w, dtype=float)) for w in omegas]
    if not omegas:
        raise ValueError("empty parameter grid")
    jobs = [(prob, w, cfg(w) if callable(cfg) else cfg, locality) for w in omegas]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            samples = list(ex.map(_sample, jobs))
    else:
        samples = [_sample(j) for j in jobs]
    return samples, ratio_estimate(samples, order, certified)


def ratio_estimate(samples, order: int, certified: bool | None = None, key: str = "dist_max_local") -> RatioEstimate:
    tau = f"tau{order}"
    ratios, taus = [], []
    for s in samples:
        t, d = getattr(s, tau), getattr(s, key)
        if t > 0 and np.isfinite(d):
            ratios.append((d / t, s.omega))
            taus.append((t, s.omega))
    grid = f"{len(samples)} samples, omega from {samples[0].omega} to {samples[-1].omega}"
    if not ratios:
        return RatioEstimate(order, math.nan, None, grid, (), True, math.nan, 0, True)
    prefix = tuple(max(r for r, _ in ratios[: k + 1]) for k in range(len(ratios)))
    sup, arg = max(ratios, key=lambda t: t[0])
    slope = _loglog_slope([t for t, _ in taus], [r for r, _ in ratios])
    # a ratio growing like τ^(-1/4) or faster is read as unbounded
    bounded = bool(slope >= -SLOPE_LIMIT) if math.isfinite(slope) else True
    consistent = bounded if certified else True
    return RatioEstimate(order, sup, arg, grid, prefix, bounded, slope, len(ratios), consistent)


SLOPE_LIMIT = 0.25


def _loglog_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.maximum(np.asarray(y, float), 1e-300))
    if len(x) < 3 or np.ptp(x) < math.log(2):
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


CSV_COLUMNS = ("e1", "e2", "tau1", "tau2", "feas_dist", "n_points", "dist_min", "dist_max_local")


def write_csv(samples, path) -> None:
    """One row per sample; omega components first, then CSV_COLUMNS."""
    s_dim = len(samples[0].omega) if samples else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"omega{i + 1}" for i in range(s_dim)] + list(CSV_COLUMNS))
        for s in samples:
            vals = list(s.omega) + [s.e1, s.e2, s.tau1, s.tau2, s.feas_dist]
            tail = [s.dist_min, s.dist_max_local]
            w.writerow([repr(float(v)) for v in vals] + [len(s.points)] + [repr(float(v)) for v in tail])


def write_points_json(samples, path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_json() for s in samples], fh, indent=1, allow_nan=True)


# ---------------------------------------------------------------------------
# directional neighbourhood sampler


def directional_sampler(u, rho: float, delta: float, count: int = 256, seed: int = 0) -> np.ndarray:
    """Deterministic samples of V_{ρ,δ}(u): the ρ-ball if u = 0, else the cone
    {z : ‖‖u‖z − ‖z‖u‖ ≤ δ‖z‖‖u‖} within ρ."""
    if rho <= 0 or delta <= 0:
        raise ValueError("rho and delta must be positive")
    u = np.asarray(u, dtype=float)
    n = u.size
    # columns: radius, polar angle, then n Gaussian coordinates for the direction
    h = qmc.Halton(d=n + 2, scramble=True, seed=seed).random(count)
    h = np.clip(h, 1e-12, 1 - 1e-12)
    r = rho * h[:, 0] ** (1.0 / n)
    g = norm.ppf(h[:, 2:])

    nu = np.linalg.norm(u)
    if nu == 0:
        d = g / np.linalg.norm(g, axis=1, keepdims=True)
        return r[:, None] * d
    uh = u / nu
    if n == 1:
        return r[:, None] * uh[None, :]
    w = g - np.outer(g @ uh, uh)
    w /= np.maximum(np.linalg.norm(w, axis=1, keepdims=True), 1e-300)
    theta_max = math.pi if delta >= 2 else 2 * math.asin(delta / 2)
    theta = theta_max * h[:, 1]
    d = np.cos(theta)[:, None] * uh + np.sin(theta)[:, None] * w
    return r[:, None] * d
