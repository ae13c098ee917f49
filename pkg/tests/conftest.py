import random
from fractions import Fraction
from pathlib import Path

import pytest

from stabcert.cones import EC, VC, Block, DisjunctiveSet, Free, NonPos, Union, Zero, tangent_cone
from stabcert.geometry import Polyhedron, extreme_rays, vadd, vscale
from stabcert.problem import load_problem

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.prob"


@pytest.fixture(scope="session")
def load():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_problem(fixture_path(name))
        return cache[name]

    return get


# ---------------------------------------------------------------------------
# random rational instances: two blocks, a point of P and a tangent direction


def _small(rng, lo=-2, hi=2):
    return Fraction(rng.randint(lo, hi))


def _apex_cone(rng, apex):
    """{y | A(y - apex) <= 0} with 1-2 random integer rows."""
    rows = []
    while len(rows) < rng.randint(1, 2):
        r = (_small(rng), _small(rng))
        if r != (0, 0):
            rows.append(r)
    b = [r[0] * apex[0] + r[1] * apex[1] for r in rows]
    return Polyhedron(2, rows, b)


def random_block(rng):
    kind = rng.choice(["nonpos", "nonpos2", "zero", "free", "ec", "vc", "union"])
    if kind == "nonpos":
        return NonPos(1)
    if kind == "nonpos2":
        return NonPos(2)
    if kind == "zero":
        return Zero(1)
    if kind == "free":
        return Free(1)
    if kind == "ec":
        return EC()
    if kind == "vc":
        return VC()
    apex = (_small(rng, -1, 1), _small(rng, -1, 1))
    other = apex if rng.random() < 0.6 else (apex[0] + 1, apex[1])
    return Union([_apex_cone(rng, apex), _apex_cone(rng, other)])


def _interesting_point(rng, block: Block):
    """A point of the block, biased towards kinks (apexes, the origin)."""
    pieces = block.pieces()
    cands = []
    if block.contains((Fraction(0),) * block.dim):
        cands.append((Fraction(0),) * block.dim)
    if block.kind == "union":
        for p in pieces:
            for cand in _union_vertices(p):
                if block.contains(cand):
                    cands.append(cand)
    if block.kind in ("nonpos", "ec", "vc"):
        t = -Fraction(rng.randint(1, 3))
        if block.kind == "nonpos":
            cands.append(tuple(t if rng.random() < 0.5 else Fraction(0) for _ in range(block.dim)))
        elif block.kind == "ec":
            cands.append((t, Fraction(0)) if rng.random() < 0.5 else (Fraction(0), t))
        else:
            cands.append((-t, t) if rng.random() < 0.5 else (Fraction(0), -t))
    if block.kind == "free":
        cands.append((Fraction(rng.randint(-2, 2)),))
    return rng.choice(cands) if cands else None


def _union_vertices(p: Polyhedron):
    from stabcert.geometry import find_point, solve_linear

    out = []
    rows = list(zip(p.A, p.b))
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            sol = solve_linear([rows[i][0], rows[j][0]], [rows[i][1], rows[j][1]], 2)
            if sol is not None:
                out.append(tuple(sol))
    if not out:
        x = find_point(p.constraints(), 2)
        if x is not None:
            out.append(tuple(x))
    return out


def random_tangent(rng, P, y):
    T = tangent_cone(P, y)
    piece = rng.choice(T.pieces)
    rays, lin = extreme_rays(piece)
    d = (Fraction(0),) * P.dim
    for r in rays:
        d = vadd(d, vscale(Fraction(rng.randint(0, 2)), r))
    for l in lin:
        d = vadd(d, vscale(Fraction(rng.randint(-1, 1)), l))
    return d


def random_instances(count: int, seed: int = 0):
    """(P, y, d) with P a product of two random blocks, y ∈ P, d ∈ T(y; P)."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        blocks = (random_block(rng), random_block(rng))
        if sum(b.dim for b in blocks) > 4:
            continue
        pts = [_interesting_point(rng, b) for b in blocks]
        if any(p is None for p in pts):
            continue
        P = DisjunctiveSet(blocks)
        y = tuple(c for p in pts for c in p)
        d = random_tangent(rng, P, y) if rng.random() < 0.8 else (Fraction(0),) * P.dim
        out.append((P, y, d))
    return out


# ---------------------------------------------------------------------------
# random small MPECs at an M-stationary reference point


def _sym(rng, n, lo=-2, hi=2):
    H = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            H[i][j] = H[j][i] = _small(rng, lo, hi)
    return tuple(tuple(r) for r in H)


def random_mpec(rng, zero_hessian: bool, nontrivial: bool = True):
    """Reference data with blocks (nonpos m_I, ec × m_C), n, m_C, m_I ≤ 2.

    With `nontrivial`, redraw until the linearized cone is not {0}.
    """
    from stabcert.cq import direction_cells

    while True:
        ref = _draw_mpec(rng, zero_hessian)
        if not nontrivial or direction_cells(ref):
            return ref


def _draw_mpec(rng, zero_hessian):
    from stabcert.geometry import transpose
    from stabcert.problem import ReferenceData

    n, m_I, m_C = rng.randint(1, 2), rng.randint(0, 2), rng.randint(1, 2)
    blocks = ([NonPos(m_I)] if m_I else []) + [EC() for _ in range(m_C)]
    P = DisjunctiveSet(blocks)
    q = [Fraction(rng.choice([0, 0, -1])) for _ in range(m_I)]
    for _ in range(m_C):
        q += rng.choice([(0, 0), (0, 0), (-1, 0), (0, -1)])
    q = tuple(Fraction(v) for v in q)
    m = len(q)
    J = tuple(tuple(_small(rng) for _ in range(n)) for _ in range(m))
    zero = tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(n))
    Hq = tuple(zero if zero_hessian or rng.random() < 0.5 else _sym(rng, n, -1, 1) for _ in range(m))
    from stabcert.cones import limiting_normal_cone

    N = limiting_normal_cone(P, q)
    piece = rng.choice(N.pieces)
    rays, lin = extreme_rays(piece)
    lam = (Fraction(0),) * m
    for r in rays:
        lam = vadd(lam, vscale(Fraction(rng.randint(0, 2)), r))
    for l in lin:
        lam = vadd(lam, vscale(Fraction(rng.randint(-1, 1)), l))
    JT = transpose(J, n)
    grad_f = tuple(-sum((a * b for a, b in zip(row, lam)), Fraction(0)) for row in JT)
    return ReferenceData(n, m, 1, P, q, J, Hq, grad_f, _sym(rng, n), x_bar=(Fraction(0),) * n, omega_bar=(Fraction(0),))


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def verdict_line():
    def record(number: int, ok: bool, detail: str, seconds: float):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
