import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabcert.cones import EC, DisjunctiveSet, NonPos, Zero, project_block
from stabcert.harness import (
    B_STAT_LIN,
    CSV_COLUMNS,
    LOCAL_MIN,
    M_STAT,
    PerturbSample,
    SearchConfig,
    classify_point,
    constraint_distance,
    directional_sampler,
    enumerate_branches,
    find_stationary_points,
    ratio_estimate,
    run_perturbation_study,
    start_points,
    verify_growth,
    write_csv,
    write_points_json,
)


@pytest.mark.parametrize("name, count", [("ex55", 2), ("ec3", 8), ("exC", 1), ("ex51", 2)])
def test_branch_counts(load, name, count):
    assert len(enumerate_branches(load(name).P)) == count


def test_branch_description(load):
    descs = [b.describe() for b in enumerate_branches(load("ex55").P)]
    assert descs == ["q1 <= 0; q2 <= 0; q3 == 0", "q1 <= 0; q3 <= 0; q2 == 0"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-2, 2), min_size=5, max_size=5))
def test_branches_cover_exactly_the_set(vals):
    P = DisjunctiveSet((NonPos(1), EC(), EC()))
    y = tuple(Fraction(v) for v in vals)
    in_branch = any(b.polyhedron.contains(y) for b in enumerate_branches(P))
    assert in_branch == P.contains(y)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_constraint_distance_matches_projection(vals):
    P = DisjunctiveSet((NonPos(1), Zero(1), EC()))
    y = np.array(vals)
    proj = []
    for b, a in zip(P.blocks, P.split(tuple(Fraction(v) for v in vals))):
        proj.extend(project_block(b, a))
    exact = float(np.linalg.norm(y - np.array([float(v) for v in proj])))
    assert math.isclose(constraint_distance(P, y), exact, rel_tol=1e-9, abs_tol=1e-12)


def test_start_points_include_the_reference():
    Z = start_points(np.zeros(2), SearchConfig(scattered=10))
    assert Z.shape[1] == 2 and np.any(np.all(Z == 0, axis=1))
    assert np.all(np.abs(Z) <= 1.0 + 1e-12)


def test_exB_points(load):
    prob = load("exB")
    pts = find_stationary_points(prob, [-0.1])
    assert len(pts) == 1
    assert np.allclose(pts[0].x, [0, 0.1], atol=1e-8)
    assert {M_STAT, B_STAT_LIN} <= pts[0].tags and LOCAL_MIN not in pts[0].tags
    assert find_stationary_points(prob, [0.1]) == []


def test_exC_points(load):
    pts = find_stationary_points(load("exC"), [0.04])
    near = sorted((p for p in pts if np.linalg.norm(p.x) < 0.5), key=lambda p: p.x[0])
    assert len(near) == 2
    for p, s in zip(near, (-1, 1)):
        assert np.allclose(p.x, [0.2 * s, 0.04], atol=1e-7)
        assert {M_STAT, B_STAT_LIN, LOCAL_MIN} <= p.tags
    assert all(LOCAL_MIN not in p.tags for p in pts if np.linalg.norm(p.x) >= 0.5)


def test_classify_point_multiplier(load):
    tags, lam, _ = classify_point(load("exB"), [-0.1], np.array([0.0, 0.1]))
    assert M_STAT in tags and np.allclose(lam, [-1.0, 0.0], atol=1e-8)


def test_growth_verdicts(load):
    prob = load("exC")
    ok = verify_growth(prob, 0.4, 0.5, 41)
    assert ok.is_holds and ok.payload.payload.source == "harness"
    bad = verify_growth(prob, 5.0, 0.5, 41)
    assert bad.is_fails and len(bad.payload.payload) == 2


def test_growth_holds_for_degenerate_mpec(load):
    v = verify_growth(load("ex51"), 0.2, 0.5, 41)
    assert v.is_holds and v.payload.payload.eta == 0.2


def test_growth_fails_for_concave_objective():
    from stabcert.problem import parse_problem

    text = """
[dimensions]
n = 2
m = 1
s = 1
[blocks]
free 1
[reference]
x_bar = 0 0
omega_bar = 0
q = 0
jacobian = 0 0
grad_f = 0 0
hess_f = -2 0; 0 -2
[expressions]
f = -x1^2 - x2^2
q1 = w1
"""
    assert verify_growth(parse_problem(text), 0.1, 0.5, 21).is_fails


@settings(max_examples=30, deadline=None)
@given(
    u=st.lists(st.floats(-2, 2), min_size=2, max_size=3),
    rho=st.floats(0.01, 2),
    delta=st.floats(0.01, 1.5),
)
def test_directional_sampler_stays_in_the_neighbourhood(u, rho, delta):
    u = np.array(u)
    Z = directional_sampler(u, rho, delta, count=64, seed=1)
    assert Z.shape == (64, u.size)
    nz = np.linalg.norm(Z, axis=1)
    assert np.all(nz <= rho * (1 + 1e-9))
    nu = np.linalg.norm(u)
    if nu > 0:
        gap = np.linalg.norm(nu * Z - nz[:, None] * u, axis=1)
        assert np.all(gap <= delta * nz * nu * (1 + 1e-9) + 1e-12)


def test_directional_sampler_is_deterministic():
    a = directional_sampler([1.0, 0.0], 0.5, 0.3, seed=4)
    assert np.array_equal(a, directional_sampler([1.0, 0.0], 0.5, 0.3, seed=4))
    with pytest.raises(ValueError):
        directional_sampler([1.0], 0.0, 0.3)


def _sample(t, d):
    return PerturbSample((t,), t, math.sqrt(t), t, math.sqrt(t), dist_max_local=d, dist_min=d)


def test_ratio_estimate_bounded_and_unbounded():
    taus = [0.1 * 2.0**-j for j in range(7)]
    lin = ratio_estimate([_sample(t, 0.5 * t) for t in taus], 1)
    assert lin.bounded and math.isclose(lin.sup, 0.5) and abs(lin.slope) < 1e-9
    sq = ratio_estimate([_sample(t, math.sqrt(t)) for t in taus], 1, certified=True)
    assert not sq.bounded and not sq.consistent and math.isclose(sq.slope, -0.5, abs_tol=1e-9)
    assert ratio_estimate([_sample(t, math.sqrt(t)) for t in taus], 2).bounded
    assert ratio_estimate([_sample(t, math.nan) for t in taus], 1).n_used == 0


def test_study_outputs(load, tmp_path):
    samples, est = run_perturbation_study(load("exB"), [[-0.1], [-0.05], [-0.025]], order=1)
    assert math.isclose(est.sup, 0.5, rel_tol=1e-6)
    out = tmp_path / "exB.csv"
    write_csv(samples, out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["omega1"] + list(CSV_COLUMNS)
    assert len(rows) == 4 and rows[1][CSV_COLUMNS.index("n_points") + 1] == "1"
    write_points_json(samples, tmp_path / "pts.json")
    data = json.loads((tmp_path / "pts.json").read_text())
    assert data[0]["points"][0]["tags"]
    with pytest.raises(ValueError):
        run_perturbation_study(load("exB"), [], order=1)
    with pytest.raises(ValueError):
        run_perturbation_study(load("exB"), [[-0.1]], order=3)
