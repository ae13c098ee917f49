from fractions import Fraction

import pytest

from stabcert.cq import (
    check_dir_first_order,
    check_dir_subregularity,
    check_foscms,
    check_metric_regularity,
    check_soscms,
    cq_report,
    direction_cells,
    find_feasibility_direction,
    in_lin_cone,
    verify_second_order_witness,
)
from stabcert.geometry import mat_vec, transpose

F = Fraction

# (metric regularity, FOSCMS, SOSCMS) per fixture
TABLE = {
    "ec3": ("holds", "holds", "holds"),
    "ex51": ("fails", "holds", "holds"),
    "ex52": ("holds", "holds", "holds"),
    "ex53": ("holds", "holds", "holds"),
    "ex54": ("fails", "fails", "holds"),
    "ex55": ("holds", "holds", "holds"),
    "exB": ("holds", "holds", "holds"),
    "exC": ("fails", "fails", "holds"),
}


@pytest.mark.parametrize("name", sorted(TABLE))
def test_fixture_verdicts(load, name):
    ref = load(name).ref
    rep = cq_report(ref)
    got = (rep.metric_regularity.status.value, rep.foscms.status.value, rep.soscms.status.value)
    assert got == TABLE[name]
    # R1 follows the first-order verdict, R2 the second-order one
    assert rep.r1.is_holds == rep.foscms.is_holds
    assert rep.r2.is_holds == rep.soscms.is_holds


def _jt_lambda_zero(ref, lam):
    return all(v == 0 for v in mat_vec(transpose(ref.J, ref.n), lam))


@pytest.mark.parametrize("name", ["ex51", "exC", "ex54"])
def test_metric_regularity_witness_is_a_null_multiplier(load, name):
    ref = load(name).ref
    v = check_metric_regularity(ref)
    lam = v.payload.payload[0]
    assert any(x != 0 for x in lam) and _jt_lambda_zero(ref, lam)


def test_foscms_witness_for_holder_example(load):
    ref = load("exC").ref
    v = check_foscms(ref)
    u, lam = v.payload.payload
    assert in_lin_cone(ref, u) and any(x != 0 for x in u)
    assert _jt_lambda_zero(ref, lam) and any(x != 0 for x in lam)
    assert check_dir_first_order(ref, u).is_fails


def test_soscms_route_and_second_order_witness(load):
    ref = load("exC").ref
    v = check_soscms(ref)
    assert v.is_holds and v.route == "generators"
    u, lam = check_foscms(ref).payload.payload
    # the curvature term of q2 rules this multiplier out as a second-order witness
    assert not verify_second_order_witness(ref, u, lam)


def test_direction_cells_are_in_the_linearized_cone(load):
    for name in ("ex51", "ex55", "ec3", "exC"):
        ref = load(name).ref
        for cell in direction_cells(ref):
            assert in_lin_cone(ref, cell.point)
            assert cell.closure().contains(cell.point)


def test_linearized_cone_of_ex51_is_a_ray(load):
    cells = direction_cells(load("ex51").ref)
    assert [c.point for c in cells] == [(F(0), F(1))]


def test_directional_subregularity_on_regular_problem(load):
    ref = load("ex55").ref
    u = direction_cells(ref)[0].point
    assert check_dir_subregularity(ref, u).is_holds


def test_feasibility_direction(load):
    u, v = find_feasibility_direction(load("ex55").ref)
    assert v.is_holds and u is not None
    u, v = find_feasibility_direction(load("ex51").ref)
    assert v.is_holds and u == (F(0), F(1))
