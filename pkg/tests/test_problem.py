import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_path
from stabcert.problem import (
    DomainError,
    ExprSyntaxError,
    ProblemError,
    error_measures,
    eval_expr,
    eval_qf,
    evaluate,
    load_problem,
    parse_expr,
    parse_problem,
)

MINIMAL = """
[dimensions]
n = 2
m = 2
s = 1
[blocks]
ec
[reference]
x_bar = 0 0
omega_bar = 0
q = 0 0
jacobian = -1 0; 0 -1
grad_f = 1 1
[expressions]
f = x1 + x2
q1 = -x1
q2 = -x2 + w1
"""


def test_minimal_problem_parses():
    p = parse_problem(MINIMAL)
    assert p.ref.n == 2 and p.ref.m == 2 and p.layout == ""
    assert eval_qf(p, [1.0, 2.0], [0.5])["q"].tolist() == [-1.0, -1.5]


@pytest.mark.parametrize("name", ["ec3", "ex51", "ex52", "ex53", "ex54", "ex55", "exB", "exC"])
def test_fixtures_load_consistently(name):
    p = load_problem(fixture_path(name))
    assert p.P.dim == p.ref.m
    assert p.name == name


@pytest.mark.parametrize(
    "text, fragment",
    [
        (MINIMAL.replace("[blocks]\nec", "[blocks]\nnonpos 3"), "total dimension"),
        (MINIMAL.replace("q = 0 0", "q = 0 0 0"), "length"),
        (MINIMAL.replace("jacobian = -1 0; 0 -1", "jacobian = -1 0; 0"), "ragged"),
        (MINIMAL.replace("q2 = -x2 + w1", "q2 = -x3"), "out of range"),
        (MINIMAL.replace("q2 = -x2 + w1", "q2 = -x2 +"), "unexpected"),
        (MINIMAL.replace("q2 = -x2 + w1", "q2 = foo(x1)"), "unknown name"),
        (MINIMAL.replace("[blocks]\nec", "[blocks]\nblob"), "unknown block"),
        (MINIMAL.replace("grad_f = 1 1", "grad_f = 1 2"), "gradient"),
        (MINIMAL.replace("q2 = -x2 + w1", "q3 = -x2"), "out of range"),
        (MINIMAL.replace("[reference]", "[reference]\nq = 1 1"), "duplicate key"),
        ("x = 1\n" + MINIMAL, "before the first section"),
        (MINIMAL.replace("[dimensions]\nn = 2", "[dimensions]\nn = two"), "integer"),
    ],
)
def test_parser_errors(text, fragment):
    with pytest.raises(ProblemError, match=fragment):
        parse_problem(text)


def test_syntax_error_carries_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse_problem(MINIMAL.replace("q2 = -x2 + w1", "q2 = -x2 + )"))
    assert info.value.line > 0 and info.value.col > 0


def test_domain_error_names_subexpression():
    e = parse_expr("log(x1 - 1)", 1, 0)
    with pytest.raises(DomainError, match="log"):
        eval_expr(e, np.array([[0.5]]), [], 1)
    r = eval_expr(e, np.array([[0.5]]), [], 1, strict=False)
    assert not np.isfinite(r.v[0])


EXPRS = [
    "x1^3 * x2 - 2*x2^2",
    "sin(x1) * cos(x2) + exp(0.3*x1)",
    "sqrt(x1^2 + 1) / (2 + x2^2)",
    "(x1 + 2)^x2",
    "w1 * x1^6 * (1 - cos(1/x1))",
    "abs(x2 - 5) + log(3 + x1)",
]


@pytest.mark.parametrize("src", EXPRS)
@settings(max_examples=25, deadline=None)
@given(x=st.lists(st.floats(0.3, 1.5), min_size=2, max_size=2), w=st.floats(-1, 1))
def test_jet_matches_finite_differences(src, x, w):
    e = parse_expr(src, 2, 1)
    X = np.array([x])
    r = eval_expr(e, X, [w], 2)
    h = 1e-5
    for i in range(2):
        dx = np.zeros(2)
        dx[i] = h
        up = eval_expr(e, X + dx, [w], 2)
        dn = eval_expr(e, X - dx, [w], 2)
        assert np.isclose(r.g[0, i], (up.v[0] - dn.v[0]) / (2 * h), rtol=1e-5, atol=1e-6)
        assert np.allclose(r.H[0, i], (up.g[0] - dn.g[0]) / (2 * h), rtol=1e-4, atol=1e-5)


def test_ifzero_selects_branch_per_row():
    e = parse_expr("ifzero(x1, 7, 1/x1)", 1, 0)
    r = eval_expr(e, np.array([[0.0], [2.0]]), [], 1)
    assert r.v.tolist() == [7.0, 0.5]


def test_evaluate_is_batched():
    p = load_problem(fixture_path("exC"))
    ev = evaluate(p, np.array([[0.0, 0.0], [1.0, 2.0]]), [0.1])
    assert ev.q.shape == (2, 2) and ev.Jq.shape == (2, 2, 2) and ev.Hq.shape == (2, 2, 2, 2)
    assert np.allclose(ev.f, [0.0, -3.0])


@settings(max_examples=40, deadline=None)
@given(w=st.floats(-0.9, 0.9).filter(lambda v: v != 0))
def test_error_measures_order(w):
    p = load_problem(fixture_path("exC"))
    em = error_measures(p, [w])
    # |Δq| < 1 here, so the square root dominates
    assert em["e2"] >= em["e1"] - 1e-15
    assert em["tau1"] >= em["e1"] and em["tau2"] >= em["e2"]
    assert np.isclose(em["e1"], abs(w)) and np.isclose(em["e2"], np.sqrt(abs(w)))


def test_error_measures_norm_choice():
    p = load_problem(fixture_path("exB"))
    with pytest.raises(ValueError):
        error_measures(p, [0.1], norm="max")
    em = error_measures(p, [0.1], norm="frobenius")
    assert np.isclose(em["tau1"], 0.2)
