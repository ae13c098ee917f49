from fractions import Fraction

import pytest

from conftest import random_instances
from stabcert.cones import (
    EC,
    VC,
    ConeUnion,
    DisjunctiveSet,
    Free,
    NonPos,
    NotInSet,
    Union,
    Zero,
    active_pattern,
    block_generic,
    bruteforce_dir_normal_cone,
    coderivative_membership,
    dir_limiting_normal_cone,
    limiting_normal_cone,
    polar_of_union,
    project_polyhedron,
    regular_normal_cone,
    tangent_cone,
)
from stabcert.geometry import ConvexCone, Polyhedron, cone_equal

F = Fraction
O = F(0)


def cone(G=(), H=()):
    return ConvexCone(2, G, H)


def union(*pieces):
    return ConeUnion(2, tuple(pieces))


EC_SET = DisjunctiveSet((EC(),))
VC_SET = DisjunctiveSet((VC(),))


def test_ec_cones_at_the_corner():
    y = (O, O)
    assert tangent_cone(EC_SET, y).equals(union(cone([(1, 0)], [(0, 1)]), cone([(0, 1)], [(1, 0)])))
    assert cone_equal(regular_normal_cone(EC_SET, y), cone([(-1, 0), (0, -1)]))
    assert limiting_normal_cone(EC_SET, y).equals(
        union(cone([(-1, 0), (0, -1)]), cone(H=[(1, 0)]), cone(H=[(0, 1)]))
    )


def test_ec_cones_on_a_branch():
    y = (F(-1), O)
    assert tangent_cone(EC_SET, y).equals(union(cone(H=[(0, 1)])))
    assert limiting_normal_cone(EC_SET, y).equals(union(cone(H=[(1, 0)])))


@pytest.mark.parametrize(
    "d, expected",
    [
        ((F(-1), O), [cone(H=[(1, 0)])]),
        ((O, F(-1)), [cone(H=[(0, 1)])]),
        ((O, O), [cone([(-1, 0), (0, -1)]), cone(H=[(1, 0)]), cone(H=[(0, 1)])]),
        ((F(1), O), []),
    ],
)
def test_ec_directional_normals(d, expected):
    assert dir_limiting_normal_cone(EC_SET, (O, O), d).equals(union(*expected))


def test_vc_cones_at_the_corner():
    y = (O, O)
    T = tangent_cone(VC_SET, y)
    assert T.contains((F(1), F(-1))) and T.contains((O, F(3))) and not T.contains((F(1), F(1)))
    N = limiting_normal_cone(VC_SET, y)
    assert N.contains((F(-5), O)) and N.contains((F(5), O)) and N.contains((O, F(3)))
    assert not N.contains((F(1), F(1))) and not N.contains((O, F(-3)))


def test_nonpos_zero_free():
    P = DisjunctiveSet((NonPos(2), Zero(1), Free(1)))
    y = (O, F(-2), O, F(7))
    N = regular_normal_cone(P, y)
    assert N.contains((F(3), O, F(-4), O))
    assert not N.contains((F(-1), O, O, O))
    assert not N.contains((O, O, O, F(1)))
    assert active_pattern(P, y) is not None


@pytest.mark.parametrize("y", [(F(1), O), (F(-1), F(-1))])
def test_points_outside_raise(y):
    with pytest.raises(NotInSet):
        tangent_cone(EC_SET, y)
    with pytest.raises(NotInSet):
        limiting_normal_cone(EC_SET, y)


def test_generic_union_matches_ec_table():
    G = DisjunctiveSet((block_generic(EC()),))
    for y in [(O, O), (F(-2), O), (O, F(-1))]:
        assert tangent_cone(G, y).equals(tangent_cone(EC_SET, y))
        assert limiting_normal_cone(G, y).equals(limiting_normal_cone(EC_SET, y))


def test_union_block_two_halfplanes():
    left = Polyhedron(2, A=[(1, 0)], b=[0])
    below = Polyhedron(2, A=[(0, 1)], b=[0])
    P = DisjunctiveSet((Union([left, below]),))
    T = tangent_cone(P, (O, O))
    assert T.contains((F(-1), F(5))) and T.contains((F(5), F(-1))) and not T.contains((F(1), F(1)))
    # nonconvex corner: the regular normal cone collapses to {0}
    assert cone_equal(regular_normal_cone(P, (O, O)), cone(H=[(1, 0), (0, 1)]))


def test_coderivative_membership_uses_direction():
    J = ((F(1), O), (O, F(1)))
    # along the first ray only the second component may be nonzero
    assert coderivative_membership(J, EC_SET, (O, O), (F(-1), O), (O, O), (O, F(5)))
    assert not coderivative_membership(J, EC_SET, (O, O), (F(-1), O), (O, O), (F(5), O))
    assert coderivative_membership(J, EC_SET, (O, O), (F(-1), O), (F(-1), O), (F(5), O))


def test_projection_onto_polyhedron():
    P = Polyhedron(2, A=[(1, 1)], b=[0])
    assert project_polyhedron(P, (F(1), F(1))) == (O, O)
    assert project_polyhedron(P, (F(-3), F(1))) == (F(-3), F(1))


@pytest.mark.parametrize("P, y, d", random_instances(12, seed=3))
def test_small_property_run(P, y, d):
    T = tangent_cone(P, y)
    assert cone_equal(regular_normal_cone(P, y), polar_of_union(T.pieces, P.dim))
    Nd = dir_limiting_normal_cone(P, y, d)
    assert Nd.subset_of(limiting_normal_cone(P, y))
    assert Nd.equals(dir_limiting_normal_cone(P, y, d, method="flat"))
    assert Nd.equals(bruteforce_dir_normal_cone(P, y, d))
