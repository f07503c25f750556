import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from oracles import brute_equal_lengths
from tsi.errors import NonPositiveDeterminant, ZeroVector
from tsi.lattice import (
    bezout_minimal,
    dual_pair,
    extended_euclid,
    lattice_points,
    make_direction,
    make_lattice,
    perp,
    primitive_decompose,
    primitive_directions,
    validate_length_condition,
)

coord = st.floats(-3, 3, allow_nan=False)


@st.composite
def lattices(draw):
    e1 = np.array([draw(coord), draw(coord)])
    e2 = np.array([draw(coord), draw(coord)])
    det = e1[0] * e2[1] - e1[1] * e2[0]
    if abs(det) < 0.2 or np.linalg.norm(e1) < 0.2 or np.linalg.norm(e2) < 0.2:
        e1, e2 = np.array([1.0, 0.1]), np.array([0.3, 1.2])
    elif det < 0:
        e2 = -e2
    return make_lattice(e1, e2)


coprime = st.tuples(st.integers(-9, 9), st.integers(-9, 9)).filter(
    lambda t: t != (0, 0) and math.gcd(abs(t[0]), abs(t[1])) == 1
)


def canonical(t):
    m, n = t
    return (m, n) if m > 0 or (m == 0 and n > 0) else (-m, -n)


def test_identity_lattice():
    lat = make_lattice((1, 0), (0, 1))
    assert_allclose(lat.e1_star, [1, 0])
    assert_allclose(lat.e2_star, [0, 1])
    assert lat.delta_area == 1.0


def test_oblique_lattice_dual(oblique):
    assert_allclose(oblique.delta_area, 1.1, rtol=1e-15)
    assert_allclose(oblique.e2_star, [0, 1 / 1.1], atol=1e-15)
    assert_allclose(oblique.e1_star, [1, -0.4 / 1.1], atol=1e-15)


def test_diagonal_lattice():
    assert make_lattice((2, 0), (0, 0.5)).delta_area == 1.0


@pytest.mark.parametrize("e2", [(0, -1), (2, 0), (-1, 0)])
def test_nonpositive_determinant(e2):
    with pytest.raises(NonPositiveDeterminant):
        make_lattice((1, 0), e2)


@settings(max_examples=50, deadline=None)
@given(lattices())
def test_dual_relations(lat):
    gram = lat.basis @ lat.dual_basis.T
    assert_allclose(gram, np.eye(2), atol=1e-12)
    assert_allclose(lat.e1_star, -perp(lat.e2) / lat.delta_area, atol=1e-15)


def test_length_condition_square(identity):
    pairs = validate_length_condition(identity, 2)
    assert ((1, 0), (0, 1)) in pairs


def test_length_condition_rectangular():
    lat = make_lattice((1, 0), (0, 1.3))
    pairs = {frozenset(p) for p in validate_length_condition(lat, 2)}
    assert frozenset(((1, 1), (1, -1))) in pairs


def test_length_condition_oblique(oblique):
    assert validate_length_condition(oblique, 5) == []


def test_oblique_fails_past_radius_five(oblique):
    # |(1,-5)| = |(3,-5)| at about 5.85; the demo lattice is clean only up to 5
    pairs = {frozenset(p) for p in validate_length_condition(oblique, 6)}
    assert frozenset(((1, -5), (3, -5))) in pairs
    assert frozenset(((0, 5), (4, -5))) in pairs


@pytest.mark.parametrize("e1,e2,radius", [
    ((1, 0), (0, 1), 3.0),
    ((1, 0), (0, 1.3), 3.5),
    ((1, 0), (0.5, math.sqrt(3) / 2), 3.0),
    ((1, 0), (0.4, 1.1), 6.5),
    ((0.7, 0.2), (-0.3, 1.4), 4.0),
])
def test_length_condition_matches_enumeration(e1, e2, radius):
    lat = make_lattice(e1, e2)
    got = {frozenset(p) for p in validate_length_condition(lat, radius)}
    assert got == brute_equal_lengths(e1, e2, radius)


def test_lattice_points_complete(oblique):
    coords, vecs, lengths = lattice_points(oblique, 4.0)
    brute = {(m, n) for m in range(-12, 13) for n in range(-12, 13)
             if (m, n) != (0, 0) and np.linalg.norm(oblique.vector(m, n)) <= 4.0}
    assert {tuple(c) for c in coords} == brute
    assert np.all(np.diff(lengths) >= 0)
    assert_allclose(np.linalg.norm(vecs, axis=1), lengths)


@pytest.mark.parametrize("mn,k,prim", [((2, 4), 2, (1, 2)), ((-3, 0), 3, (1, 0)),
                                       ((6, 10), 2, (3, 5)), ((0, -7), 7, (0, 1))])
def test_primitive_decompose(identity, mn, k, prim):
    kk, d, sign = primitive_decompose(identity, *mn)
    assert kk == k
    assert d.key == prim
    assert (sign * k * d.m0, sign * k * d.n0) == mn


def test_primitive_decompose_zero(identity):
    with pytest.raises(ZeroVector):
        primitive_decompose(identity, 0, 0)


@given(st.integers(-40, 40), st.integers(-40, 40))
def test_decompose_reassembly(m, n):
    lat = make_lattice((1, 0), (0.4, 1.1))
    if (m, n) == (0, 0):
        return
    k, d, sign = primitive_decompose(lat, m, n)
    assert (sign * k * d.m0, sign * k * d.n0) == (m, n)
    assert math.gcd(abs(d.m0), abs(d.n0)) == 1


def test_make_direction_rejects_non_primitive(identity):
    with pytest.raises(ValueError):
        make_direction(identity, 2, 4)
    with pytest.raises(ValueError):
        make_direction(identity, -1, 0)
    with pytest.raises(ZeroVector):
        make_direction(identity, 0, 0)


@settings(max_examples=60, deadline=None)
@given(lattices(), coprime)
def test_direction_invariants(lat, mn):
    d = make_direction(lat, *canonical(mn))
    assert abs(d.delta @ d.d0) < 1e-12 * max(1.0, np.linalg.norm(d.d0) * np.linalg.norm(d.delta))
    assert_allclose(np.linalg.norm(perp(d.delta)), np.linalg.norm(d.d0) / lat.delta_area,
                    rtol=1e-12)


@given(st.integers(-50, 50), st.integers(-50, 50))
def test_extended_euclid(a, b):
    g, u, v = extended_euclid(a, b)
    assert g == math.gcd(a, b)
    assert a * u + b * v == g


@given(coprime)
def test_bezout_minimal(mn):
    m0, n0 = mn
    u, v = bezout_minimal(m0, n0)
    assert m0 * u + n0 * v == 1
    # no solution within a wide window has a smaller l1 norm
    best = min(abs(u + t * n0) + abs(v - t * m0) for t in range(-30, 31))
    assert abs(u) + abs(v) == best


@settings(max_examples=60, deadline=None)
@given(lattices(), coprime)
def test_dual_pair_is_dual_basis(lat, mn):
    d = make_direction(lat, *canonical(mn))
    pair = dual_pair(lat, d)
    dual = np.array([d.delta, pair.delta_prime])
    primal = np.array([pair.gamma, pair.gamma_prime])
    scale = np.linalg.norm(dual) * np.linalg.norm(primal)
    assert_allclose(dual @ primal.T, np.eye(2), atol=1e-12 * scale)
    assert_allclose(pair.gamma_prime, d.d0)


def test_dual_pair_axis_cases(identity):
    d = make_direction(identity, 1, 0)
    pair = dual_pair(identity, d)
    assert_allclose(d.delta, [0, 1])
    assert_allclose(pair.gamma @ d.delta, 1.0)
    assert_allclose(pair.gamma_prime @ d.delta, 0.0)
    d = make_direction(identity, 0, 1)
    pair = dual_pair(identity, d)
    assert_allclose(d.delta, [-1, 0])
    assert_allclose([pair.gamma @ d.delta, pair.gamma @ pair.delta_prime], [1, 0], atol=1e-15)
    d = make_direction(identity, 1, 1)
    pair = dual_pair(identity, d)
    assert_allclose(d.delta, [-1, 1])
    assert_allclose([pair.gamma @ d.delta, pair.gamma_prime @ d.delta], [1, 0], atol=1e-15)


@given(coprime, st.integers(-5, 5), st.integers(-5, 5))
def test_ray_coordinates(mn, a, b):
    lat = make_lattice((1, 0), (0.4, 1.1))
    d = make_direction(lat, *canonical(mn))
    pair = dual_pair(lat, d)
    dp = pair.delta_prime_index
    index = (a * d.delta_index[0] + b * dp[0], a * d.delta_index[1] + b * dp[1])
    assert pair.ray_coordinates(index) == (a, b)


def test_primitive_directions_cutoff_two():
    got = set(primitive_directions(2))
    assert got == {(0, 1), (1, 0), (1, 1), (1, -1), (1, 2), (2, 1), (1, -2), (2, -1)}


@pytest.mark.parametrize("cutoff", [1, 2, 3, 4])
def test_primitive_directions_cover_dual_indices(cutoff):
    rays = primitive_directions(cutoff)
    owner = {}
    for m0, n0 in rays:
        for p in range(-2 * cutoff, 2 * cutoff + 1):
            if p:
                owner.setdefault((-p * n0, p * m0), []).append((m0, n0))
    for p in range(-cutoff, cutoff + 1):
        for q in range(-cutoff, cutoff + 1):
            if (p, q) != (0, 0):
                assert len(owner[(p, q)]) == 1
