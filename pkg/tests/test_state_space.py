import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dichotomy.state_space import (BundleState, TorusPoint, UnitVector, random_bundle_state, renormalize,
                                   tangent_project, wrap, wrap_array)

TWO_PI = 2 * math.pi
angles = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(
    lambda u: np.linalg.norm(u) > 1e-3)


def test_wrap_examples():
    assert wrap(TWO_PI + 0.5) == pytest.approx(0.5, abs=1e-15)
    assert wrap(-0.5) == pytest.approx(TWO_PI - 0.5, abs=1e-15)
    assert wrap(0.0) == 0.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_wrap_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        wrap(bad)


@given(angles)
def test_wrap_range_and_idempotent(a):
    w = wrap(a)
    assert 0.0 <= w < TWO_PI
    assert wrap(w) == w
    assert math.isclose(math.remainder(w - a, TWO_PI), 0.0, abs_tol=1e-9 * max(1.0, abs(a)))


def test_wrap_array_matches_scalar():
    a = np.array([-7.0, -0.1, 0.0, 3.0, 6.3, 100.0])
    assert np.array_equal(wrap_array(a), [wrap(x) for x in a])


def test_torus_point_wraps_and_checks_dimension():
    p = TorusPoint((7.0, -1.0, 0.0))
    assert all(0 <= c < TWO_PI for c in p.coords)
    assert p.dim == 3
    with pytest.raises(ValueError):
        TorusPoint((1.0,))


def test_tangent_project_examples():
    assert np.allclose(tangent_project((0, 0, 1), (0, 0, 1)), (0, 0, 0))
    assert np.allclose(tangent_project((0, 0, 1), (0, 1, 0)), (0, 1, 0))
    s = math.sqrt(2) / 2
    assert np.allclose(tangent_project((s, 0, s), (1, 0, 0)), (0.5, 0, -0.5), atol=1e-15)
    with pytest.raises(ValueError):
        tangent_project((1, 0, 0), (1, 0))


@given(vec3, vec3, vec3)
def test_tangent_project_idempotent_self_adjoint(v, u, w):
    v = renormalize(v).array()
    Pu = tangent_project(v, u)
    assert abs(np.dot(Pu, v)) < 1e-12 * max(1.0, np.linalg.norm(u))
    assert np.allclose(tangent_project(v, Pu), Pu, atol=1e-12 * max(1.0, np.linalg.norm(u)))
    lhs = np.dot(Pu, w)
    rhs = np.dot(u, tangent_project(v, w))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, np.linalg.norm(u) * np.linalg.norm(w))


def test_renormalize_examples():
    assert np.allclose(renormalize((2, 0, 0)).array(), (1, 0, 0))
    assert np.allclose(renormalize((1, 1, 1)).array(), np.ones(3) / math.sqrt(3))
    assert np.allclose(renormalize((0, 3, 4)).array(), (0, 0.6, 0.8))
    with pytest.raises(ValueError):
        renormalize((0, 0, 0))


@given(vec3)
def test_renormalize_unit_and_idempotent(u):
    r = renormalize(u).array()
    assert abs(np.linalg.norm(r) - 1) < 1e-12
    assert np.allclose(renormalize(r).array(), r, atol=1e-12)
    assert np.dot(r, u) > 0


def test_unit_vector_and_bundle_state():
    assert abs(np.linalg.norm(UnitVector((3.0, 4.0)).array()) - 1) < 1e-12
    with pytest.raises(ValueError):
        BundleState(TorusPoint((0.0, 0.0)), UnitVector((1.0, 0.0, 0.0)))
    w = BundleState.from_arrays((1.0, 2.0, 3.0), (0.0, 0.0, 2.0))
    assert w.dim == 3 and np.allclose(w.array(), [1, 2, 3, 0, 0, 1])


def test_random_bundle_state_exclusion(rng):
    for _ in range(200):
        w = random_bundle_state(rng, 3, exclusion=0.1)
        assert abs(w.v.comps[2]) <= 0.9
