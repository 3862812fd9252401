import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bohmflow import FourVector, Metric, ParticleParams, boost_matrix, lorentz_boost, minkowski_dot
from bohmflow.errors import ConfigurationError, DomainError
from bohmflow.spacetime import raise_index

finite = st.floats(-1e3, 1e3, allow_nan=False)
betas = st.floats(-0.95, 0.95)


def test_metric_signature():
    m = Metric(3)
    assert m.dim == 4
    assert np.array_equal(np.diag(m.eta), [1, 1, 1, -1])


def test_dot_of_time_unit_is_minus_one():
    t = FourVector([0.0], 1.0)
    assert minkowski_dot(t, t) == -1.0


def test_fourvector_rejects_nan():
    with pytest.raises(DomainError):
        FourVector([np.nan], 1.0)


def test_particle_needs_positive_mass():
    with pytest.raises(ConfigurationError):
        ParticleParams(0.0)


def test_boost_at_light_speed_raises():
    with pytest.raises(DomainError):
        boost_matrix(1.0)


def test_boost_rest_frame_velocity():
    # a particle at rest seen from a frame moving with +beta moves with -beta
    beta = 0.6
    u = np.array([0.0, 1.0])
    up = boost_matrix(beta) @ u
    assert up[0] / up[1] == pytest.approx(-beta)
    assert up[1] == pytest.approx(1.25)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3), betas,
       st.integers(0, 1))
def test_boost_preserves_interval(a, b, beta, axis):
    L = boost_matrix(beta, axis, 3)
    a, b = np.array(a), np.array(b)
    lhs = minkowski_dot(L @ a, L @ b)
    assert lhs == pytest.approx(minkowski_dot(a, b), rel=1e-9, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(betas, betas)
def test_collinear_boosts_compose(b1, b2):
    L = boost_matrix(b1) @ boost_matrix(b2)
    b12 = (b1 + b2) / (1 + b1 * b2)
    assert np.allclose(L, boost_matrix(b12), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), betas)
def test_boost_inverse(v, beta):
    v = np.array(v)
    back = lorentz_boost(lorentz_boost(v, beta), -beta)
    assert np.allclose(back, v, atol=1e-8 * (1 + np.abs(v).max()))


def test_boost_fourvector_roundtrip():
    v = FourVector([0.2], 1.0)
    w = lorentz_boost(v, 0.3)
    assert isinstance(w, FourVector)
    assert minkowski_dot(w, w) == pytest.approx(minkowski_dot(v, v))


def test_raise_index_flips_time():
    assert np.array_equal(raise_index(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, -3.0])


def test_unit_determinant():
    assert np.linalg.det(boost_matrix(0.5, 1, 4)) == pytest.approx(1.0)
