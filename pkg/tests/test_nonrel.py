
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from bohmflow import (ConditionalWaveFunction, IntegratorConfig, NRWaveFunction, ParticleParams,
                      ScaledModeFamily, TemporalOffsets, bohm_integrate, limit_comparison, nr_integrate,
                      plane_wave, polar_data, single_time_reduction, superposition,
                      temporal_decoupling_check)
from bohmflow.errors import ConfigurationError, ReductionNotJustified
from bohmflow.nonrel import (dT_dsigma, galilean_phase_shift, ict_identity_residual, phase_redefine)
from conftest import UNIT, away_from_nodes

coord = st.floats(-3, 3, allow_nan=False)


def nr_pair():
    p = [ParticleParams(1.0), ParticleParams(1.5)]
    return NRWaveFunction([1.0, 0.5 + 0.2j], [[[0.3], [-0.2]], [[-0.6], [0.8]]], p, UNIT)


def test_particle_at_rest_has_constant_tilde_phase():
    psi = plane_wave([0.0], ParticleParams(2.0))
    g = polar_data(psi, np.array([[0.4, 1.3]])).grad_S
    tg = phase_redefine(g, psi.particles, UNIT)
    assert tg.dt == pytest.approx(0.0, abs=1e-14)
    assert tg.spatial == pytest.approx(0.0, abs=1e-14)


def test_ict_identity(pair):
    X = away_from_nodes(pair, 20)
    g = polar_data(pair, X).grad_S
    assert np.max(ict_identity_residual(g, pair.particles, UNIT)) < 1e-12


def test_decoupling_at_rest_is_exact():
    psi = plane_wave([0.0], ParticleParams(1.0))
    rep = temporal_decoupling_check(psi, None, np.array([[[0.1, 0.2]]]), 0.0)
    assert rep["max_deviation"] == 0.0


def test_decoupling_is_second_order():
    fam = ScaledModeFamily()
    Ks = []
    for v in (0.01, 0.03, 0.1):
        psi = fam.relativistic(v)
        X = away_from_nodes(psi, 40, spread=3.0 / v)
        rep = temporal_decoupling_check(psi, None, X, v)
        assert rep["tilde_crosscheck"] < 1e-12
        Ks.append(rep["K"])
    assert max(Ks) / min(Ks) < 1.5


def test_dT_dsigma_plane_wave():
    psi = plane_wave([0.3], ParticleParams(1.0))
    assert dT_dsigma(psi, None, np.zeros((1, 2)))[0] == pytest.approx(np.sqrt(1.09))


def test_offsets():
    off = TemporalOffsets((0.0, 0.3, 0.1), epsilon_clock=0.2)
    assert off.lam == pytest.approx(0.3)
    assert not off.reducible
    with pytest.raises(ReductionNotJustified) as err:
        single_time_reduction(off)
    assert "Lambda" in str(err.value) and "eps" in str(err.value)
    red = single_time_reduction(TemporalOffsets((0.0, 0.3), 0.5))
    assert red.deltas == pytest.approx((0.15, 0.15))
    with pytest.raises(ConfigurationError):
        TemporalOffsets((0.0,), -1.0)


@settings(max_examples=40, deadline=None)
@given(coord, coord, coord, coord)
def test_schrodinger_multitime(x1, x2, t1, t2):
    psi = nr_pair()
    X, T = np.array([[x1], [x2]]), np.array([t1, t2])
    assume(abs(psi.evaluate(X, T)) > 0.1)
    assert np.max(psi.schrodinger_residual(X, T)) < 1e-12
    hj, cont = psi.hamilton_jacobi_residuals(X, T)
    assert hj.max() < 1e-9 and cont.max() < 1e-9


def test_conditional_schrodinger():
    phi = ConditionalWaveFunction(nr_pair(), TemporalOffsets((0.1, -0.4)))
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, (30, 2, 1))
    s = rng.uniform(-2, 2, 30)
    keep = np.abs(phi.evaluate(X, s)) > 0.1
    assert np.max(phi.schrodinger_residual(X[keep], s[keep])) < 1e-12


def test_galilean_phase_shift():
    m, k, v = 1.3, 0.7, 0.4
    p = [ParticleParams(m)]
    x, t = np.array([[1.1]]), np.array([0.6])
    S = k * x[0, 0] - k * k * t[0] / (2 * m)
    kp = k - m * v
    xp = x[0, 0] - v * t[0]
    Sp = kp * xp - kp * kp * t[0] / (2 * m)
    assert galilean_phase_shift(S, x, t, p, v) == pytest.approx(Sp)


def test_equal_offsets_reproduce_single_time_run():
    psi = nr_pair()
    x0 = np.array([[0.1], [0.4]])
    cfg = IntegratorConfig(0.01, 300)
    a = nr_integrate(ConditionalWaveFunction(psi, TemporalOffsets((0.25, 0.25))), x0, cfg)
    b = bohm_integrate(psi, x0, cfg, t0=0.25)
    assert np.max(np.abs(a.positions - b.positions)) < 1e-10


def test_free_gaussian_spreading():
    # k-grid weights exp(-k^2 s^2 / 2) give psi(x, 0) ~ exp(-x^2 / (2 s^2));
    # Bohmian paths of a free Gaussian scale with the width w(t) = sqrt(1 + (hbar t / m s^2)^2)
    s, m = 1.0, 1.0
    k = np.linspace(-8, 8, 321)
    psi = NRWaveFunction(np.exp(-k ** 2 * s * s / 2), k[:, None, None], [ParticleParams(m)], UNIT)
    rec = bohm_integrate(psi, np.array([[0.5]]), IntegratorConfig(0.01, 200))
    w = np.sqrt(1 + (rec.sigma / (m * s * s)) ** 2)
    assert np.max(np.abs(rec.positions[:, 0, 0] - 0.5 * w)) < 1e-8


def test_nr_product_state_factorises():
    p = ParticleParams(1.0)
    a, b = [(0.3, 1.0), (-1.2, 0.6)], [(0.8, 1.0), (0.1, 0.5j)]
    coefs = [ca * cb for _, ca in a for _, cb in b]
    K = [[[ka], [kb]] for ka, _ in a for kb, _ in b]
    pair = NRWaveFunction(coefs, K, [p, p], UNIT)
    x0 = np.array([[0.2], [-0.3]])
    cfg = IntegratorConfig(0.01, 100)
    rec = bohm_integrate(pair, x0, cfg)
    for i, modes in enumerate((a, b)):
        one = NRWaveFunction([c for _, c in modes], [[[k]] for k, _ in modes], [p], UNIT)
        r = bohm_integrate(one, x0[i:i + 1], cfg)
        assert np.allclose(rec.positions[:, i], r.positions[:, 0], atol=1e-11)


def test_nr_csv_layout():
    rec = bohm_integrate(nr_pair(), np.array([[0.1], [0.4]]), IntegratorConfig(0.01, 3))
    rows = rec.csv_rows()
    assert rows[0] == ["sigma", "particle", "x", "vx"]
    assert len(rows) == 1 + 4 * 2


def test_counterpart_shares_modes(pair):
    nr = NRWaveFunction.counterpart(pair)
    assert np.allclose(nr.k[..., 0], pair.q[..., 0])
    assert np.allclose(nr.coefficients, pair.coefficients)


def test_limit_comparison_at_rest_is_exact():
    p = ParticleParams(1.0)
    rel = superposition([[0.0]], [1.0], p)
    rep = limit_comparison(rel, NRWaveFunction.counterpart(rel), [0.2], 10.0, 100)
    assert rep["absolute_deviation"] < 1e-12


def test_limit_comparison_plane_wave():
    # both velocities are constant; the gap after time T is (hbar k/m)(1/omega~ - 1) T
    p = ParticleParams(1.0)
    k = 0.01
    rel = superposition([[k]], [1.0], p)
    rep = limit_comparison(rel, NRWaveFunction.counterpart(rel), [0.0], 100.0, 200)
    wt = np.sqrt(1 + k * k)
    assert rep["absolute_deviation"] == pytest.approx(k * (1 - 1 / wt) * 100.0, rel=1e-6)
    assert rep["max_deviation"] < 1e-4


def test_wrong_wavevector_shape():
    with pytest.raises(ConfigurationError):
        NRWaveFunction([1.0, 1.0], [[[0.1]]], [ParticleParams(1.0)], UNIT)
