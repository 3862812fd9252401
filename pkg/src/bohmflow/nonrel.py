"""Non-relativistic limit: redefined phase, temporal decoupling, conditional
wave function in sigma, and the relativistic-vs-NR comparison harness.

NR configurations are spatial only, shape ``(..., N, D)``; per-particle times
are carried separately with shape ``(..., N)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .dynamics import IntegratorConfig, _flow, fit_exponent, integrate, rk4_step, euler_step
from .errors import ConfigurationError, NodeProximity, ReductionNotJustified
from .spacetime import Constants, ParticleParams
from .wavefunction import NODE_EPS_FACTOR, superposition


@dataclass(frozen=True)
class TildeGradients:
    spatial: np.ndarray   # (..., N, D), grad S~ = grad S
    dt: np.ndarray        # (..., N), d S~ / d t^(i)


def phase_redefine(grad_S, particles, constants: Constants):
    """Gradients of S~ = S + c^2 sum_j m_j t^(j) from covariant real-metric grad S.

    ``grad_S[..., -1]`` is dS/d(ct); the time derivative is c times that.
    """
    grad_S = np.asarray(grad_S, dtype=float)
    c = constants.c
    masses = np.array([p.mass for p in particles])
    return TildeGradients(grad_S[..., :-1].copy(), c * grad_S[..., -1] + masses * c * c)


def ict_identity_residual(grad_S, particles, constants: Constants):
    """|dS/d(ict) - (i m c - (i/c) dS~/dt)| per particle (should vanish)."""
    grad_S = np.asarray(grad_S, dtype=float)
    c = constants.c
    masses = np.array([p.mass for p in particles])
    dS_dt = c * grad_S[..., -1]
    lhs = dS_dt / (1j * c)
    rhs = 1j * masses * c - (1j / c) * phase_redefine(grad_S, particles, constants).dt
    return np.abs(lhs - rhs)


def dT_dsigma(psi, fields, x):
    """c dT/dsigma / c from the guide equation, shape (..., N)."""
    V = _flow(psi, fields, x)[0]
    return V[..., -1] / psi.constants.c


def dT_dsigma_from_tilde(psi, fields, x):
    """1 - (1/mc^2) dS~/dt - (e/mc^2) phi, the same quantity via S~."""
    from .dynamics import _per_particle_fields
    from .fields import potential_at
    from .wavefunction import polar_data

    c = psi.constants.c
    pd = polar_data(psi, x)
    tg = phase_redefine(pd.grad_S, psi.particles, psi.constants)
    out = np.empty(tg.dt.shape)
    for i, (p, fld) in enumerate(zip(psi.particles, _per_particle_fields(fields, psi.n_particles))):
        phi = potential_at(fld, np.asarray(x)[..., i, :])[..., -1]
        out[..., i] = 1 - tg.dt[..., i] / (p.mass * c * c) - p.charge * phi / (p.mass * c * c)
    return out


def temporal_decoupling_check(psi, fields, points, v_over_c):
    """max |dT/dsigma - 1| over sample points and K = max_dev / (v/c)^2."""
    points = np.asarray(points, dtype=float)
    rate = dT_dsigma(psi, fields, points)
    alt = dT_dsigma_from_tilde(psi, fields, points)
    dev = float(np.max(np.abs(rate - 1.0)))
    return {
        "v_over_c": float(v_over_c),
        "max_deviation": dev,
        "K": dev / v_over_c ** 2 if v_over_c > 0 else float("nan"),
        "tilde_crosscheck": float(np.max(np.abs(rate - alt))),
    }


@dataclass
class TemporalOffsets:
    deltas: tuple
    epsilon_clock: float = 0.0

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in self.deltas)
        if self.epsilon_clock < 0:
            raise ConfigurationError("epsilon_clock must be >= 0")

    @property
    def lam(self):
        d = np.asarray(self.deltas)
        return float(d.max() - d.min()) if d.size else 0.0

    @property
    def reducible(self):
        return self.epsilon_clock > self.lam


def single_time_reduction(offsets: TemporalOffsets):
    """Replace all offsets by their mean, allowed only when eps > Lambda."""
    if not offsets.reducible:
        raise ReductionNotJustified(offsets.lam, offsets.epsilon_clock)
    mean = float(np.mean(offsets.deltas))
    return TemporalOffsets((mean,) * len(offsets.deltas), offsets.epsilon_clock)


class NRWaveFunction:
    """Multi-time Schrodinger mode sum.

    Each term is ``c_j prod_i exp(i(k_ij . x_i - (hbar k_ij^2 / 2 m_i + e_i phi_i / hbar) t_i))``,
    with phi_i an optional constant scalar potential per particle.
    """

    def __init__(self, coefficients, wavevectors, particles, constants=Constants(), potentials=None):
        self.particles = tuple(particles)
        self.constants = constants
        self.coefficients = np.asarray(coefficients, dtype=complex)
        K = np.asarray(wavevectors, dtype=float)
        if K.ndim == 2:
            K = K[..., None]
        if K.shape[:2] != (self.coefficients.size, len(self.particles)):
            raise ConfigurationError(
                f"wavevectors shape {K.shape} does not match (terms, N, D)")
        self.k = K
        self.spatial_dim = K.shape[-1]
        n = len(self.particles)
        self.potentials = np.zeros(n) if potentials is None else np.asarray(potentials, dtype=float)
        hb = constants.hbar
        m = np.array([p.mass for p in self.particles])
        e = np.array([p.charge for p in self.particles])
        self.masses, self.charges = m, e
        self.freq = hb * np.sum(K ** 2, axis=-1) / (2 * m) + e * self.potentials / hb  # (J, N)
        self.node_epsilon = NODE_EPS_FACTOR * float(np.max(np.abs(self.coefficients)) ** 2)

    @property
    def n_particles(self):
        return len(self.particles)

    @classmethod
    def counterpart(cls, rel_psi, potentials=None):
        """NR wave function with the same coefficients and wavevectors as a relativistic one."""
        K = rel_psi.q[..., :-1]
        return cls(rel_psi.coefficients, K, rel_psi.particles, rel_psi.constants, potentials)

    def _terms(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        theta = np.einsum("jnd,...nd->...j", self.k, x) - np.einsum("jn,...n->...j", self.freq, t)
        return self.coefficients * np.exp(1j * theta)

    def evaluate(self, x, t):
        return self._terms(x, t).sum(axis=-1)

    def derivatives(self, x, t):
        """psi, grad (..., N, D), laplacian (..., N), d/dt_i (..., N)."""
        tv = self._terms(x, t)
        psi = tv.sum(axis=-1)
        grad = 1j * np.einsum("...j,jnd->...nd", tv, self.k)
        lap = -np.einsum("...j,jn->...n", tv, np.sum(self.k ** 2, axis=-1))
        dt = -1j * np.einsum("...j,jn->...n", tv, self.freq)
        return psi, grad, lap, dt

    def schrodinger_residual(self, x, t):
        """|i hbar d_t psi + hbar^2/2m lap psi - e phi psi| / (hbar * sum|c_j freq| ) per particle."""
        hb = self.constants.hbar
        psi, grad, lap, dt = self.derivatives(x, t)
        res = 1j * hb * dt + hb * hb / (2 * self.masses) * lap - self.charges * self.potentials * psi[..., None]
        scale = hb * np.sum(np.abs(self.coefficients)[:, None] * (np.abs(self.freq) + hb * np.sum(self.k ** 2, -1) / (2 * self.masses)), axis=0)
        return np.abs(res) / np.maximum(scale, 1e-300)

    def hamilton_jacobi_residuals(self, x, t):
        """Residuals of the NR Hamilton-Jacobi and continuity equations in R, S~.

        HJ:   |grad S~|^2 + 2m (dS~/dt + e phi) - hbar^2 lap R / R
        cont: div(R^2 grad S~ / m) + d_t R^2
        Both relative to the size of their largest term.
        """
        hb = self.constants.hbar
        psi, grad, lap, dt = self.derivatives(x, t)
        d1 = grad / psi[..., None, None]
        im = d1.imag
        gS = hb * im
        dtS = hb * (dt / psi[..., None]).imag
        lapR_R = (lap / psi[..., None]).real + np.sum(im ** 2, axis=-1)
        m = self.masses
        a = np.sum(gS ** 2, axis=-1)
        b = 2 * m * (dtS + self.charges * self.potentials)
        q = hb * hb * lapR_R
        hj = np.abs(a + b - q) / np.maximum.reduce([np.abs(a), np.abs(b), np.abs(q), np.full_like(a, 1e-300)])
        div = hb / m * (np.conj(psi)[..., None] * lap).imag
        ddt = 2 * (np.conj(psi)[..., None] * dt).real
        cont = np.abs(div + ddt) / np.maximum(np.maximum(np.abs(div), np.abs(ddt)), 1e-300)
        return hj, cont


def galilean_phase_shift(S_tilde, x, t, particles, v, axis=0):
    """S~' = S~ - sum_j (m_j v x_j - m_j v^2 t_j / 2) for a frame moving with v along axis."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    m = np.array([p.mass for p in particles])
    return S_tilde - np.sum(m * v * x[..., axis] - 0.5 * m * v * v * t, axis=-1)


class ConditionalWaveFunction:
    """phi(x, sigma) = psi(x_1, sigma + delta_1, ..., x_N, sigma + delta_N)."""

    def __init__(self, nr_psi: NRWaveFunction, offsets: TemporalOffsets):
        if len(offsets.deltas) != nr_psi.n_particles:
            raise ConfigurationError("need one temporal offset per particle")
        self.psi = nr_psi
        self.offsets = offsets
        self._d = np.asarray(offsets.deltas)

    @property
    def particles(self):
        return self.psi.particles

    @property
    def constants(self):
        return self.psi.constants

    @property
    def node_epsilon(self):
        return self.psi.node_epsilon

    def times(self, sigma):
        return np.asarray(sigma, dtype=float)[..., None] + self._d

    def evaluate(self, x, sigma):
        return self.psi.evaluate(x, self.times(sigma))

    def derivatives(self, x, sigma):
        """phi, grad, laplacian per particle, and d phi / d sigma (chain rule sum)."""
        psi, grad, lap, dt = self.psi.derivatives(x, self.times(sigma))
        return psi, grad, lap, dt.sum(axis=-1)

    def schrodinger_residual(self, x, sigma):
        """|i hbar d_sigma phi + sum hbar^2/2m lap phi - V phi| relative to the term scale."""
        hb = self.constants.hbar
        p = self.psi
        phi, grad, lap, ds = self.derivatives(x, sigma)
        V = np.sum(p.charges * p.potentials)
        kin = np.sum(hb * hb / (2 * p.masses) * lap, axis=-1)
        res = 1j * hb * ds + kin - V * phi
        scale = hb * np.sum(np.abs(p.coefficients) * np.sum(np.abs(p.freq) + hb * np.sum(p.k ** 2, -1) / (2 * p.masses), axis=-1))
        return np.abs(res) / scale

    def velocity(self, x, sigma, check=True):
        """dX/dsigma = grad S~ / m = (hbar/m) Im(grad phi / phi)."""
        phi, grad, _, _ = self.derivatives(x, sigma)
        rho = np.abs(phi) ** 2
        if check and np.any(rho <= self.node_epsilon):
            raise NodeProximity("conditional wave function node", particle=tuple(range(self.psi.n_particles)),
                                rho=float(np.min(rho)))
        return self.constants.hbar * (grad / phi[..., None, None]).imag / self.psi.masses[:, None]


def conditional_wavefunction(nr_psi, offsets):
    return ConditionalWaveFunction(nr_psi, offsets)


@dataclass
class NRTrajectoryRecord:
    sigma: np.ndarray
    positions: np.ndarray   # (S, N, D)
    velocities: np.ndarray  # (S, N, D)
    halted: bool = False
    halt_reason: str = ""

    def csv_rows(self):
        n, d = self.positions.shape[1:]
        names = "xyz"[:d]
        f = lambda v: format(float(v), ".17g")
        rows = [["sigma", "particle"] + list(names) + [f"v{a}" for a in names]]
        for s in range(len(self.sigma)):
            for i in range(n):
                rows.append([f(self.sigma[s]), str(i)] + [f(v) for v in self.positions[s, i]]
                            + [f(v) for v in self.velocities[s, i]])
        return rows

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())


def _nr_run(vel, initial, config, sigma0=0.0):
    step = {"rk4": rk4_step, "euler": euler_step}[config.method]
    X = np.array(initial, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    h = config.d_sigma
    sig, pos, vs = [], [], []
    halted, reason = False, ""

    # state vector carries sigma as its last entry so RK4 stage times match exactly
    def rhs(y):
        return np.concatenate([vel(y[:-1].reshape(n, d), y[-1]).ravel(), [1.0]])

    y = np.concatenate([X.ravel(), [sigma0]])
    for k in range(config.n_steps + 1):
        try:
            v = vel(y[:-1].reshape(n, d), y[-1])
        except NodeProximity as exc:
            halted, reason = True, str(exc)
            break
        sig.append(y[-1])
        pos.append(y[:-1].reshape(n, d).copy())
        vs.append(v)
        if k == config.n_steps:
            break
        try:
            y = step(rhs, y, h)
        except NodeProximity as exc:
            halted, reason = True, str(exc)
            break
    return NRTrajectoryRecord(np.array(sig), np.array(pos), np.array(vs), halted, reason)


def nr_integrate(phi: ConditionalWaveFunction, initial, config: IntegratorConfig, sigma0=0.0):
    """Integrate dX/dsigma = grad S~ / m with the conditional wave function."""
    return _nr_run(phi.velocity, initial, config, sigma0)


def bohm_integrate(nr_psi: NRWaveFunction, initial, config: IntegratorConfig, t0=0.0):
    """Ordinary single-time Bohmian integration in frame time t (all t_i = t)."""
    hb = nr_psi.constants.hbar
    n = nr_psi.n_particles

    def vel(x, t):
        tt = np.full(n, 0.0) + t
        psi, grad, _, _ = nr_psi.derivatives(x, tt)
        if abs(psi) ** 2 <= nr_psi.node_epsilon:
            raise NodeProximity("node", particle=tuple(range(n)), rho=float(abs(psi) ** 2))
        return hb * (grad / psi).imag / nr_psi.masses[:, None]

    return _nr_run(vel, initial, config, t0)


# -- relativistic vs NR ----------------------------------------------------------

@dataclass(frozen=True)
class ScaledModeFamily:
    """Single-particle 1+1D superposition whose wavevectors scale with v/c.

    k_j = (v/c) kappa_j m c / hbar.  The sigma span scales as (c/v)^2 so the
    NR dynamics is self-similar across v/c and only relativistic corrections
    change.
    """

    kappas: tuple = (1.0, 2.0)
    coefficients: tuple = (1.0, 0.5)
    mass: float = 1.0
    hbar: float = 1.0
    c: float = 1.0
    span: float = 4.0      # in units hbar/(m c^2) * (c/v)^2
    n_steps: int = 2000
    x0: float = 0.3        # in units hbar/(m c) * (c/v)

    def particle(self):
        return ParticleParams(self.mass, 0.0)

    def constants(self):
        return Constants(self.hbar, self.c)

    def relativistic(self, v_over_c):
        kc = self.mass * self.c / self.hbar
        ks = [[v_over_c * kap * kc] for kap in self.kappas]
        return superposition(ks, list(self.coefficients), self.particle(), self.constants())

    def sigma_span(self, v_over_c):
        return self.span * self.hbar / (self.mass * self.c ** 2) / v_over_c ** 2

    def start(self, v_over_c):
        return self.x0 * self.hbar / (self.mass * self.c) / v_over_c


def limit_comparison(rel_psi, nr_psi, x0, sigma_span, n_steps):
    """Integrate both systems from matching starts and compare at equal frame time.

    The relativistic trajectory is read at T = sigma (spline in T); the
    deviation is reported relative to the NR spatial excursion.
    """
    cfg = IntegratorConfig(sigma_span / n_steps, n_steps)
    nr = nr_integrate(ConditionalWaveFunction(nr_psi, TemporalOffsets((0.0,) * nr_psi.n_particles)),
                      np.atleast_2d(x0), cfg)
    # run a little longer so T(sigma) covers the NR span
    rel_cfg = IntegratorConfig(cfg.d_sigma, int(math.ceil(n_steps * 1.1)))
    start = np.zeros((nr_psi.n_particles, nr_psi.spatial_dim + 1))
    start[:, :-1] = np.atleast_2d(x0)
    rel = integrate(rel_psi, None, start, rel_cfg)
    c = rel_psi.constants.c
    T = rel.positions[:, 0, -1] / c
    x_rel = CubicSpline(T, rel.positions[:, 0, 0])(nr.sigma)
    x_nr = nr.positions[:, 0, 0]
    excursion = float(np.max(np.abs(x_nr - x_nr[0])))
    dev = float(np.max(np.abs(x_rel - x_nr)))
    dT = np.abs(rel.velocities[:, 0, -1] / c - 1.0)
    return {
        "max_deviation": dev / excursion if excursion > 0 else dev,
        "absolute_deviation": dev,
        "max_dT_dsigma_minus_1": float(np.max(dT)),
        "halted": bool(rel.halted or nr.halted),
    }


def nr_limit_study(family: ScaledModeFamily, v_over_c_values):
    vs = [float(v) for v in v_over_c_values]
    if not vs:
        raise ConfigurationError("v_over_c scan must not be empty")
    rows = []
    for v in vs:
        rel = family.relativistic(v)
        nr = NRWaveFunction.counterpart(rel)
        r = limit_comparison(rel, nr, [family.start(v)], family.sigma_span(v), family.n_steps)
        r["v_over_c"] = v
        rows.append(r)
    report = {"scan": rows}
    if len(vs) > 1:
        report["scaling_exponent"] = fit_exponent(vs, [r["max_deviation"] for r in rows])
        report["dT_exponent"] = fit_exponent(vs, [r["max_dT_dsigma_minus_1"] for r in rows])
    return report
