"""Sigma-parameterised guide equations, proper time, and the classical oracle.

The guide velocity of particle i is the contravariant vector

    V^mu = eta^{mu nu} (d_nu S - (e_i/c) A_nu) / m_i,

so the spatial part is (grad S - e A/c)/m and the last component is
c dT/dsigma.  All N particles advance with one common step in sigma.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IntegrationError, NodeProximity
from .fields import EMPotential, covariant_potential, field_tensor_at, zero_field
from .spacetime import Constants, ParticleParams
from .wavefunction import gaussian_packet, polar_data

INTERVAL_TOL = 1e-9

TIMELIKE, NULL, SPACELIKE = "timelike", "null", "spacelike"


@dataclass(frozen=True)
class IntegratorConfig:
    d_sigma: float = 0.01
    n_steps: int = 100
    method: str = "rk4"
    node_policy: str = "halt"

    def __post_init__(self):
        if not self.d_sigma > 0:
            raise ConfigurationError("d_sigma must be > 0")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be >= 0")
        if self.method not in ("rk4", "euler"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.node_policy not in ("halt", "substep"):
            raise ConfigurationError(f"unknown node_policy {self.node_policy!r}")

    @property
    def span(self):
        return self.d_sigma * self.n_steps


@dataclass(frozen=True)
class TrajectoryState:
    sigma: float
    positions: np.ndarray
    proper_times: np.ndarray
    tau_valid: np.ndarray
    interval_class: tuple


@dataclass
class TrajectoryRecord:
    sigma: np.ndarray            # (S,)
    positions: np.ndarray        # (S, N, D+1)
    velocities: np.ndarray       # (S, N, D+1)
    tau: np.ndarray              # (S, N)
    tau_valid: np.ndarray        # (S, N) bool
    q_ratio: np.ndarray          # (S, N)  Q / (m^2 c^2)
    interval_class: np.ndarray   # (S, N) str
    halted: bool = False
    halt_reason: str = ""
    diagnostics: dict = field(default_factory=dict)
    c: float = 1.0               # CSV reports t = ct / c and v_t = dT/dsigma

    def __len__(self):
        return len(self.sigma)

    def state(self, i):
        return TrajectoryState(float(self.sigma[i]), self.positions[i], self.tau[i],
                               self.tau_valid[i], tuple(self.interval_class[i]))

    def csv_rows(self):
        n = self.positions.shape[1]
        d = self.positions.shape[2] - 1
        names = "xyz"[:d]
        header = (["sigma", "particle", "t"] + list(names) + ["v_t"]
                  + [f"v_{a}" for a in names] + ["tau", "tau_valid", "q_over_m2c2", "interval_class"])
        rows = [header]
        f = lambda v: format(float(v), ".17g")
        for s in range(len(self.sigma)):
            for i in range(n):
                X = self.positions[s, i]
                V = self.velocities[s, i]
                rows.append([f(self.sigma[s]), str(i), f(X[-1] / self.c)] + [f(v) for v in X[:-1]]
                            + [f(V[-1] / self.c)] + [f(v) for v in V[:-1]]
                            + [f(self.tau[s, i]), str(int(self.tau_valid[s, i])),
                               f(self.q_ratio[s, i]), str(self.interval_class[s, i])])
        return rows

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())


def _per_particle_fields(fields, n):
    if fields is None:
        return [zero_field()] * n
    if isinstance(fields, EMPotential):
        return [fields] * n
    fields = list(fields)
    if len(fields) != n:
        raise ConfigurationError(f"need {n} field entries, got {len(fields)}")
    return fields


def _flow(psi, fields, x, check=True, spatial_scale=1.0):
    """Guide velocity, Q/(m^2 c^2) and rho at configuration(s) x."""
    x = np.asarray(x, dtype=float)
    pd = polar_data(psi, x, check=check)
    c = psi.constants.c
    masses = np.array([p.mass for p in psi.particles])
    charges = np.array([p.charge for p in psi.particles])
    kin = pd.grad_S.copy()
    for i, fld in enumerate(_per_particle_fields(fields, psi.n_particles)):
        if not fld.is_zero and charges[i] != 0:
            kin[..., i, :] -= (charges[i] / c) * covariant_potential(fld, x[..., i, :])
    V = kin / masses[:, None]
    V[..., -1] *= -1.0
    if spatial_scale != 1.0:
        V[..., :-1] *= spatial_scale
    q_ratio = pd.quantum_term / (masses * c) ** 2
    return V, q_ratio, pd.rho


def guide_velocity(psi, fields, x):
    """N contravariant four-velocities (last entry c dT/dsigma) at configuration x."""
    return _flow(psi, fields, x)[0]


def mass_shell_residual(psi, fields, x):
    """V.V - (-c^2 + Q/m^2) per particle; an identity for exact solutions."""
    V, q_ratio, _ = _flow(psi, fields, x)
    c = psi.constants.c
    vv = np.sum(V[..., :-1] ** 2, axis=-1) - V[..., -1] ** 2
    return vv - (-c * c + q_ratio * c * c)


def classify_interval(q_ratio, tol=INTERVAL_TOL):
    """timelike / null / spacelike from the sign of -1 + Q/(m^2 c^2)."""
    s = np.asarray(q_ratio) - 1.0
    out = np.where(s > tol, SPACELIKE, np.where(s < -tol, TIMELIKE, NULL))
    return out


def tau_rate(q_ratio):
    """d tau / d sigma = sqrt(1 - Q/(m^2 c^2)), clipped at zero outside the light cone."""
    return np.sqrt(np.clip(1.0 - np.asarray(q_ratio), 0.0, None))


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def euler_step(f, y, h):
    return y + h * f(y)


_STEPPERS = {"rk4": rk4_step, "euler": euler_step}


def integrate(psi, fields, initial, config: IntegratorConfig, spatial_scale=1.0):
    """Advance all particles in lockstep sigma and record every step.

    The proper time of each particle is carried in the ODE state with rate
    sqrt(1 - Q/m^2 c^2); once a step sees Q/m^2 c^2 > 1 the particle's tau is
    flagged invalid for the rest of the run.
    """
    x0 = np.array(initial, dtype=float)
    n, dim = x0.shape
    step = _STEPPERS[config.method]
    h = config.d_sigma

    def rhs(y):
        X = y[: n * dim].reshape(n, dim)
        V, q, _ = _flow(psi, fields, X, spatial_scale=spatial_scale)
        rhs.max_q = np.maximum(rhs.max_q, q)
        return np.concatenate([V.ravel(), tau_rate(q)])

    rhs.max_q = np.full(n, -np.inf)

    sig, pos, vel, tau, tvalid, qr, cls = [], [], [], [], [], [], []
    valid = np.ones(n, dtype=bool)
    halted, reason, diag = False, "", {}

    def record(s, y):
        X = y[: n * dim].reshape(n, dim)
        V, q, _ = _flow(psi, fields, X, spatial_scale=spatial_scale)
        sig.append(s)
        pos.append(X.copy())
        vel.append(V)
        tau.append(y[n * dim:].copy())
        tvalid.append(valid.copy())
        qr.append(q)
        cls.append(classify_interval(q))

    y = np.concatenate([x0.ravel(), np.zeros(n)])
    record(0.0, y)  # raises NodeProximity if the start is on a node
    for k in range(config.n_steps):
        rhs.max_q = np.full(n, -np.inf)
        try:
            y_new = step(rhs, y, h)
        except NodeProximity as exc:
            if config.node_policy == "substep":
                try:
                    rhs.max_q = np.full(n, -np.inf)
                    y_new = step(rhs, step(rhs, y, h / 2), h / 2)
                except NodeProximity as exc2:
                    halted, reason, diag = True, f"node at step {k + 1}: {exc2}", {"rho": exc2.rho}
                    break
            else:
                halted, reason, diag = True, f"node at step {k + 1}: {exc}", {"rho": exc.rho}
                break
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(f"non-finite state at step {k + 1}",
                                   {"sigma": (k + 1) * h, "state": y_new.tolist()})
        valid &= ~(rhs.max_q - 1.0 > INTERVAL_TOL)
        y = y_new
        try:
            record((k + 1) * h, y)
        except NodeProximity as exc:
            halted, reason, diag = True, f"node at step {k + 1}: {exc}", {"rho": exc.rho}
            break

    return TrajectoryRecord(np.array(sig), np.array(pos), np.array(vel), np.array(tau),
                            np.array(tvalid), np.array(qr), np.array(cls),
                            halted, reason, diag, psi.constants.c)


def integrate_ensemble(psi, fields, initial, d_sigma, n_steps, spatial_scale=1.0, wrap=None):
    """RK4-advance M configurations at once.

    ``initial`` has shape (M, N, D+1).  Configurations that hit a node are
    frozen and flagged.  ``wrap`` is an optional callable applied to the
    positions after each step (used for lattice-periodic sampling boxes).
    Returns (final, halted_mask, displacement) where the displacement
    ignores the wrapping.
    """
    X = np.array(initial, dtype=float)
    disp = np.zeros_like(X)
    halted = np.zeros(X.shape[0], dtype=bool)

    def f(Y):
        V, _, rho = _flow(psi, fields, Y, check=False, spatial_scale=spatial_scale)
        bad = ~np.isfinite(V).all(axis=(-1, -2))
        f.bad |= bad
        V[bad] = 0.0
        return V

    for _ in range(n_steps):
        f.bad = np.zeros(X.shape[0], dtype=bool)
        Xn = rk4_step(f, X, d_sigma)
        halted |= f.bad
        Xn = np.where(halted[:, None, None], X, Xn)
        disp += Xn - X
        X = wrap(Xn) if wrap is not None else Xn
    return X, halted, disp


# -- classical oracle ---------------------------------------------------------

@dataclass
class ClassicalTrajectory:
    tau: np.ndarray
    positions: np.ndarray   # (S, D+1)
    velocities: np.ndarray  # (S, D+1) contravariant u, u.u = -c^2
    norm_drift: np.ndarray  # (S,) (u.u + c^2)/c^2, diagnostics only


def classical_integrate(particle: ParticleParams, field: EMPotential, x0, u0, tau_span, d_tau,
                        constants: Constants = Constants()):
    """RK4 for m du^mu/dtau = (e/c) eta^{mu a} F_{a b} u^b, dX/dtau = u."""
    c = constants.c
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    uu = np.sum(u0[:-1] ** 2) - u0[-1] ** 2
    if abs(uu + c * c) > 1e-9 * c * c:
        raise ConfigurationError(f"initial four-velocity not normalised: u.u = {uu!r}, expected {-c * c!r}")
    dim = x0.size
    qm = particle.charge / (particle.mass * c)
    signs = np.ones(dim)
    signs[-1] = -1.0

    def rhs(y):
        X, U = y[:dim], y[dim:]
        F = field_tensor_at(field, X)
        return np.concatenate([U, qm * signs * (F @ U)])

    n = int(round(tau_span / d_tau))
    ys = np.empty((n + 1, 2 * dim))
    ys[0] = np.concatenate([x0, u0])
    for k in range(n):
        ys[k + 1] = rk4_step(rhs, ys[k], d_tau)
        if not np.all(np.isfinite(ys[k + 1])):
            raise IntegrationError(f"non-finite classical state at step {k + 1}")
    U = ys[:, dim:]
    drift = (np.sum(U[:, :-1] ** 2, axis=1) - U[:, -1] ** 2 + c * c) / (c * c)
    return ClassicalTrajectory(np.arange(n + 1) * d_tau, ys[:, :dim], U, drift)


# -- classical limit ------------------------------------------------------------

@dataclass(frozen=True)
class PacketFamily:
    """Free Gaussian packet with fixed physical geometry; only hbar varies.

    The centre wavevector is momentum/hbar and the spatial width is fixed,
    so the momentum spread hbar/width shrinks with hbar.
    """

    momentum: float = 0.5
    width: float = 2.0
    n_modes: int = 41
    mass: float = 1.0
    c: float = 1.0

    def particle(self):
        return ParticleParams(self.mass, 0.0)

    def wavefunction(self, hbar):
        const = Constants(hbar=hbar, c=self.c)
        return gaussian_packet(self.momentum / hbar, self.width, self.n_modes, self.particle(), const)

    def classical_velocity(self):
        ux = self.momentum / self.mass
        return np.array([ux, math.sqrt(self.c ** 2 + ux ** 2)])


def fit_exponent(xs, ys):
    """Slope of log(y) against log(x) (least squares)."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def classical_limit_study(family: PacketFamily, hbar_values, config: IntegratorConfig):
    """Bohmian vs straight-line classical motion from the packet centre for each hbar."""
    hbar_values = [float(h) for h in hbar_values]
    if not hbar_values:
        raise ConfigurationError("hbar_values must not be empty")
    if any(b >= a for a, b in zip(hbar_values, hbar_values[1:])):
        raise ConfigurationError("hbar_values must be strictly decreasing")
    u = family.classical_velocity()
    x0 = np.zeros((1, 2))
    rows = []
    for hb in hbar_values:
        psi = family.wavefunction(hb)
        rec = integrate(psi, None, x0, config)
        classical = x0[None, 0, :] + rec.sigma[:, None] * u[None, :]
        dev = float(np.max(np.abs(rec.positions[:, 0, :] - classical)))
        rows.append({
            "hbar": hb,
            "max_position_deviation": dev,
            "max_tau_minus_sigma": float(np.max(np.abs(rec.tau[:, 0] - rec.sigma))),
            "max_q_over_m2c2": float(np.max(np.abs(rec.q_ratio[:, 0]))),
            "halted": rec.halted,
        })

    def monotone(key):
        vals = [r[key] for r in rows]
        return all(b < a for a, b in zip(vals, vals[1:]))

    report = {"scan": rows}
    if len(rows) > 1:
        report["q_exponent"] = fit_exponent(hbar_values, [r["max_q_over_m2c2"] for r in rows])
        report["tau_exponent"] = fit_exponent(hbar_values, [r["max_tau_minus_sigma"] for r in rows])
    report["monotone"] = {k: monotone(k) for k in
                          ("max_q_over_m2c2", "max_tau_minus_sigma", "max_position_deviation")}
    return report
