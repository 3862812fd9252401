"""Runtime identity checks on a scenario (the ``verify`` subcommand)."""
from __future__ import annotations

import numpy as np

from .dynamics import IntegratorConfig, integrate, mass_shell_residual
from .errors import NodeProximity
from .nonrel import ConditionalWaveFunction, NRWaveFunction, bohm_integrate, nr_integrate
from .spacetime import boost_matrix
from .wavefunction import GaugeTransformed, ModeSumWaveFunction, continuity_residual, polar_data


def fd_quantum_term(psi, x, h=1e-3):
    """hbar^2 box_i R / R from a 5-point central stencil on R = |psi|."""
    x = np.asarray(x, dtype=float)
    n, d = x.shape[-2:]
    R = lambda y: np.abs(psi.evaluate(y))
    R0 = R(x)
    out = np.zeros(x.shape[:-1])
    for i in range(n):
        for mu in range(d):
            e = np.zeros((n, d))
            e[i, mu] = h
            d2 = (-R(x + 2 * e) + 16 * R(x + e) - 30 * R0 + 16 * R(x - e) - R(x - 2 * e)) / (12 * h * h)
            out[..., i] += d2 if mu < d - 1 else -d2
    return psi.constants.hbar ** 2 * out / R0[..., None]


def sample_points(psi, n, seed, center=None, spread=2.0, min_rel_rho=1e-3):
    """n configurations around center whose density is well away from nodes."""
    rng = np.random.default_rng(seed)
    shape = (psi.n_particles, psi.spatial_dim + 1)
    center = np.zeros(shape) if center is None else np.asarray(center, float)
    coefs = psi.base.coefficients if isinstance(psi, GaugeTransformed) else psi.coefficients
    ref = float(np.sum(np.abs(coefs))) ** 2
    out = []
    while sum(len(o) for o in out) < n:
        X = center + rng.uniform(-spread, spread, size=(4 * n,) + shape)
        rho = np.abs(psi.evaluate(X)) ** 2
        out.append(X[rho > min_rel_rho * ref])
    return np.concatenate(out)[:n]


def _check(name, value, tol):
    return {"check": name, "value": float(value), "tolerance": float(tol), "passed": bool(value < tol)}


def relativistic_checks(sc, n_points=100):
    psi, fld = sc.wavefunction, sc.field
    c = psi.constants.c
    X = sample_points(psi, n_points, sc.seed)
    out = []
    base = psi.base if isinstance(psi, GaugeTransformed) else psi
    out.append(_check("klein_gordon", np.max(base.kg_residual(X)), 1e-10))
    out.append(_check("mass_shell", np.max(np.abs(mass_shell_residual(psi, fld, X))) / c ** 2, 1e-8))
    if psi is base and fld.is_zero:
        res, scale = continuity_residual(psi, X)
        out.append(_check("continuity", np.max(np.abs(res) / scale), 1e-10))
    q = polar_data(psi, X[: min(50, len(X))]).quantum_term
    q_fd = fd_quantum_term(psi, X[: min(50, len(X))])
    m2c2 = np.array([(p.mass * c) ** 2 for p in psi.particles])
    rel = np.abs(q - q_fd) / np.maximum(np.abs(q), 1e-6 * m2c2)
    out.append(_check("quantum_term_oracle", np.max(rel), 1e-4))
    if isinstance(psi, ModeSumWaveFunction):
        beta = 0.5
        L = boost_matrix(beta, 0, psi.spatial_dim + 1)
        a, b = psi.evaluate(X), psi.boosted(beta).evaluate(X @ L.T)
        out.append(_check("boost_scalar", np.max(np.abs(a - b)) / np.max(np.abs(a)), 1e-10))
    if isinstance(psi, GaugeTransformed) and sc.initial is not None:
        cfg = IntegratorConfig(sc.integrator.d_sigma, min(sc.integrator.n_steps, 100))
        r1 = integrate(psi, fld, sc.initial, cfg)
        r0 = integrate(base, None, sc.initial, cfg)
        out.append(_check("gauge_invariance", np.max(np.abs(r1.positions - r0.positions)), 1e-8))
    return out


def nonrelativistic_checks(sc, n_points=100):
    psi: NRWaveFunction = sc.wavefunction
    rng = np.random.default_rng(sc.seed)
    X = rng.uniform(-2, 2, size=(n_points, psi.n_particles, psi.spatial_dim))
    t = rng.uniform(-2, 2, size=(n_points, psi.n_particles))
    keep = np.abs(psi.evaluate(X, t)) ** 2 > 1e-3 * np.sum(np.abs(psi.coefficients)) ** 2
    X, t = X[keep], t[keep]
    out = [_check("schrodinger", np.max(psi.schrodinger_residual(X, t)), 1e-10)]
    hj, cont = psi.hamilton_jacobi_residuals(X, t)
    out.append(_check("hamilton_jacobi", np.max(hj), 1e-8))
    out.append(_check("nr_continuity", np.max(cont), 1e-8))
    off = sc.offsets
    if sc.initial is not None and np.ptp(off.deltas) == 0:
        cfg = IntegratorConfig(sc.integrator.d_sigma, min(sc.integrator.n_steps, 200))
        a = nr_integrate(ConditionalWaveFunction(psi, off), sc.initial, cfg)
        b = bohm_integrate(psi, sc.initial, cfg, t0=float(off.deltas[0]))
        out.append(_check("conditional_reduction", np.max(np.abs(a.positions - b.positions)), 1e-10))
    return out


def run_invariant_suite(sc, n_points=100):
    try:
        checks = (relativistic_checks(sc, n_points) if sc.kind == "relativistic"
                  else nonrelativistic_checks(sc, n_points))
    except NodeProximity as exc:
        checks = [{"check": "node_free_sampling", "value": float("nan"), "tolerance": 0.0,
                   "passed": False, "error": str(exc)}]
    return {"test": "invariants", "scenario": sc.name, "checks": checks,
            "passed": all(c["passed"] for c in checks)}
