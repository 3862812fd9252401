"""Exact multi-time Klein-Gordon wave functions built from plane-wave products.

A wave function is a finite sum of terms ``c_j * prod_i exp(i q_ij . x_i)``
where, for particle i in term j, the covector ``q = (k, -omega/c)`` is taken
on the mass shell ``hbar^2 (omega^2/c^2 - |k|^2) = m^2 c^2``.  Because each
factor is an exact solution of the free Klein-Gordon equation, so is the sum,
and all derivatives are available in closed form.

Configurations are arrays of shape ``(..., N, D + 1)`` with ``ct`` last.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NodeProximity
from .spacetime import Constants, ParticleParams, boost_matrix

NODE_EPS_FACTOR = 1e-12


def mass_shell_omega(k, particle: ParticleParams, constants: Constants, branch: int = 1):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    kc = particle.mass * constants.c / constants.hbar
    return branch * constants.c * np.sqrt(kc * kc + k @ k)


@dataclass(frozen=True)
class PlaneWaveMode:
    wavevector: tuple
    omega: float
    branch: int = 1

    @classmethod
    def on_shell(cls, k, particle, constants, branch=1):
        if branch not in (1, -1):
            raise ConfigurationError(f"branch must be +1 or -1, got {branch}")
        k = tuple(float(v) for v in np.atleast_1d(k))
        return cls(k, float(mass_shell_omega(k, particle, constants, branch)), branch)

    def covector(self, c):
        return np.array(list(self.wavevector) + [-self.omega / c])

    def shell_residual(self, particle, constants):
        k = np.asarray(self.wavevector)
        hb, c, m = constants.hbar, constants.c, particle.mass
        lhs = hb * hb * (self.omega ** 2 / c ** 2 - k @ k)
        return (lhs - (m * c) ** 2) / (m * c) ** 2


@dataclass(frozen=True)
class ProductTerm:
    coefficient: complex
    modes: tuple


@dataclass(frozen=True)
class PolarData:
    rho: np.ndarray
    grad_S: np.ndarray          # (..., N, D+1), covariant d S / d x^mu, last entry d/d(ct)
    quantum_term: np.ndarray    # (..., N), hbar^2 box R / R


class ModeSumWaveFunction:
    """Finite superposition of on-shell plane-wave product terms.

    Parameters
    ----------
    terms : sequence of ProductTerm
        Each term carries one PlaneWaveMode per particle.
    particles : sequence of ParticleParams
    constants : Constants
    """

    def __init__(self, terms, particles, constants=Constants()):
        terms = tuple(terms)
        particles = tuple(particles)
        if not terms:
            raise ConfigurationError("wave function needs at least one term")
        if not particles:
            raise ConfigurationError("wave function needs at least one particle")
        dims = {len(m.wavevector) for t in terms for m in t.modes}
        if len(dims) != 1:
            raise ConfigurationError(f"inconsistent spatial dimensions in modes: {sorted(dims)}")
        for j, t in enumerate(terms):
            if len(t.modes) != len(particles):
                raise ConfigurationError(
                    f"term {j} has {len(t.modes)} modes for {len(particles)} particles")
            for i, mode in enumerate(t.modes):
                r = mode.shell_residual(particles[i], constants)
                if abs(r) > 1e-12:
                    raise ConfigurationError(
                        f"term {j}, particle {i}: mode off the mass shell (rel. residual {r:.3e})")
        self.terms = terms
        self.particles = particles
        self.constants = constants
        self.spatial_dim = dims.pop()
        self.coefficients = np.array([complex(t.coefficient) for t in terms])
        c = constants.c
        # q[j, i, :] = (k, -omega/c)
        self.q = np.array([[m.covector(c) for m in t.modes] for t in terms])
        self.node_epsilon = NODE_EPS_FACTOR * float(np.max(np.abs(self.coefficients)) ** 2)

    @property
    def n_particles(self):
        return len(self.particles)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (self.n_particles, self.spatial_dim + 1):
            raise ConfigurationError(
                f"configuration shape {x.shape[-2:]} does not match "
                f"(N={self.n_particles}, D+1={self.spatial_dim + 1})")
        return x

    def _term_values(self, x):
        theta = np.einsum("jnd,...nd->...j", self.q, x)
        return self.coefficients * np.exp(1j * theta)

    def evaluate(self, x):
        x = self._check(x)
        return self._term_values(x).sum(axis=-1)

    def derivatives(self, x):
        """psi, first derivatives (..., N, D+1) and box_i psi (..., N), all exact."""
        x = self._check(x)
        tv = self._term_values(x)
        psi = tv.sum(axis=-1)
        dpsi = 1j * np.einsum("...j,jnd->...nd", tv, self.q)
        qq = np.sum(self.q[..., :-1] ** 2, axis=-1) - self.q[..., -1] ** 2  # (J, N)
        box = -np.einsum("...j,jn->...n", tv, qq)
        return psi, dpsi, box

    def log_derivatives(self, x):
        psi, dpsi, box = self.derivatives(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return psi, dpsi / psi[..., None, None], box / psi[..., None]

    def boosted(self, beta, axis=0):
        """Same state described in a frame moving with velocity beta*c along axis."""
        c = self.constants.c
        L = boost_matrix(beta, axis, self.spatial_dim + 1)
        terms = []
        for t in self.terms:
            modes = []
            for m in t.modes:
                p = np.array(list(m.wavevector) + [m.omega / c])
                pb = L @ p
                modes.append(PlaneWaveMode(tuple(pb[:-1]), float(pb[-1] * c), m.branch))
            terms.append(ProductTerm(t.coefficient, tuple(modes)))
        return ModeSumWaveFunction(terms, self.particles, self.constants)

    def kg_residual(self, x):
        """|hbar^2 box_i psi - m_i^2 c^2 psi| / (m_i^2 c^2 |psi|) per particle."""
        psi, _, box = self.derivatives(x)
        hb, c = self.constants.hbar, self.constants.c
        m2c2 = np.array([p.mass ** 2 for p in self.particles]) * c * c
        res = hb * hb * box - m2c2 * psi[..., None]
        return np.abs(res) / (m2c2 * np.abs(psi)[..., None])

    def __repr__(self):
        return (f"ModeSumWaveFunction(terms={len(self.terms)}, N={self.n_particles}, "
                f"D={self.spatial_dim})")


class GaugeTransformed:
    """psi multiplied by prod_i exp(i e_i chi(x_i) / (hbar c)).

    Paired with the potential A + d chi this describes the same physics as
    the untransformed wave function with A.
    """

    def __init__(self, base, chi):
        self.base = base
        self.chi = chi
        self.particles = base.particles
        self.constants = base.constants
        self.spatial_dim = base.spatial_dim
        self.node_epsilon = base.node_epsilon
        hb, c = self.constants.hbar, self.constants.c
        self._g = np.array([p.charge for p in self.particles]) / (hb * c)

    @property
    def n_particles(self):
        return self.base.n_particles

    def _phase(self, x):
        return np.exp(1j * np.sum(self._g * self.chi(x), axis=-1))

    def evaluate(self, x):
        return self.base.evaluate(x) * self._phase(np.asarray(x, dtype=float))

    def log_derivatives(self, x):
        x = np.asarray(x, dtype=float)
        psi, d1, box = self.base.log_derivatives(x)
        g = self._g[:, None]
        dchi = self.chi.grad(x)
        a = 1j * g * dchi
        inner = lambda u, v: np.sum(u[..., :-1] * v[..., :-1], axis=-1) - u[..., -1] * v[..., -1]
        box2 = (box + 2 * inner(a, d1) + 1j * self._g * self.chi.dalembert(x)
                + inner(a, a))
        return psi * self._phase(x), d1 + a, box2

    def derivatives(self, x):
        psi, d1, box = self.log_derivatives(x)
        return psi, d1 * psi[..., None, None], box * psi[..., None]


def gauge_transform(psi, chi):
    if chi is None:
        return psi
    return GaugeTransformed(psi, chi)


def polar_data(psi, x, check=True):
    """rho, covariant phase gradient and quantum term hbar^2 box R / R.

    Uses grad S = hbar Im(d psi / psi) and
    hbar^2 box R / R = hbar^2 [Re(box psi / psi) + Im(d psi/psi) . Im(d psi/psi)].
    With ``check`` a NodeProximity is raised where rho <= node_epsilon;
    otherwise such entries come back as NaN.
    """
    hb = psi.constants.hbar
    val, d1, box = psi.log_derivatives(x)
    rho = np.abs(val) ** 2
    node = rho <= psi.node_epsilon
    if check and np.any(node):
        raise NodeProximity(
            f"configuration within node threshold (rho={np.min(rho):.3e} <= {psi.node_epsilon:.3e})",
            particle=tuple(range(psi.n_particles)), rho=float(np.min(rho)))
    im = d1.imag
    grad_S = hb * im
    qsq = np.sum(im[..., :-1] ** 2, axis=-1) - im[..., -1] ** 2
    quantum = hb * hb * (box.real + qsq)
    if np.any(node):
        grad_S = np.where(node[..., None, None], np.nan, grad_S)
        quantum = np.where(node[..., None], np.nan, quantum)
    return PolarData(rho, grad_S, quantum)


def evaluate(psi, x):
    return psi.evaluate(x)


def continuity_residual(psi, x):
    """Per-particle d_mu(R^2 d^mu S) for A = 0, with the size of its largest term."""
    hb = psi.constants.hbar
    val, d1, box = psi.log_derivatives(x)
    rho = np.abs(val) ** 2
    inner = lambda u, v: np.sum(u[..., :-1] * v[..., :-1], axis=-1) - u[..., -1] * v[..., -1]
    t1 = 2 * rho[..., None] * inner(d1.real, hb * d1.imag)
    t2 = rho[..., None] * hb * (box - inner(d1, d1)).imag
    # flat-amplitude states make both terms vanish; fall back to rho*hbar*(mc/hbar)^2
    c = psi.constants.c
    kc2 = np.array([(p.mass * c / hb) ** 2 for p in psi.particles])
    scale = np.maximum(np.maximum(np.abs(t1), np.abs(t2)), rho[..., None] * hb * kc2)
    return t1 + t2, scale


# -- constructors -----------------------------------------------------------

def plane_wave(k, particle, constants=Constants(), coefficient=1.0, branch=1):
    mode = PlaneWaveMode.on_shell(k, particle, constants, branch)
    return ModeSumWaveFunction([ProductTerm(coefficient, (mode,))], [particle], constants)


def superposition(ks, coefficients, particle, constants=Constants(), branch=1):
    """Single-particle sum of plane waves with wavevectors ks."""
    if len(ks) != len(coefficients):
        raise ConfigurationError("need one coefficient per wavevector")
    terms = [ProductTerm(c, (PlaneWaveMode.on_shell(k, particle, constants, branch),))
             for k, c in zip(ks, coefficients)]
    return ModeSumWaveFunction(terms, [particle], constants)


def from_term_specs(specs, particles, constants):
    """Build from ``[{coefficient: [re, im], modes: [{particle, k, branch}]}]``.

    omega is always recomputed from the mass shell.
    """
    terms = []
    n = len(particles)
    for j, spec in enumerate(specs):
        coef = spec.get("coefficient", [1.0, 0.0])
        if isinstance(coef, (list, tuple)):
            coef = complex(coef[0], coef[1] if len(coef) > 1 else 0.0)
        modes = [None] * n
        for m in spec["modes"]:
            i = int(m.get("particle", 0))
            if not 0 <= i < n:
                raise ConfigurationError(f"term {j} references missing particle {i}")
            modes[i] = PlaneWaveMode.on_shell(m["k"], particles[i], constants, int(m.get("branch", 1)))
        missing = [i for i, m in enumerate(modes) if m is None]
        if missing:
            raise ConfigurationError(f"term {j} has no mode for particle(s) {missing}")
        terms.append(ProductTerm(coef, tuple(modes)))
    return ModeSumWaveFunction(terms, particles, constants)


def gaussian_packet(center_k, width, n_modes, particle, constants=Constants(), span=4.0):
    """Discrete Gaussian packet in one particle's wavevector.

    Modes lie on a symmetric grid ``center_k +- span/width`` (per spatial
    axis) with weights ``exp(-(k - center_k)^2 width^2 / 2)`` normalised to
    sum |c|^2 = 1.  ``n_modes == 1`` collapses to the plane wave at center_k.
    """
    center = np.atleast_1d(np.asarray(center_k, dtype=float))
    if n_modes == 1:
        return plane_wave(center, particle, constants)
    if n_modes < 3:
        raise ConfigurationError(f"gaussian packet needs n_modes >= 3, got {n_modes}")
    if not width > 0:
        raise ConfigurationError("packet width must be > 0")
    offsets = np.linspace(-span / width, span / width, n_modes)
    grids = np.meshgrid(*([offsets] * center.size), indexing="ij")
    dk = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.exp(-np.sum(dk ** 2, axis=-1) * width ** 2 / 2)
    w = w / np.sqrt(np.sum(w ** 2))
    return superposition(list(center + dk), list(w), particle, constants)
