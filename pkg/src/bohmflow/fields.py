"""External electromagnetic four-potentials and their field tensor.

``potential_at`` returns ``(A_1, ..., A_D, phi)`` in Gaussian units.  The
covariant real-metric components used in the guide equation are
``(A_1, ..., A_D, -phi)``; ``covariant_potential`` does the lowering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

H_F = 1e-5

_AXES = {"x": 0, "y": 1, "z": 2}


def _axis_index(axis):
    if isinstance(axis, str):
        try:
            return _AXES[axis]
        except KeyError:
            raise ConfigurationError(f"unknown axis {axis!r}") from None
    return int(axis)


class GaugeFunction:
    """Scalar function chi of one particle's event, with analytic derivatives.

    Subclasses implement ``__call__``, ``grad`` (covariant, d/dx^mu with the
    last entry d/d(ct)) and ``dalembert`` (sum_k d_k^2 - d_ct^2).
    """

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def dalembert(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class QuadraticGauge(GaugeFunction):
    """chi(x) = g.x + x.H.x / 2 over the (D+1) real components."""

    linear: tuple
    hessian: tuple | None = None

    def _g(self):
        return np.asarray(self.linear, dtype=float)

    def _H(self):
        n = len(self.linear)
        if self.hessian is None:
            return np.zeros((n, n))
        H = np.asarray(self.hessian, dtype=float)
        return 0.5 * (H + H.T)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        H = self._H()
        return x @ self._g() + 0.5 * np.einsum("...i,ij,...j->...", x, H, x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self._g() + x @ self._H().T

    def dalembert(self, x):
        x = np.asarray(x, dtype=float)
        H = self._H()
        val = np.trace(H[:-1, :-1]) - H[-1, -1]
        return np.full(x.shape[:-1], val)


@dataclass(frozen=True)
class SineGauge(GaugeFunction):
    """chi(x) = amplitude * sin(q.x), q a real (D+1)-covector."""

    amplitude: float
    q: tuple

    def __call__(self, x):
        return self.amplitude * np.sin(np.asarray(x, dtype=float) @ np.asarray(self.q))

    def grad(self, x):
        q = np.asarray(self.q, dtype=float)
        c = np.cos(np.asarray(x, dtype=float) @ q)
        return self.amplitude * c[..., None] * q

    def dalembert(self, x):
        q = np.asarray(self.q, dtype=float)
        qq = np.sum(q[:-1] ** 2) - q[-1] ** 2
        return -self.amplitude * qq * np.sin(np.asarray(x, dtype=float) @ q)


@dataclass(frozen=True)
class EMPotential:
    """Parametric four-potential family.

    family is one of ``zero``, ``constant_electric``, ``constant_magnetic``,
    ``pure_gauge``.  Use the module-level constructors.
    """

    family: str = "zero"
    strength: float = 0.0
    axis: int = 0
    plane: tuple = (0, 1)
    chi: GaugeFunction | None = None

    def __post_init__(self):
        if self.family not in ("zero", "constant_electric", "constant_magnetic", "pure_gauge"):
            raise ConfigurationError(f"unknown field family {self.family!r}")
        if self.family == "pure_gauge" and self.chi is None:
            raise ConfigurationError("pure_gauge field needs a gauge function chi")

    @property
    def is_zero(self):
        return self.family == "zero"


def zero_field():
    return EMPotential("zero")


def constant_electric(E, axis="x"):
    return EMPotential("constant_electric", strength=float(E), axis=_axis_index(axis))


def constant_magnetic(B, plane=("x", "y")):
    return EMPotential("constant_magnetic", strength=float(B),
                       plane=tuple(_axis_index(a) for a in plane))


def pure_gauge(chi):
    return EMPotential("pure_gauge", chi=chi)


def potential_at(field: EMPotential, x):
    """(A_vec, phi) at event(s) x; output has the shape of x."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    fam = field.family
    if fam == "zero":
        return out
    if fam == "constant_electric":
        # static gauge: phi = -E x_axis, A = 0
        if field.axis >= x.shape[-1] - 1:
            raise ConfigurationError(f"field axis {field.axis} needs D > {field.axis}")
        out[..., -1] = -field.strength * x[..., field.axis]
        return out
    if fam == "constant_magnetic":
        i, j = field.plane
        if max(i, j) >= x.shape[-1] - 1:
            raise ConfigurationError("constant magnetic field needs D >= 2")
        # symmetric gauge A = (B/2)(-x_j, x_i)
        out[..., i] = -0.5 * field.strength * x[..., j]
        out[..., j] = 0.5 * field.strength * x[..., i]
        return out
    # pure gauge: A_mu(covariant) = d_mu chi  ->  A_vec = grad chi, phi = -d chi/d(ct)
    g = field.chi.grad(x)
    out[..., :-1] = g[..., :-1]
    out[..., -1] = -g[..., -1]
    return out


def covariant_potential(field: EMPotential, x):
    A = potential_at(field, x)
    A[..., -1] *= -1.0
    return A


def _fd_tensor(field, x, h=H_F):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    dA = np.zeros(x.shape[:-1] + (n, n))  # dA[..., mu, nu] = d_mu A_nu
    for mu in range(n):
        e = np.zeros(n)
        e[mu] = h
        dA[..., mu, :] = (covariant_potential(field, x + e) - covariant_potential(field, x - e)) / (2 * h)
    F = dA - np.swapaxes(dA, -1, -2)
    return 0.5 * (F - np.swapaxes(F, -1, -2))


def field_tensor_at(field: EMPotential, x, numeric=False):
    """Covariant F_{mu nu} = d_mu A_nu - d_nu A_mu, real metric, at event(s) x.

    Closed form for the analytic families; central differences (step H_F)
    for pure_gauge or when ``numeric`` is set.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if numeric or field.family == "pure_gauge":
        return _fd_tensor(field, x)
    F = np.zeros(x.shape[:-1] + (n, n))
    if field.family == "constant_electric":
        F[..., field.axis, -1] = field.strength
        F[..., -1, field.axis] = -field.strength
    elif field.family == "constant_magnetic":
        i, j = field.plane
        F[..., i, j] = field.strength
        F[..., j, i] = -field.strength
    return F
