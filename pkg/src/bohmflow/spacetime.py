"""Real-metric Minkowski algebra.

Every event or velocity is stored as a real array whose last axis holds
``(x_1, ..., x_D, ct)``; the metric is ``diag(+1, ..., +1, -1)``.  A
configuration of N particles is an array of shape ``(..., N, D + 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class Metric:
    spatial_dim: int = 1

    def __post_init__(self):
        if self.spatial_dim not in (1, 2, 3):
            raise ConfigurationError(f"spatial_dim must be 1, 2 or 3, got {self.spatial_dim}")

    @property
    def dim(self) -> int:
        return self.spatial_dim + 1

    @property
    def eta(self) -> np.ndarray:
        return np.diag([1.0] * self.spatial_dim + [-1.0])

    def signs(self) -> np.ndarray:
        s = np.ones(self.dim)
        s[-1] = -1.0
        return s


@dataclass(frozen=True)
class FourVector:
    spatial: tuple
    temporal: float

    def __post_init__(self):
        object.__setattr__(self, "spatial", tuple(float(v) for v in np.atleast_1d(self.spatial)))
        object.__setattr__(self, "temporal", float(self.temporal))
        if not np.all(np.isfinite(self.as_array())):
            raise DomainError("four-vector components must be finite")

    @classmethod
    def from_array(cls, arr) -> "FourVector":
        arr = np.asarray(arr, dtype=float)
        return cls(tuple(arr[:-1]), arr[-1])

    def as_array(self) -> np.ndarray:
        return np.array(list(self.spatial) + [self.temporal])

    @property
    def dim(self) -> int:
        return len(self.spatial)


@dataclass(frozen=True)
class ParticleParams:
    mass: float
    charge: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigurationError(f"particle mass must be > 0, got {self.mass}")


@dataclass(frozen=True)
class Constants:
    hbar: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.c > 0):
            raise ConfigurationError("hbar and c must both be > 0")


def _arr(v):
    if isinstance(v, FourVector):
        return v.as_array()
    return np.asarray(v, dtype=float)


def minkowski_dot(a, b, metric: Metric | None = None):
    """Contract two four-vectors: sum of spatial products minus temporal product.

    Works elementwise over leading axes.
    """
    a, b = _arr(a), _arr(b)
    if a.shape[-1] != b.shape[-1]:
        raise ConfigurationError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    if metric is not None and a.shape[-1] != metric.dim:
        raise ConfigurationError(f"vector of length {a.shape[-1]} does not match D={metric.spatial_dim}")
    return np.sum(a[..., :-1] * b[..., :-1], axis=-1) - a[..., -1] * b[..., -1]


def raise_index(v):
    """Flip the sign of the temporal component (eta is its own inverse)."""
    out = np.array(_arr(v), dtype=float, copy=True)
    out[..., -1] *= -1.0
    return out


def boost_matrix(beta: float, axis: int = 0, dim: int = 2) -> np.ndarray:
    if not abs(beta) < 1:
        raise DomainError(f"|beta| must be < 1, got {beta}")
    if not 0 <= axis < dim - 1:
        raise ConfigurationError(f"boost axis {axis} out of range for D={dim - 1}")
    gamma = 1.0 / np.sqrt(1.0 - beta * beta)
    L = np.eye(dim)
    L[axis, axis] = gamma
    L[-1, -1] = gamma
    L[axis, -1] = -gamma * beta
    L[-1, axis] = -gamma * beta
    return L


def lorentz_boost(v, beta: float, axis: int = 0):
    """Boost events (or contravariant vectors) into a frame moving with velocity beta*c.

    x' = gamma (x - beta ct),  ct' = gamma (ct - beta x).  Accepts a
    FourVector or an array with the components on the last axis; returns the
    same kind.
    """
    arr = _arr(v)
    L = boost_matrix(beta, axis, arr.shape[-1])
    out = arr @ L.T
    if isinstance(v, FourVector):
        return FourVector.from_array(out)
    return out
