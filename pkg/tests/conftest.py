import numpy as np
import pytest

from bohmflow import Constants, ParticleParams, superposition
from bohmflow.wavefunction import from_term_specs

UNIT = Constants(1.0, 1.0)


def entangled_pair(constants=UNIT):
    parts = [ParticleParams(1.0, 0.5), ParticleParams(2.0, -1.0)]
    specs = [
        {"coefficient": [1.0, 0.0], "modes": [{"particle": 0, "k": [0.4]}, {"particle": 1, "k": [-0.7]}]},
        {"coefficient": [0.6, 0.3], "modes": [{"particle": 0, "k": [-1.1]}, {"particle": 1, "k": [0.9]}]},
    ]
    return from_term_specs(specs, parts, constants)


def two_mode(constants=UNIT):
    return superposition([[0.5], [3.0]], [1.0, 0.7], ParticleParams(1.0), constants)


def away_from_nodes(psi, n, seed=0, spread=3.0, frac=0.05):
    rng = np.random.default_rng(seed)
    shape = (psi.n_particles, psi.spatial_dim + 1)
    ref = float(np.sum(np.abs(psi.coefficients))) ** 2
    out = []
    while sum(map(len, out)) < n:
        X = rng.uniform(-spread, spread, size=(4 * n,) + shape)
        out.append(X[np.abs(psi.evaluate(X)) ** 2 > frac * ref])
    return np.concatenate(out)[:n]


@pytest.fixture
def pair():
    return entangled_pair()


@pytest.fixture
def tm():
    return two_mode()
