"""Sampling |psi|^2 over configuration spacetime and testing equivariance.

Samples are arrays of shape (n, N, D+1).  A ``SamplingBox`` may declare
lattice wraps: translations under which both |psi|^2 and the guide velocity
are invariant (e.g. whole periods of a mode sum).  Wrapped coordinates never
lose samples; losses through the other faces are counted as edge loss.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .dynamics import _flow, integrate_ensemble
from .errors import ConfigurationError, EnvelopeTooLoose, InconclusiveDomain
from .spacetime import boost_matrix

ALPHA = 0.01
EDGE_LOSS_MAX = 0.05


def ks_critical(n, m=None, alpha=ALPHA):
    """Asymptotic KS critical value; two-sample when m is given."""
    c = np.sqrt(-0.5 * np.log(alpha / 2))
    if m is None:
        return c / np.sqrt(n)
    return c * np.sqrt((n + m) / (n * m))


@dataclass
class SamplingBox:
    lower: np.ndarray
    upper: np.ndarray
    wraps: dict = field(default_factory=dict)   # flat coordinate index -> translation (config shape)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 2:
            raise ConfigurationError("box bounds must both have shape (N, D+1)")
        if not np.all(np.isfinite(self.lower)) or not np.all(np.isfinite(self.upper)):
            raise ConfigurationError("box bounds must be finite")
        if np.any(self.upper <= self.lower):
            raise ConfigurationError("box bounds must satisfy lower < upper")
        wraps = {}
        for j, w in dict(self.wraps).items():
            w = np.asarray(w, dtype=float).reshape(self.shape)
            if not np.isclose(w.flat[int(j)], self.extent.flat[int(j)]):
                raise ConfigurationError(f"wrap for coordinate {j} must span the box extent")
            wraps[int(j)] = w
        # shear wraps (touching several coordinates) first, pure ones last
        self.wraps = dict(sorted(wraps.items(), key=lambda kv: -np.count_nonzero(kv[1])))

    @property
    def shape(self):
        return self.lower.shape

    @property
    def extent(self):
        return self.upper - self.lower

    @property
    def volume(self):
        return float(np.prod(self.extent))

    def uniform(self, rng, n):
        return self.lower + rng.random((n,) + self.shape) * self.extent

    def wrap(self, X):
        X = np.array(X, dtype=float, copy=True)
        lo = self.lower.ravel()
        ext = self.extent.ravel()
        flat = X.reshape(X.shape[0], -1)
        for j, w in self.wraps.items():
            shift = np.floor((flat[:, j] - lo[j]) / ext[j])
            flat -= shift[:, None] * w.ravel()[None, :]
        return flat.reshape(X.shape)

    def inside(self, X):
        X = np.asarray(X)
        flat = X.reshape(X.shape[0], -1)
        lo, hi = self.lower.ravel(), self.upper.ravel()
        ok = (flat >= lo) & (flat <= hi)
        return ok.all(axis=1)

    def check_symmetry(self, psi, fields=None, n=64, seed=0, rtol=1e-8):
        """Raise unless rho and the guide velocity are invariant under every wrap."""
        rng = np.random.default_rng(seed)
        X = self.uniform(rng, n)
        V0, _, r0 = _flow(psi, fields, X, check=False)
        for j, w in self.wraps.items():
            V1, _, r1 = _flow(psi, fields, X + w, check=False)
            if not (np.allclose(r1, r0, rtol=rtol, atol=rtol * r0.max())
                    and np.allclose(V1, V0, rtol=rtol, atol=rtol * np.abs(V0).max())):
                raise ConfigurationError(f"wrap on coordinate {j} is not a symmetry of the flow")


def two_mode_box(psi, x_periods=1, ct_extent=None, ct_lower=0.0, x_lower=0.0):
    """Wrapped box for a single-particle 1+1D two-mode superposition.

    The density depends on (dk x - domega t) only, so one x period is a
    symmetry, and so is the shear (domega ct / (c dk), ct) for any ct.  The
    ct extent defaults to half of the temporal period.
    """
    if psi.n_particles != 1 or psi.spatial_dim != 1 or len(psi.terms) != 2:
        raise ConfigurationError("two_mode_box needs a single-particle, 1+1D, two-term wave function")
    dq = psi.q[1, 0] - psi.q[0, 0]       # (dk, -domega/c)
    dk = dq[0]
    if dk == 0:
        raise ConfigurationError("modes must differ")
    Lx = x_periods * 2 * np.pi / abs(dk)
    if ct_extent is None:
        ct_extent = np.pi / abs(dq[1]) if dq[1] != 0 else Lx
    shear = -dq[1] * ct_extent / dk
    lower = np.array([[x_lower, ct_lower]])
    upper = lower + np.array([[Lx, ct_extent]])
    return SamplingBox(lower, upper, wraps={0: [[Lx, 0.0]], 1: [[shear, ct_extent]]})


@dataclass
class Ensemble:
    samples: np.ndarray
    seed: int
    method: str
    box: SamplingBox
    c: float = 1.0

    def __len__(self):
        return len(self.samples)

    def csv_rows(self):
        n_part, dim = self.box.shape
        names = "xyz"[: dim - 1]
        rows = [["sample_id", "particle", "t"] + list(names)]
        for s, X in enumerate(self.samples):
            for i in range(n_part):
                rows.append([str(s), str(i), format(float(X[i, -1]) / self.c, ".17g")]
                            + [format(float(v), ".17g") for v in X[i, :-1]])
        return rows


def _rho(psi, X):
    return np.abs(psi.evaluate(X)) ** 2


def _grid(box, points_per_axis=None):
    d = int(np.prod(box.shape))
    if points_per_axis is None:
        points_per_axis = max(3, int(round(4096 ** (1.0 / d))))
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(box.lower.ravel(), box.upper.ravel())]
    return np.array(list(itertools.product(*axes))).reshape((-1,) + box.shape), points_per_axis


def envelope(psi, box, points_per_axis=None, safety=1.5):
    grid, _ = _grid(box, points_per_axis)
    return safety * float(np.max(_rho(psi, grid)))


def _grid_start(psi, box, rng, n):
    """Chain starts drawn from rho on the coarse grid, jittered within a cell."""
    grid, g = _grid(box)
    w = _rho(psi, grid)
    idx = rng.choice(len(grid), n, p=w / w.sum())
    X = grid[idx] + (rng.random((n,) + box.shape) - 0.5) * box.extent / (g - 1)
    return np.clip(X, box.lower, box.upper)


def sample_equilibrium(psi, box, n, seed, method="rejection", burn_in=1000, thin=10, n_chains=None,
                       batch=None):
    """n configurations distributed as |psi|^2 restricted to the box.

    Metropolis runs ``n_chains`` vectorised random walks (default one per
    sample, at most 10000) with Gaussian steps of box extent / 50.  Chains
    start from a density-weighted draw on the envelope grid; proposals are
    folded back through the box wraps when it has any.
    """
    rng = np.random.default_rng(seed)
    if n == 0:
        return Ensemble(np.empty((0,) + box.shape), seed, method, box, psi.constants.c)
    if method == "rejection":
        M = envelope(psi, box)
        batch = batch or max(1024, 4 * n)
        out, drawn = [], 0
        have = 0
        while have < n:
            X = box.uniform(rng, batch)
            u = rng.random(batch) * M
            keep = X[u < _rho(psi, X)]
            drawn += batch
            out.append(keep)
            have += len(keep)
            if drawn >= 100 * batch and have / drawn < 1e-4:
                raise EnvelopeTooLoose(
                    f"rejection acceptance {have / drawn:.2e} < 1e-4; use method='metropolis'")
        return Ensemble(np.concatenate(out)[:n], seed, method, box, psi.constants.c)
    if method == "metropolis":
        scale = box.extent / 50.0
        n_chains = n_chains or min(n, 10_000)
        per_chain = -(-n // n_chains)
        X = _grid_start(psi, box, rng, n_chains)
        r = _rho(psi, X)
        out = []
        for step in range(burn_in + per_chain * thin):
            Y = X + rng.normal(size=X.shape) * scale
            if box.wraps:
                Y = box.wrap(Y)
            inside = box.inside(Y)
            ry = np.where(inside, _rho(psi, np.where(inside[:, None, None], Y, X)), 0.0)
            acc = rng.random(n_chains) * r < ry
            X = np.where(acc[:, None, None], Y, X)
            r = np.where(acc, ry, r)
            if step >= burn_in and (step - burn_in + 1) % thin == 0:
                out.append(X.copy())
        samples = np.stack(out, axis=1).reshape((-1,) + box.shape)[:n]
        return Ensemble(samples, seed, method, box, psi.constants.c)
    raise ConfigurationError(f"unknown sampling method {method!r}")


def _threads():
    try:
        return max(1, int(os.environ.get("BOHMFLOW_THREADS", "1")))
    except ValueError:
        return 1


def push_forward(psi, fields, X, sigma_span, n_steps, box=None, spatial_scale=1.0):
    """Advance every sample by sigma_span; chunks run on BOHMFLOW_THREADS workers."""
    wrap = box.wrap if (box is not None and box.wraps) else None
    h = sigma_span / n_steps
    nt = _threads()
    if nt == 1 or len(X) < 2 * nt:
        return integrate_ensemble(psi, fields, X, h, n_steps, spatial_scale, wrap)
    chunks = np.array_split(X, nt)
    with ThreadPoolExecutor(nt) as ex:
        res = list(ex.map(lambda c: integrate_ensemble(psi, fields, c, h, n_steps, spatial_scale, wrap), chunks))
    return tuple(np.concatenate([r[i] for r in res]) for i in range(3))


def chi2_homogeneity(A, B, box, bins=None):
    """Two-sample chi^2 on a coarse grid over the box; returns (statistic, p)."""
    d = int(np.prod(box.shape))
    bins = bins or max(2, int(round(64 ** (1.0 / d))))
    edges = [np.linspace(lo, hi, bins + 1) for lo, hi in zip(box.lower.ravel(), box.upper.ravel())]
    ha = np.histogramdd(A.reshape(len(A), -1), bins=edges)[0].ravel()
    hb = np.histogramdd(B.reshape(len(B), -1), bins=edges)[0].ravel()
    keep = (ha + hb) > 0
    table = np.vstack([ha[keep], hb[keep]])
    stat, p, _, _ = sps.chi2_contingency(table)
    return float(stat), float(p)


def compare_ensembles(A, B, box, alpha=ALPHA):
    """Per-coordinate two-sample KS plus coarse-bin chi^2."""
    A = A.reshape(len(A), -1)
    B = B.reshape(len(B), -1)
    crit = ks_critical(len(A), len(B), alpha)
    ks = []
    for j in range(A.shape[1]):
        r = sps.ks_2samp(A[:, j], B[:, j])
        ks.append({"coordinate": j, "statistic": float(r.statistic), "pvalue": float(r.pvalue),
                   "passed": bool(r.statistic < crit)})
    chi2, p = chi2_homogeneity(A, B, box)
    return ks, crit, chi2, p


def equivariance_test(psi, fields, box, n=5000, sigma_span=1.0, n_steps=50, seed=0,
                      method="rejection", spatial_scale=1.0, alpha=ALPHA, n_reference=None):
    """Push a |psi|^2 ensemble through the flow and test it against |psi|^2 again.

    The reference is an independent ensemble (seed + 1) from the same
    sampler.  ``spatial_scale`` multiplies the spatial velocity components
    and exists to check the test's power.
    """
    if box.wraps:
        box.check_symmetry(psi, fields)
    ens = sample_equilibrium(psi, box, n, seed, method)
    ref = sample_equilibrium(psi, box, n_reference or 4 * n, seed + 1, method)
    X1, halted, disp = push_forward(psi, fields, ens.samples, sigma_span, n_steps, box, spatial_scale)
    inside = box.inside(X1) & ~halted
    edge_loss = 1.0 - inside.mean() if n else 0.0
    # per-coordinate mean |displacement| over box extent, worst coordinate
    mean_disp = float(np.max(np.mean(np.abs(disp), axis=0) / box.extent)) if n else 0.0
    report = {
        "test": "equivariance",
        "n": int(n),
        "seed": int(seed),
        "edge_loss": float(edge_loss),
        "sigma_span": float(sigma_span),
        "mean_displacement_over_box": mean_disp,
        "spatial_scale": float(spatial_scale),
        "halted": int(halted.sum()),
    }
    if edge_loss >= EDGE_LOSS_MAX:
        raise InconclusiveDomain(
            f"edge loss {edge_loss:.3f} >= {EDGE_LOSS_MAX}; enlarge the box or shorten sigma_span")
    ks, crit, chi2, p = compare_ensembles(X1[inside], ref.samples, box, alpha)
    stat = max(r["statistic"] for r in ks)
    report.update({
        "statistic": stat,
        "critical": float(crit),
        "ks": ks,
        "chi2": chi2,
        "chi2_pvalue": p,
        "passed": bool(all(r["passed"] for r in ks) and p > alpha),
    })
    return report


def frame_independence_test(psi, box, beta, n=100_000, seed=0, axis=0):
    """Monte Carlo integral of |psi|^2 over a region and over its boosted image.

    Both estimates use the same random stream; the boosted region is
    sampled through its bounding box with a membership test, so the unit
    Jacobian of the boost is exercised rather than assumed.
    """
    if psi.n_particles != 1:
        raise ConfigurationError("frame_independence_test is defined for a single particle")
    if abs(beta) > 0.6:
        raise ConfigurationError("|beta| must be <= 0.6")
    L = boost_matrix(beta, axis, box.shape[-1])
    Linv = boost_matrix(-beta, axis, box.shape[-1])
    psi_b = psi.boosted(beta, axis)

    def estimate(values, vol):
        return vol * values.mean(), vol * values.std(ddof=1) / np.sqrt(len(values))

    rng = np.random.default_rng(seed)
    U = rng.random((n,) + box.shape)
    X = box.lower + U * box.extent
    P, se = estimate(_rho(psi, X), box.volume)

    corners = np.array(list(itertools.product(*zip(box.lower[0], box.upper[0]))))
    bc = corners @ L.T
    lo, hi = bc.min(axis=0)[None, :], bc.max(axis=0)[None, :]
    Y = lo + U * (hi - lo)
    member = box.inside(Y @ Linv.T)
    vals = np.where(member, _rho(psi_b, Y), 0.0)
    Pb, seb = estimate(vals, float(np.prod(hi - lo)))
    tol = 3.0 * np.hypot(se, seb)
    return {
        "test": "frame_independence",
        "beta": float(beta),
        "n": int(n),
        "seed": int(seed),
        "P": float(P),
        "P_boosted": float(Pb),
        "statistic": float(abs(P - Pb)),
        "critical": float(tol),
        "passed": bool(abs(P - Pb) <= tol),
        "edge_loss": 0.0,
    }
