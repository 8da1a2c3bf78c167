"""Channel realizations and MMSE estimation statistics.

Every link correlation is the shared base matrix scaled by the link gain,
so the training-observation covariance at BS ``l`` on pilot ``k`` is
``a[l,k] * base + (sigma2/rho_tr) * I`` with ``a[l,k]`` the total same-pilot
gain seen at that BS. All second-order quantities therefore diagonalize in
the eigenbasis of the base matrix; this module stores that spectral form
(used by the Monte Carlo engine) and assembles the dense matrices consumed
by the deterministic-equivalent pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import Scenario, UNCORRELATED

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + np.conj(np.swapaxes(m, -1, -2))) / 2


@dataclass(frozen=True)
class ChannelStatistics:
    """Second-order statistics of channels and their MMSE estimates.

    Attributes
    ----------
    pilot_gain : (L, K) total same-pilot gain ``sum_j gains[l, j, k]``.
    ridge : scalar ``sigma2 / rho_tr`` loading the training observation.
    base_eigvecs, base_eigvals : eigendecomposition of the shared base.
    Q : (L, K, N, N) inverse training-observation covariances.
    base_projected : (L, K, N, N) ``base @ Q[l,k] @ base``; the cross-link
        matrix for UE ``k`` of cell ``j`` seen from BS ``l`` is
        ``gains[l,l,k] * gains[l,j,k] * base_projected[l,k]``.
    estimator : (L, K, N, N) MMSE filters mapping a training observation to
        the own-cell channel estimate.
    """

    scenario: Scenario
    pilot_gain: np.ndarray
    ridge: float
    base_eigvecs: np.ndarray
    base_eigvals: np.ndarray
    Q: np.ndarray
    base_projected: np.ndarray
    estimator: np.ndarray

    def phi(self, l: int, j: int, k: int) -> np.ndarray:
        g = self.scenario.gains
        return g[l, l, k] * g[l, j, k] * self.base_projected[l, k]

    def phi_own(self, l: int) -> np.ndarray:
        """Own-cell estimate covariances at BS ``l``, shape (K, N, N)."""
        g = self.scenario.gains[l, l, :] ** 2
        return g[:, None, None] * self.base_projected[l]

    def theta(self, l: int, j: int, k: int) -> np.ndarray:
        return self.scenario.gains[l, j, k] * self.scenario.correlation_base()


def compute_statistics(scenario: Scenario) -> ChannelStatistics:
    """Build the per-(cell, pilot) inverse covariances and MMSE filters."""
    n = scenario.num_antennas
    base = scenario.correlation_base()
    if scenario.correlation.variant == UNCORRELATED:
        eigvals = np.ones(n)
        eigvecs = np.eye(n, dtype=complex)
    else:
        eigvals, eigvecs = np.linalg.eigh(base)
        # the base is PSD by construction; clip rounding noise
        eigvals = np.clip(eigvals, 0.0, None)

    pilot_gain = scenario.gains.sum(axis=1)  # (L, K)
    ridge = scenario.power.sigma2 / scenario.power.rho_tr
    denom = pilot_gain[..., None] * eigvals + ridge  # (L, K, N), strictly positive

    u = eigvecs
    uh = u.conj().T

    def from_diag(diag):  # (L, K, N) spectra -> (L, K, N, N) dense matrices
        return _hermitize(np.einsum("ab,lkb,bc->lkac", u, diag, uh, optimize=True))

    q = from_diag(1.0 / denom)
    base_projected = from_diag(eigvals**2 / denom)
    own_gain = np.einsum("llk->lk", scenario.gains)
    estimator = from_diag(own_gain[..., None] * eigvals / denom)
    return ChannelStatistics(
        scenario=scenario,
        pilot_gain=pilot_gain,
        ridge=ridge,
        base_eigvecs=u,
        base_eigvals=eigvals,
        Q=q,
        base_projected=base_projected,
        estimator=estimator,
    )


@dataclass(frozen=True)
class ChannelDraw:
    """One realization of all true channels and own-cell MMSE estimates.

    ``h[l, j, k]`` is the channel from BS ``l`` to UE ``k`` of cell ``j``;
    ``h_hat[j, k]`` is BS ``j``'s estimate of its own UE ``k``.
    """

    h: np.ndarray  # (L, L, K, N)
    h_hat: np.ndarray  # (L, K, N)
    seed: int


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * _INV_SQRT2


def draw_channels(scenario: Scenario, stats: ChannelStatistics, seed: int) -> ChannelDraw:
    """Single seeded realization in the physical antenna basis.

    The training observation is formed explicitly from the same-pilot
    channels plus noise, so estimates across cells share the contamination
    that couples them.
    """
    rng = np.random.default_rng(seed)
    L, K, N = scenario.num_cells, scenario.ues_per_cell, scenario.num_antennas
    sqrt_base = scenario.sqrt_base()
    z = complex_normal(rng, (L, L, K, N))
    h = np.sqrt(scenario.gains)[..., None] * np.einsum("ab,ljkb->ljka", sqrt_base, z)
    noise = complex_normal(rng, (L, K, N)) * np.sqrt(stats.ridge)
    y_tr = h.sum(axis=1) + noise
    h_hat = np.einsum("lkab,lkb->lka", stats.estimator, y_tr)
    return ChannelDraw(h=h, h_hat=h_hat, seed=seed)


def draw_rotated_batch(
    scenario: Scenario, stats: ChannelStatistics, rng: np.random.Generator, count: int
):
    """Batch of draws in the eigenbasis of the shared correlation base.

    Rotating by a unitary leaves every inner product the simulator needs
    unchanged while making both channel generation and MMSE filtering
    diagonal, which is what keeps large Monte Carlo runs cheap.

    Returns ``(h, h_hat)`` with shapes ``(count, L, L, K, N)`` and
    ``(count, L, K, N)``.
    """
    L, K, N = scenario.num_cells, scenario.ues_per_cell, scenario.num_antennas
    scale = np.sqrt(scenario.gains[..., None] * stats.base_eigvals)  # (L, L, K, N)
    z = complex_normal(rng, (count, L, L, K, N))
    h = scale * z
    noise = complex_normal(rng, (count, L, K, N)) * np.sqrt(stats.ridge)
    y_tr = h.sum(axis=2) + noise
    own = np.einsum("llk->lk", scenario.gains)
    filt = own[..., None] * (
        stats.base_eigvals / (stats.pilot_gain[..., None] * stats.base_eigvals + stats.ridge)
    )  # (L, K, N)
    h_hat = filt * y_tr
    return h, h_hat


def draw_estimates_batch(
    scenario: Scenario, stats: ChannelStatistics, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Batch of own-cell estimates only, in the rotated basis.

    Per (cell, pilot) the training observation is Gaussian with a diagonal
    spectrum, so estimates can be drawn directly without materializing the
    cross-cell channels. Exact in distribution per base station, which is
    all the normalization pass needs. Shape ``(count, L, K, N)``.
    """
    L, K, N = scenario.num_cells, scenario.ues_per_cell, scenario.num_antennas
    obs_spectrum = stats.pilot_gain[..., None] * stats.base_eigvals + stats.ridge  # (L, K, N)
    z = complex_normal(rng, (count, L, K, N))
    y_tr = np.sqrt(obs_spectrum) * z
    own = np.einsum("llk->lk", scenario.gains)
    filt = own[..., None] * (stats.base_eigvals / obs_spectrum)
    return filt * y_tr


def dump_draw(draw: ChannelDraw, path: str | Path) -> None:
    """Debug dump; not a stability surface."""
    np.savez_compressed(path, h=draw.h, h_hat=draw.h_hat, seed=draw.seed)


def load_draw(path: str | Path) -> ChannelDraw:
    data = np.load(path)
    return ChannelDraw(h=data["h"], h_hat=data["h_hat"], seed=int(data["seed"]))
