"""Monte Carlo estimation of the exact ergodic per-user SINR.

This is the ground-truth path every asymptotic result is checked against.
The estimator follows the statistics-level rate bound: per user it needs
the mean own-channel/precoder inner product and the second moments of all
cross products, nothing symbol-level.

Two passes with independent seed streams: the first estimates the ensemble
power expectations that define the normalization weights, the second
evaluates the SINR terms with those weights frozen. Trials are split into
fixed-size chunks whose seeds depend only on (seed, pass, chunk index) and
whose partial sums are reduced in chunk order, so the estimate is
bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (
    ChannelStatistics,
    compute_statistics,
    draw_estimates_batch,
    draw_rotated_batch,
)
from .precoder import RZF, VECTOR, PrecoderConfig, build_directions, default_rzf_alpha
from .results import SinrGrid
from .scenario import Scenario

_PASS_NORMALIZATION = 0
_PASS_SINR = 1


@dataclass(frozen=True)
class McEstimate:
    """Simulation estimate of the per-user SINR decomposition.

    ``weights[l, i]`` are the realized normalization weights (per-user
    inverse powers under vector normalization, the per-cell scalar repeated
    under matrix normalization). ``power_per_cell`` is the realized
    ``E[tr(G G^H)]``, which the power constraint pins at K.
    """

    grid: SinrGrid
    scheme: str
    normalization: str
    trials: int
    weights: np.ndarray  # (L, K)
    stderr: dict
    power_per_cell: np.ndarray  # (L,)


def _chunks(trials: int, chunk_size: int):
    bounds = list(range(0, trials, chunk_size)) + [trials]
    return [(i, bounds[i + 1] - bounds[i]) for i in range(len(bounds) - 1)]


def _rng_for(seed: int, pass_id: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, pass_id, chunk_index)))


def _precoders(h_hat: np.ndarray, config: PrecoderConfig, alpha, ridge) -> np.ndarray:
    """Directions for every BS of a chunk; h_hat is (T, L, K, N)."""
    T, L = h_hat.shape[0], h_hat.shape[1]
    est = h_hat.transpose(0, 1, 3, 2)  # (T, L, N, K)
    out = np.empty_like(est)
    for l in range(L):
        out[:, l] = build_directions(est[:, l], config, alpha=alpha)
    return out


def _map_chunks(worker, chunk_list, threads: int):
    if threads <= 1:
        return [worker(c) for c in chunk_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, chunk_list))


def estimate_sinr(
    scenario: Scenario,
    config: PrecoderConfig,
    trials: int,
    seed: int,
    stats: Optional[ChannelStatistics] = None,
    threads: int = 1,
    chunk_size: int = 32,
    normalization_trials: Optional[int] = None,
) -> McEstimate:
    """Estimate the SINR decomposition of every user over seeded draws."""
    if trials < 2:
        raise ValueError("need at least 2 trials")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if stats is None:
        stats = compute_statistics(scenario)
    L, K, N = scenario.num_cells, scenario.ues_per_cell, scenario.num_antennas
    alpha = None
    ridge = None
    if config.scheme == RZF:
        alpha = config.alpha if config.alpha is not None else default_rzf_alpha(scenario)
        if config.ridge_matrix is not None:
            # the simulation runs in the eigenbasis of the correlation base
            u = stats.base_eigvecs
            ridge = u.conj().T @ config.ridge_matrix @ u
    cfg = config if ridge is None else PrecoderConfig(
        scheme=config.scheme,
        normalization=config.normalization,
        alpha=alpha,
        ridge_matrix=ridge,
    )

    # pass 1: ensemble power expectations defining the weights
    n1 = normalization_trials if normalization_trials is not None else trials

    def norm_worker(chunk):
        idx, count = chunk
        rng = _rng_for(seed, _PASS_NORMALIZATION, idx)
        h_hat = draw_estimates_batch(scenario, stats, rng, count)
        f = _precoders(h_hat, cfg, alpha, ridge)
        return np.sum(np.abs(f) ** 2, axis=(0, 2))  # (L, K) column powers

    col_power = sum(_map_chunks(norm_worker, _chunks(n1, chunk_size), threads)) / n1
    if config.normalization == VECTOR:
        weights = 1.0 / col_power
    else:
        weights = np.repeat((K / col_power.sum(axis=1))[:, None], K, axis=1)

    # pass 2: SINR terms with the weights frozen
    def sinr_worker(chunk):
        idx, count = chunk
        rng = _rng_for(seed, _PASS_SINR, idx)
        h, h_hat = draw_rotated_batch(scenario, stats, rng, count)
        f = _precoders(h_hat, cfg, alpha, ridge)
        cross = np.empty((count, L, L, K, K), dtype=complex)
        for l in range(L):
            # cross[t, l, j, k, i] = <h_{l -> (j,k)}, f_{l,i}>
            c = np.matmul(h[:, l].conj().reshape(count, L * K, N), f[:, l])
            cross[:, l] = c.reshape(count, L, K, K)
        weighted = np.abs(cross) ** 2 * weights[None, :, None, None, :]
        tot = weighted.sum(axis=(1, 4))
        same_pilot = np.einsum("tljkk->tjk", weighted)
        own_term = np.einsum("tjjkk->tjk", weighted)
        noncoh_t = tot - same_pilot
        pilot_t = same_pilot - own_term
        own_c = np.einsum("tjjkk->tjk", cross)
        col_p = np.sum(np.abs(f) ** 2, axis=2)  # (T, L, K)
        return {
            "own_c": own_c.sum(axis=0),
            "own_abs2": np.sum(np.abs(own_c) ** 2, axis=0),
            "own_abs4": np.sum(np.abs(own_c) ** 4, axis=0),
            "noncoh": noncoh_t.sum(axis=0),
            "noncoh_sq": np.sum(noncoh_t**2, axis=0),
            "pilot": pilot_t.sum(axis=0),
            "pilot_sq": np.sum(pilot_t**2, axis=0),
            "power": np.einsum("tlk,lk->l", col_p, weights),
        }

    partials = _map_chunks(sinr_worker, _chunks(trials, chunk_size), threads)
    acc = partials[0]
    for p in partials[1:]:
        acc = {key: acc[key] + p[key] for key in acc}

    t = float(trials)
    mean_c = acc["own_c"] / t
    abs_mean_sq = np.abs(mean_c) ** 2
    own_abs2 = acc["own_abs2"] / t
    signal = weights * abs_mean_sq
    # E|x|^2 - |E x|^2, clamped where simulation noise turns it negative
    var_c = np.clip(own_abs2 - abs_mean_sq, 0.0, None)
    variance = weights * var_c
    noncoh = acc["noncoh"] / t
    pilot = acc["pilot"] / t
    noise = scenario.power.sigma2 / scenario.power.rho_dl

    def se(second_moment, mean):
        return np.sqrt(np.clip(second_moment - mean**2, 0.0, None) / t)

    stderr = {
        "signal": 2.0 * weights * np.sqrt(abs_mean_sq) * np.sqrt(var_c / t),
        "variance": weights * se(acc["own_abs4"] / t, own_abs2),
        "noncoherent_interference": se(acc["noncoh_sq"] / t, noncoh),
        "pilot_contamination": se(acc["pilot_sq"] / t, pilot),
    }
    grid = SinrGrid(
        signal=signal,
        noise=noise,
        variance=variance,
        noncoherent_interference=noncoh,
        pilot_contamination=pilot,
    )
    return McEstimate(
        grid=grid,
        scheme=config.scheme,
        normalization=config.normalization,
        trials=trials,
        weights=weights,
        stderr=stderr,
        power_per_cell=acc["power"] / t,
    )


def sum_rate(estimate: McEstimate, cell: int) -> float:
    """Ergodic achievable sum rate of one cell in bit/s/Hz."""
    return estimate.grid.sum_rate(cell)
