"""Closed-form asymptotic SINRs for uncorrelated fading.

When every link correlation is a scaled identity the fixed points collapse
to scalars and the asymptotic SINRs become explicit functions of the
large-scale gains. Both power normalizations share the exact same noise
plus non-coherent interference aggregate (one subroutine computes it once
per scheme); they differ only in the signal and pilot contamination terms.

Also implements the single-cell sum-rate gap between the two
normalizations in the high training SNR regime, and the pilot
contamination to interference-plus-noise ratio (PCINR) diagnostic with its
region classification.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .precoder import MATRIX, MRT, VECTOR, ZF
from .results import SinrGrid
from .scenario import PowerConfig, Scenario, ScenarioError, UNCORRELATED

PCINR_NEGLIGIBLE = 0.1  # below: pilot contamination under 10% of noise+interference
PCINR_DOMINANT = 1.0  # above: pilot contamination exceeds noise+interference


@dataclass(frozen=True)
class UncorrelatedInputs:
    """Scalar ingredients of the closed forms.

    ``gains[l, j, k]`` as in :class:`~cellsinr.scenario.Scenario`;
    ``total_gain[l, k]`` is the same-pilot gain sum at BS ``l`` plus the
    training noise loading, and ``u_bar = 1 - K/N`` is the zero-forcing
    degrees-of-freedom fraction.
    """

    gains: np.ndarray  # (L, L, K)
    num_antennas: int
    power: PowerConfig

    def __post_init__(self):
        g = np.asarray(self.gains, float)
        if g.ndim != 3 or g.shape[0] != g.shape[1]:
            raise ScenarioError("gains must have shape (L, L, K)")
        if np.any(g <= 0):
            raise ScenarioError("gains must be positive")
        if self.num_antennas <= self.ues_per_cell:
            raise ScenarioError(
                f"need more antennas than UEs (N={self.num_antennas}, K={self.ues_per_cell})"
            )

    @property
    def num_cells(self) -> int:
        return self.gains.shape[0]

    @property
    def ues_per_cell(self) -> int:
        return self.gains.shape[2]

    @property
    def own_gain(self) -> np.ndarray:  # (L, K)
        return np.einsum("llk->lk", self.gains)

    @property
    def total_gain(self) -> np.ndarray:  # (L, K)
        return self.gains.sum(axis=1) + self.power.sigma2 / self.power.rho_tr

    @property
    def u_bar(self) -> float:
        return 1.0 - self.ues_per_cell / self.num_antennas

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "UncorrelatedInputs":
        if scenario.correlation.variant != UNCORRELATED:
            raise ScenarioError("closed forms require the uncorrelated channel model")
        return cls(
            gains=scenario.gains,
            num_antennas=scenario.num_antennas,
            power=scenario.power,
        )


def noise_interference_aggregate(inputs: UncorrelatedInputs, scheme: str) -> np.ndarray:
    """Noise plus total non-coherent interference per user, shape (L, K).

    This aggregate is identical under both power normalizations; vector and
    matrix normalization call this one subroutine so the shared part of the
    denominator is the same floating-point number in both.
    """
    noise = inputs.power.sigma2 / (inputs.num_antennas * inputs.power.rho_dl)
    k_over_n = inputs.ues_per_cell / inputs.num_antennas
    g, a = inputs.gains, inputs.total_gain
    if scheme == ZF:
        per_bs = g * (1.0 - g / a[:, None, :])  # (l, j, k)
    elif scheme == MRT:
        per_bs = g
    else:
        raise ScenarioError(f"no closed form for scheme {scheme!r}")
    return noise + k_over_n * per_bs.sum(axis=0)


def _grid(inputs, scheme, signal, variance, pilot) -> SinrGrid:
    aggregate = noise_interference_aggregate(inputs, scheme)
    noise = inputs.power.sigma2 / (inputs.num_antennas * inputs.power.rho_dl)
    return SinrGrid(
        signal=signal,
        noise=noise,
        variance=variance,
        noncoherent_interference=aggregate - noise - variance,
        pilot_contamination=pilot,
    )


def zf_closed_form(inputs: UncorrelatedInputs, normalization: str) -> SinrGrid:
    """Per-user zero-forcing SINR decomposition under uncorrelated fading."""
    g, a = inputs.gains, inputs.total_gain
    o = inputs.own_gain
    ub = inputs.u_bar
    n = inputs.num_antennas
    off = (~np.eye(inputs.num_cells, dtype=bool)).astype(float)
    own_var_core = np.einsum("llk->lk", g * (1.0 - g / a[:, None, :]))  # d(1 - d/a) at l=j
    if normalization == VECTOR:
        signal = (o**2 / a) * ub
        variance = own_var_core / n
        pilot = np.einsum("ljk,lj->jk", (g**2 / a[:, None, :]) * ub, off)
    elif normalization == MATRIX:
        lam = ub / np.mean(a / o**2, axis=1)  # (L,)
        signal = np.repeat(lam[:, None], inputs.ues_per_cell, axis=1)
        u_own = (o**2 / a) * ub
        variance = lam[:, None] * own_var_core / (n * u_own)
        pilot = np.einsum("ljk,lj->jk", lam[:, None, None] * g**2 / o[:, None, :] ** 2, off)
    else:
        raise ScenarioError(f"unknown normalization {normalization!r}")
    return _grid(inputs, ZF, signal, variance, pilot)


def mrt_closed_form(inputs: UncorrelatedInputs, normalization: str) -> SinrGrid:
    """Per-user maximum-ratio SINR decomposition under uncorrelated fading."""
    g, a = inputs.gains, inputs.total_gain
    o = inputs.own_gain
    n = inputs.num_antennas
    off = (~np.eye(inputs.num_cells, dtype=bool)).astype(float)
    if normalization == VECTOR:
        signal = o**2 / a
        variance = o / n
        pilot = np.einsum("ljk,lj->jk", g**2 / a[:, None, :], off)
    elif normalization == MATRIX:
        theta = 1.0 / np.mean(o**2 / a, axis=1)  # (L,)
        signal = theta[:, None] * (o**2 / a) ** 2
        variance = theta[:, None] * o * (o**2 / a) / n
        pilot = np.einsum(
            "ljk,lj->jk", theta[:, None, None] * (o[:, None, :] * g / a[:, None, :]) ** 2, off
        )
    else:
        raise ScenarioError(f"unknown normalization {normalization!r}")
    return _grid(inputs, MRT, signal, variance, pilot)


@dataclass(frozen=True)
class SumRateGap:
    """Single-cell sum-rate advantage of vector over matrix normalization."""

    gap_bits: float
    vn_sum_rate: float
    mn_sum_rate: float
    vn_sinr: np.ndarray  # (K,)
    mn_sinr: float


def sum_rate_gap(
    gains: np.ndarray, num_antennas: int, rho_dl: float, sigma2: float
) -> SumRateGap:
    """Zero-forcing sum-rate gap in a single cell, high training SNR regime.

    ``gains`` are the K own-cell large-scale gains. Under vector
    normalization each user's SINR is proportional to its own gain; under
    matrix normalization every user gets the harmonic mean. The gap is
    nonnegative by convexity and zero exactly when all gains are equal.
    """
    d = np.asarray(gains, float)
    k = d.size
    if not num_antennas > k:
        raise ScenarioError("need more antennas than users")
    if np.any(d <= 0):
        raise ScenarioError("gains must be positive")
    ub = 1.0 - k / num_antennas
    scale = sigma2 / (num_antennas * rho_dl * ub)
    gap = float(
        np.sum(np.log2(1.0 + 1.0 / (scale / d))) - k * np.log2(1.0 + 1.0 / (scale * np.mean(1.0 / d)))
    )
    vn_sinr = (num_antennas - k) * rho_dl * d / sigma2
    mn_sinr = float((num_antennas - k) * rho_dl / sigma2 / np.mean(1.0 / d))
    vn_sum = float(np.sum(np.log2(1.0 + vn_sinr)))
    mn_sum = float(k * np.log2(1.0 + mn_sinr))
    return SumRateGap(
        gap_bits=gap, vn_sum_rate=vn_sum, mn_sum_rate=mn_sum, vn_sinr=vn_sinr, mn_sinr=mn_sinr
    )


@dataclass(frozen=True)
class PcinrReport:
    """PCINR per user with its significance region.

    Region 1: pilot contamination below 10% of noise plus interference.
    Region 3: pilot contamination dominates (ratio above one).
    Region 2: everything in between, boundaries included.
    """

    values: np.ndarray  # (L, K)
    regions: np.ndarray  # (L, K) ints in {1, 2, 3}
    scheme: Optional[str] = None
    normalization: Optional[str] = None


def classify_pcinr(value: float) -> int:
    if value < PCINR_NEGLIGIBLE:
        return 1
    if value > PCINR_DOMINANT:
        return 3
    return 2


def pcinr(
    grid: SinrGrid, scheme: Optional[str] = None, normalization: Optional[str] = None
) -> PcinrReport:
    """Pilot-contamination-to-interference-plus-noise ratio of a breakdown.

    The denominator includes the beamforming-uncertainty variance; it is
    the full non-coherent part of the SINR denominator.
    """
    denom = grid.noise + grid.variance + grid.noncoherent_interference
    if np.any(denom <= 0):
        raise ZeroDivisionError("PCINR undefined: zero noise-plus-interference")
    values = grid.pilot_contamination / denom
    regions = np.vectorize(classify_pcinr, otypes=[int])(values)
    return PcinrReport(values=values, regions=regions, scheme=scheme, normalization=normalization)
