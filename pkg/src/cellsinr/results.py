"""Per-user SINR decompositions shared by the Monte Carlo, deterministic
equivalent and closed-form engines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COMPONENTS = ("signal", "noise", "variance", "noncoherent_interference", "pilot_contamination")


@dataclass(frozen=True)
class SinrBreakdown:
    """One user's SINR split into its power contributions.

    ``sinr`` is ``signal / (noise + variance + noncoherent_interference +
    pilot_contamination)`` and ``rate`` is ``log2(1 + sinr)`` in bit/s/Hz.
    """

    signal: float
    noise: float
    variance: float
    noncoherent_interference: float
    pilot_contamination: float

    @property
    def denominator(self) -> float:
        return (
            self.noise
            + self.variance
            + self.noncoherent_interference
            + self.pilot_contamination
        )

    @property
    def sinr(self) -> float:
        return self.signal / self.denominator

    @property
    def rate(self) -> float:
        return float(np.log2(1.0 + self.sinr))


@dataclass(frozen=True)
class SinrGrid:
    """Breakdown arrays over (cell, ue); ``noise`` is one shared scalar."""

    signal: np.ndarray  # (L, K)
    noise: float
    variance: np.ndarray
    noncoherent_interference: np.ndarray
    pilot_contamination: np.ndarray

    @property
    def denominator(self) -> np.ndarray:
        return (
            self.noise
            + self.variance
            + self.noncoherent_interference
            + self.pilot_contamination
        )

    @property
    def sinr(self) -> np.ndarray:
        return self.signal / self.denominator

    @property
    def rate(self) -> np.ndarray:
        return np.log2(1.0 + self.sinr)

    @property
    def num_cells(self) -> int:
        return self.signal.shape[0]

    @property
    def ues_per_cell(self) -> int:
        return self.signal.shape[1]

    def per_ue(self, cell: int, ue: int) -> SinrBreakdown:
        return SinrBreakdown(
            signal=float(self.signal[cell, ue]),
            noise=float(self.noise),
            variance=float(self.variance[cell, ue]),
            noncoherent_interference=float(self.noncoherent_interference[cell, ue]),
            pilot_contamination=float(self.pilot_contamination[cell, ue]),
        )

    def sum_rate(self, cell: int) -> float:
        return float(self.rate[cell].sum())
