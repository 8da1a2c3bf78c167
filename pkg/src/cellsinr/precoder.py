"""Precoding directions and power normalization.

Directions come from the estimated own-cell channels; the power weights
then meet the per-BS average constraint ``E[tr(G G^H)] = K`` either per
user (vector normalization, every user gets the same average power) or per
cell (matrix normalization, one scalar for the whole matrix). The weights
divide by ensemble expectations of the direction powers, so callers supply
those expectations, estimated from draws or from the asymptotic theory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

MRT = "mrt"
ZF = "zf"
RZF = "rzf"
VECTOR = "vn"
MATRIX = "mn"

SCHEMES = (MRT, ZF, RZF)
NORMALIZATIONS = (VECTOR, MATRIX)


class PrecodingError(ValueError):
    pass


@dataclass(frozen=True)
class PrecoderConfig:
    scheme: str
    normalization: str
    alpha: Optional[float] = None  # rzf regularizer, > 0
    ridge_matrix: Optional[np.ndarray] = None  # optional Hermitian PSD term added for rzf

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise PrecodingError(f"unknown scheme {self.scheme!r}")
        if self.normalization not in NORMALIZATIONS:
            raise PrecodingError(f"unknown normalization {self.normalization!r}")
        if self.scheme == RZF and self.alpha is not None and not self.alpha > 0:
            raise PrecodingError("rzf regularizer must satisfy alpha > 0")

    @property
    def label(self) -> str:
        return f"{self.scheme}-{self.normalization}"


def default_rzf_alpha(scenario) -> float:
    """MMSE-flavored default regularizer, sigma2 * K / (N * rho_dl)."""
    return (
        scenario.power.sigma2
        * scenario.ues_per_cell
        / (scenario.num_antennas * scenario.power.rho_dl)
    )


def build_directions(h_hat: np.ndarray, config: PrecoderConfig, alpha: Optional[float] = None):
    """Unnormalized precoding directions from estimates ``h_hat (..., N, K)``.

    Supports arbitrary batch dimensions in front of the (antenna, user)
    axes. ``alpha`` overrides the config value for rzf.
    """
    if config.scheme == MRT:
        return h_hat
    if config.scheme == ZF:
        gram = np.swapaxes(h_hat, -1, -2).conj() @ h_hat
        try:
            inv_gram = np.linalg.inv(gram)
        except np.linalg.LinAlgError as exc:
            raise PrecodingError(
                "zero-forcing needs full-column-rank channel estimates; "
                "the estimated channel Gram matrix is singular"
            ) from exc
        return h_hat @ inv_gram
    # rzf
    a = alpha if alpha is not None else config.alpha
    if a is None or not a > 0:
        raise PrecodingError("rzf regularizer must satisfy alpha > 0")
    n = h_hat.shape[-2]
    m = h_hat @ np.swapaxes(h_hat, -1, -2).conj()
    m = m + (n * a) * np.eye(n)
    if config.ridge_matrix is not None:
        m = m + config.ridge_matrix
    return np.linalg.solve(m, h_hat)


def vn_weights(expected_col_power: np.ndarray) -> np.ndarray:
    """Per-user weights ``1 / E[||f_k||^2]``."""
    expected_col_power = np.asarray(expected_col_power, float)
    if np.any(expected_col_power <= 0):
        raise PrecodingError("cannot normalize a zero-power precoding column")
    return 1.0 / expected_col_power

def mn_weight(expected_total_power: float, ues_per_cell: int) -> float:
    """Single per-cell weight ``K / E[tr(F F^H)]``."""
    if not expected_total_power > 0:
        raise PrecodingError("cannot normalize a zero-power precoding matrix")
    return ues_per_cell / expected_total_power


def normalize(F: np.ndarray, normalization: str, expected_col_power: np.ndarray) -> np.ndarray:
    """Diagonal weights for ``G = F diag(weights)^(1/2)`` from ensemble column powers."""
    expected_col_power = np.asarray(expected_col_power, float)
    k = F.shape[-1]
    if normalization == VECTOR:
        return vn_weights(expected_col_power)
    return np.full(k, mn_weight(float(expected_col_power.sum()), k))


def apply_weights(F: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return F * np.sqrt(weights)
