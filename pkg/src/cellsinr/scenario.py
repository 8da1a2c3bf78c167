"""Network geometry, large-scale fading and per-link channel correlation.

A scenario pins down everything that is fixed across fast-fading
realizations: base station and user positions, the distance-driven gain of
every BS-to-user link, power figures in linear units, and the antenna
correlation model shared by all links. All randomness is seeded so a
scenario can be rebuilt bit-exactly from its config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

UNCORRELATED = "uncorrelated"
STEERING = "steering"

# center cell plus one hexagonal ring; neighbor distance 2*radius*cos(30 deg)
MAX_CELLS = 7


class ScenarioError(ValueError):
    """Inconsistent scenario description."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def noise_power_watts(noise_dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power over the signal bandwidth, in watts."""
    return 10.0 ** ((noise_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz


@dataclass(frozen=True)
class PowerConfig:
    """Linear power figures. dB only exists at the config boundary."""

    rho_tr: float  # training SNR factor
    rho_dl: float  # downlink SNR factor
    sigma2: float  # noise power

    def __post_init__(self):
        for name in ("rho_tr", "rho_dl", "sigma2"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be strictly positive")

    @classmethod
    def from_db(cls, rho_tr_db, rho_dl_db, bandwidth_hz, noise_dbm_per_hz):
        return cls(
            rho_tr=db_to_linear(rho_tr_db),
            rho_dl=db_to_linear(rho_dl_db),
            sigma2=noise_power_watts(noise_dbm_per_hz, bandwidth_hz),
        )


@dataclass(frozen=True)
class CorrelationModel:
    """Antenna correlation shared by every link.

    ``uncorrelated`` uses an identity correlation. ``steering`` builds the
    correlation square root from a uniform linear array response sampled at
    equispaced angles, with ``antenna_spacing`` in wavelengths.
    """

    variant: str = STEERING
    antenna_spacing: Optional[float] = 0.3

    def __post_init__(self):
        if self.variant not in (UNCORRELATED, STEERING):
            raise ScenarioError(f"unknown correlation variant {self.variant!r}")
        if self.variant == STEERING:
            if self.antenna_spacing is None or not self.antenna_spacing > 0:
                raise ScenarioError("steering correlation needs antenna_spacing > 0")


@dataclass(frozen=True)
class Geometry:
    """Cell layout and user positions. Distances are meters."""

    cell_radius: float
    exclusion_radius: float
    bs_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (L, K, 2)
    pathloss_exponent: float

    def __post_init__(self):
        object.__setattr__(self, "bs_positions", _readonly(np.asarray(self.bs_positions, float)))
        object.__setattr__(self, "ue_positions", _readonly(np.asarray(self.ue_positions, float)))
        if not 0 <= self.exclusion_radius < self.cell_radius:
            raise ScenarioError("need 0 <= exclusion_radius < cell_radius")
        if self.bs_positions.ndim != 2 or self.bs_positions.shape[1] != 2:
            raise ScenarioError("bs_positions must be (L, 2)")
        if self.ue_positions.ndim != 3 or self.ue_positions.shape[2] != 2:
            raise ScenarioError("ue_positions must be (L, K, 2)")
        if self.ue_positions.shape[0] != self.bs_positions.shape[0]:
            raise ScenarioError("ue_positions and bs_positions disagree on cell count")
        if self.num_cells < 1 or self.ues_per_cell < 1:
            raise ScenarioError("need at least one cell and one UE per cell")
        own = np.linalg.norm(self.ue_positions - self.bs_positions[:, None, :], axis=2)
        if np.any(own > self.cell_radius * (1 + 1e-12)):
            raise ScenarioError("a UE lies outside its serving cell radius")
        if np.any(own < self.exclusion_radius * (1 - 1e-12)):
            raise ScenarioError("a UE lies inside the exclusion disc")

    @property
    def num_cells(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def ues_per_cell(self) -> int:
        return self.ue_positions.shape[1]


def hex_cell_centers(num_cells: int, cell_radius: float) -> np.ndarray:
    """Center cell at the origin plus up to six ring neighbors."""
    if not 1 <= num_cells <= MAX_CELLS:
        raise ScenarioError(f"layout supports 1..{MAX_CELLS} cells, got {num_cells}")
    ring = 2.0 * cell_radius * math.cos(math.pi / 6.0)
    centers = [(0.0, 0.0)]
    for i in range(6):
        ang = i * math.pi / 3.0
        centers.append((ring * math.cos(ang), ring * math.sin(ang)))
    return np.array(centers[:num_cells])


def drop_ues(
    bs_positions: np.ndarray,
    cell_radius: float,
    exclusion_radius: float,
    ues_per_cell: int,
    seed: int,
    pathloss_exponent: float = 3.7,
) -> Geometry:
    """Drop users uniformly over each cell disc, outside the exclusion disc.

    Rejection sampling from the bounding square keeps the distribution
    exactly uniform over the annulus. Deterministic for a fixed seed.
    """
    if ues_per_cell <= 0:
        raise ScenarioError("ues_per_cell must be positive")
    if not 0 <= exclusion_radius < cell_radius:
        raise ScenarioError("need 0 <= exclusion_radius < cell_radius")
    bs_positions = np.asarray(bs_positions, float)
    rng = np.random.default_rng(seed)
    ues = np.empty((bs_positions.shape[0], ues_per_cell, 2))
    for l, center in enumerate(bs_positions):
        for k in range(ues_per_cell):
            while True:
                p = rng.uniform(-cell_radius, cell_radius, size=2)
                r = math.hypot(p[0], p[1])
                if exclusion_radius <= r <= cell_radius:
                    ues[l, k] = center + p
                    break
    return Geometry(
        cell_radius=cell_radius,
        exclusion_radius=exclusion_radius,
        bs_positions=bs_positions,
        ue_positions=ues,
        pathloss_exponent=pathloss_exponent,
    )


def build_large_scale(geometry: Geometry) -> np.ndarray:
    """Distance power-law gains, ``gains[l, j, k]`` from BS ``l`` to UE ``k`` of cell ``j``."""
    diff = geometry.ue_positions[None, :, :, :] - geometry.bs_positions[:, None, None, :]
    dist = np.linalg.norm(diff, axis=3)
    if np.any(dist <= 0):
        raise ScenarioError("zero BS-UE distance, gain undefined")
    return dist ** (-geometry.pathloss_exponent)


def steering_vectors(num_antennas: int, antenna_spacing: float) -> np.ndarray:
    """Array response matrix, one unit-norm column per equispaced angle."""
    n = np.arange(num_antennas)
    angles = -np.pi / 2 + n * np.pi / num_antennas
    phase = -2j * np.pi * antenna_spacing * np.outer(n, np.sin(angles))
    return np.exp(phase) / math.sqrt(num_antennas)


def correlation_sqrt_base(model: CorrelationModel, num_antennas: int) -> np.ndarray:
    """Square-root factor shared by all links; per-link sqrt is sqrt(gain) times this."""
    if model.variant == UNCORRELATED:
        return np.eye(num_antennas, dtype=complex)
    return steering_vectors(num_antennas, model.antenna_spacing)


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one network drop.

    ``gains[l, j, k]`` is the large-scale gain from BS ``l`` to UE ``k``
    served by cell ``j``. The full link correlation is ``gains[l, j, k]``
    times the shared base matrix of the correlation model.
    """

    num_antennas: int
    ues_per_cell: int
    power: PowerConfig
    correlation: CorrelationModel
    gains: np.ndarray  # (L, L, K)
    geometry: Optional[Geometry] = None

    def __post_init__(self):
        object.__setattr__(self, "gains", _readonly(np.asarray(self.gains, float)))
        g = self.gains
        if g.ndim != 3 or g.shape[0] != g.shape[1] or g.shape[2] != self.ues_per_cell:
            raise ScenarioError("gains must have shape (L, L, K)")
        if np.any(g <= 0):
            raise ScenarioError("all large-scale gains must be positive")
        if self.num_antennas <= self.ues_per_cell:
            raise ScenarioError(
                f"need more antennas than UEs per cell "
                f"(N={self.num_antennas}, K={self.ues_per_cell})"
            )
        if self.geometry is not None and (
            self.geometry.num_cells != g.shape[0]
            or self.geometry.ues_per_cell != self.ues_per_cell
        ):
            raise ScenarioError("geometry does not match gains shape")

    @property
    def num_cells(self) -> int:
        return self.gains.shape[0]

    def sqrt_base(self) -> np.ndarray:
        return correlation_sqrt_base(self.correlation, self.num_antennas)

    def correlation_base(self) -> np.ndarray:
        """Shared Hermitian PSD base; the (l,j,k) link correlation is gains[l,j,k] times it."""
        a = self.sqrt_base()
        if self.correlation.variant == UNCORRELATED:
            return np.eye(self.num_antennas, dtype=complex)
        b = a @ a.conj().T
        return (b + b.conj().T) / 2


def build_theta(scenario: Scenario) -> np.ndarray:
    """Dense per-link correlation matrices, shape (L, L, K, N, N).

    Materializes every link; meant for small scenarios and tests. The
    pipeline itself works from the shared base plus scalar gains.
    """
    base = scenario.correlation_base()
    return scenario.gains[..., None, None] * base


def scenario_from_gains(
    gains: np.ndarray,
    num_antennas: int,
    power: PowerConfig,
    correlation: CorrelationModel = CorrelationModel(variant=UNCORRELATED, antenna_spacing=None),
) -> Scenario:
    """Scenario with explicitly supplied gains and no geometry (synthetic studies)."""
    gains = np.asarray(gains, float)
    return Scenario(
        num_antennas=num_antennas,
        ues_per_cell=gains.shape[2],
        power=power,
        correlation=correlation,
        gains=gains,
    )


class ScenarioConfig(BaseModel):
    """Serializable scenario description; the reproducibility surface.

    Rebuilding from an identical config yields bit-identical geometry and
    gains. Powers are given in dB / dBm here and converted to linear once.
    """

    model_config = ConfigDict(extra="forbid")

    N: int
    K: int
    L: int = 7
    cell_radius_m: float = 1000.0
    exclusion_radius_m: float = 100.0
    pathloss_exponent: float = 3.7
    rho_tr_db: float = 6.0
    rho_dl_db: float = 10.0
    bandwidth_hz: float = 20e6
    noise_dbm_per_hz: float = -174.0
    correlation: Literal["uncorrelated", "steering"] = "steering"
    antenna_spacing: float = 0.3
    seed: int = 0


def build_scenario(config: ScenarioConfig) -> Scenario:
    geometry = drop_ues(
        hex_cell_centers(config.L, config.cell_radius_m),
        config.cell_radius_m,
        config.exclusion_radius_m,
        config.K,
        config.seed,
        config.pathloss_exponent,
    )
    spacing = config.antenna_spacing if config.correlation == STEERING else None
    return Scenario(
        num_antennas=config.N,
        ues_per_cell=config.K,
        power=PowerConfig.from_db(
            config.rho_tr_db, config.rho_dl_db, config.bandwidth_hz, config.noise_dbm_per_hz
        ),
        correlation=CorrelationModel(variant=config.correlation, antenna_spacing=spacing),
        gains=build_large_scale(geometry),
        geometry=geometry,
    )


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(config.model_dump_json(indent=2) + "\n")


def load_config(path: str | Path) -> ScenarioConfig:
    return ScenarioConfig.model_validate_json(Path(path).read_text())
