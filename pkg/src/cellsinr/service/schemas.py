"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict

from ..experiments import Diagnostic, ExperimentSpec
from ..scenario import ScenarioConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class ExperimentInfo(BaseModel):
    name: str
    description: str


class ValidateRequest(BaseModel):
    spec: ExperimentSpec


class ValidateResponse(BaseModel):
    valid: bool
    diagnostics: list[Diagnostic]


class EvaluateRequest(BaseModel):
    """One scenario, several scheme/normalization pairs, one engine."""

    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioConfig
    schemes: list[str]
    engine: Literal["de", "mc", "closed_form"] = "de"
    trials: int = 500  # mc only
    seed: int = 1  # mc only
    rzf_alpha: Optional[float] = None


class UeRow(BaseModel):
    """One user's evaluated breakdown; mirrors the CSV schema."""

    experiment: str
    point: int
    drop: int = 0
    N: int
    K: int
    dof_per_ue: Optional[float] = None
    scheme: str
    normalization: str
    engine: str
    cell: Optional[int] = None
    ue: Optional[int] = None
    signal: Optional[float] = None
    noise: Optional[float] = None
    variance: Optional[float] = None
    noncoherent_interference: Optional[float] = None
    pilot_contamination: Optional[float] = None
    sinr: Optional[float] = None
    rate_bits_hz: Optional[float] = None
    pcinr: Optional[float] = None
    pcinr_region: Optional[int] = None
    trials: Optional[int] = None
    stderr_signal: Optional[float] = None
    stderr_variance: Optional[float] = None
    stderr_noncoherent_interference: Optional[float] = None
    stderr_pilot_contamination: Optional[float] = None
    error: str = ""


class CellRow(BaseModel):
    experiment: str
    point: int
    drop: int = 0
    N: int
    K: int
    scheme: str
    normalization: str
    engine: str
    cell: Optional[int] = None
    sum_rate_bits_hz: Optional[float] = None
    mean_pcinr: Optional[float] = None
    trials: Optional[int] = None
    error: str = ""


class EvaluateResponse(BaseModel):
    ue_rows: list[UeRow]
    cell_rows: list[CellRow]


class ExperimentRunRequest(BaseModel):
    """Run a built-in by name, or a full inline spec, with optional overrides."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    spec: Optional[ExperimentSpec] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    engines: Optional[list[Literal["mc", "de", "closed_form"]]] = None
    threads: int = 1


class ExperimentRunResponse(BaseModel):
    manifest: dict
    ue_rows: list[UeRow]
    cell_rows: list[CellRow]
