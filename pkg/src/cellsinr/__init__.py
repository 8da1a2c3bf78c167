"""Multicell massive MIMO downlink SINR engine.

Computes exact (Monte Carlo) and asymptotic (deterministic equivalent)
per-user SINR and achievable rate under MRT / ZF / RZF precoding with
vector or matrix power normalization, including the uncorrelated-fading
closed forms and the pilot-contamination diagnostic.
"""

__version__ = "0.1.0"

from .channel import ChannelDraw, ChannelStatistics, compute_statistics, draw_channels
from .closed_form import (
    PcinrReport,
    SumRateGap,
    UncorrelatedInputs,
    mrt_closed_form,
    pcinr,
    sum_rate_gap,
    zf_closed_form,
)
from .det_equiv import (
    ConvergenceError,
    DeSinr,
    DerivativeSolution,
    FixedPointSolution,
    ZfLimitSolution,
    de_sinr,
    solve_derivative,
    solve_fixed_point,
    solve_zf_limit,
)
from .montecarlo import McEstimate, estimate_sinr, sum_rate
from .precoder import (
    MATRIX,
    MRT,
    RZF,
    VECTOR,
    ZF,
    PrecoderConfig,
    PrecodingError,
    build_directions,
    default_rzf_alpha,
    normalize,
)
from .results import SinrBreakdown, SinrGrid
from .scenario import (
    CorrelationModel,
    Geometry,
    PowerConfig,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    build_large_scale,
    build_scenario,
    build_theta,
    drop_ues,
    hex_cell_centers,
    load_config,
    save_config,
    scenario_from_gains,
)

__all__ = [name for name in dir() if not name.startswith("_")]
