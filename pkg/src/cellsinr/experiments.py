"""Experiment definitions, runner and CSV emission.

An experiment binds one scenario template to a sweep over (antennas,
users) points, a set of scheme/normalization pairs and a set of engines
(``mc``, ``de``, ``closed_form``). Output is long-format: one row per user
per engine per scheme per sweep point, so engines join on their keys. A
manifest records the full spec, seed and package version; re-running the
same manifest reproduces byte-identical CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict

from . import __version__
from .channel import compute_statistics
from .closed_form import UncorrelatedInputs, mrt_closed_form, pcinr, zf_closed_form
from .det_equiv import de_sinr
from .montecarlo import estimate_sinr
from .precoder import MRT, RZF, ZF, PrecoderConfig
from .scenario import STEERING, ScenarioConfig, build_scenario

ENGINES = ("mc", "de", "closed_form")

UE_COLUMNS = [
    "experiment",
    "point",
    "drop",
    "N",
    "K",
    "dof_per_ue",
    "scheme",
    "normalization",
    "engine",
    "cell",
    "ue",
    "signal",
    "noise",
    "variance",
    "noncoherent_interference",
    "pilot_contamination",
    "sinr",
    "rate_bits_hz",
    "pcinr",
    "pcinr_region",
    "trials",
    "stderr_signal",
    "stderr_variance",
    "stderr_noncoherent_interference",
    "stderr_pilot_contamination",
    "error",
]

CELL_COLUMNS = [
    "experiment",
    "point",
    "drop",
    "N",
    "K",
    "scheme",
    "normalization",
    "engine",
    "cell",
    "sum_rate_bits_hz",
    "mean_pcinr",
    "trials",
    "error",
]


class EngineError(RuntimeError):
    """Engine not applicable to this scheme/scenario; recorded per row."""


class SweepPoint(BaseModel):
    model_config = ConfigDict(extra="forbid")
    N: int
    K: int


class ExperimentSpec(BaseModel):
    """Complete, serializable description of one experiment run."""

    model_config = ConfigDict(extra="forbid")

    name: str
    scenario: ScenarioConfig
    sweep: list[SweepPoint]
    schemes: list[str]  # labels like "zf-vn"
    engines: list[Literal["mc", "de", "closed_form"]]
    trials: int = 500
    seed: int = 1
    # independent user drops per sweep point; channel draws are redrawn per
    # drop, matching the outer (geometry) times inner (channel) protocol
    geometry_realizations: int = 1
    rzf_alpha: Optional[float] = None
    description: str = ""


class Diagnostic(BaseModel):
    severity: Literal["error", "warning"]
    code: str
    message: str


def parse_scheme(label: str) -> PrecoderConfig:
    try:
        scheme, normalization = label.split("-")
    except ValueError:
        raise ValueError(f"scheme label must look like 'zf-vn', got {label!r}") from None
    return PrecoderConfig(scheme=scheme, normalization=normalization)


def validate(spec: ExperimentSpec) -> list[Diagnostic]:
    """Report assumption violations without running anything."""
    out: list[Diagnostic] = []

    def err(code, message):
        out.append(Diagnostic(severity="error", code=code, message=message))

    def warn(code, message):
        out.append(Diagnostic(severity="warning", code=code, message=message))

    if not spec.sweep:
        err("empty-sweep", "sweep must contain at least one (N, K) point")
    if not spec.engines:
        err("no-engine", "select at least one engine")
    pairs = []
    for label in spec.schemes:
        try:
            pairs.append(parse_scheme(label))
        except ValueError as exc:
            err("bad-scheme", str(exc))
    if not spec.schemes:
        err("no-scheme", "select at least one scheme/normalization pair")

    cfg = spec.scenario
    if not 1 <= cfg.L <= 7:
        err("bad-layout", f"layout supports 1..7 cells, got L={cfg.L}")
    if not 0 <= cfg.exclusion_radius_m < cfg.cell_radius_m:
        err("bad-radii", "need 0 <= exclusion radius < cell radius")
    if cfg.correlation == STEERING and not cfg.antenna_spacing > 0:
        err("bad-spacing", "steering correlation needs antenna_spacing > 0")

    needs_zf = any(p.scheme in (ZF, RZF) for p in pairs)
    for i, pt in enumerate(spec.sweep):
        if pt.N <= 0 or pt.K <= 0:
            err("bad-point", f"sweep point {i}: N and K must be positive")
        elif pt.N <= pt.K:
            msg = f"sweep point {i}: needs more antennas than users (N={pt.N}, K={pt.K})"
            if needs_zf:
                msg += "; zero forcing requires full-column-rank estimates"
            err("antennas-not-greater", msg)

    if any(p.scheme == RZF for p in pairs):
        if spec.rzf_alpha is not None and not spec.rzf_alpha > 0:
            err("bad-alpha", "rzf regularizer must be positive (alpha > 0)")
    if "mc" in spec.engines and spec.trials < 2:
        err("too-few-trials", "mc engine needs trials >= 2")
    if spec.geometry_realizations < 1:
        err("bad-drops", "geometry_realizations must be at least 1")
    if "mc" in spec.engines and spec.seed < 0:
        err("bad-seed", "mc seed must be nonnegative")
    if "closed_form" in spec.engines and cfg.correlation == STEERING:
        warn(
            "closed-form-correlated",
            "closed_form engine only covers the uncorrelated model; those rows "
            "will carry per-row errors",
        )
    if "closed_form" in spec.engines and any(p.scheme == RZF for p in pairs):
        warn(
            "closed-form-rzf",
            "closed_form engine has no rzf expressions; those rows will carry "
            "per-row errors",
        )
    return out


def _evaluate(engine, scenario, stats, pair: PrecoderConfig, spec: ExperimentSpec, threads):
    if engine == "de":
        cfg = pair if spec.rzf_alpha is None else PrecoderConfig(
            scheme=pair.scheme, normalization=pair.normalization, alpha=spec.rzf_alpha
        )
        return de_sinr(scenario, cfg, stats=stats).grid, None, None
    if engine == "closed_form":
        inputs = UncorrelatedInputs.from_scenario(scenario)  # raises on steering
        if pair.scheme == ZF:
            return zf_closed_form(inputs, pair.normalization), None, None
        if pair.scheme == MRT:
            return mrt_closed_form(inputs, pair.normalization), None, None
        raise EngineError("closed_form engine has no rzf expressions")
    if engine == "mc":
        cfg = pair if spec.rzf_alpha is None else PrecoderConfig(
            scheme=pair.scheme, normalization=pair.normalization, alpha=spec.rzf_alpha
        )
        est = estimate_sinr(
            scenario, cfg, trials=spec.trials, seed=spec.seed, stats=stats, threads=threads
        )
        return est.grid, est.trials, est.stderr
    raise EngineError(f"unknown engine {engine!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    ue_rows: list
    cell_rows: list
    manifest: dict


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Run every (point, scheme, engine) combination of the spec.

    Inapplicable combinations produce rows whose ``error`` field explains
    why; the run continues.
    """
    problems = [d for d in validate(spec) if d.severity == "error"]
    if problems:
        raise ValueError("; ".join(d.message for d in problems))

    ue_rows, cell_rows = [], []
    for point_idx, pt in enumerate(spec.sweep):
        for drop_idx in range(spec.geometry_realizations):
            scen_cfg = spec.scenario.model_copy(
                update={"N": pt.N, "K": pt.K, "seed": spec.scenario.seed + drop_idx}
            )
            scenario = build_scenario(scen_cfg)
            stats = compute_statistics(scenario)
            point_spec = (
                spec if drop_idx == 0 else spec.model_copy(update={"seed": spec.seed + drop_idx})
            )
            _run_point(
                spec, point_spec, scenario, stats, pt, point_idx, drop_idx,
                threads, ue_rows, cell_rows,
            )
    manifest = {
        "experiment": spec.name,
        "spec": spec.model_dump(),
        "package_version": __version__,
        "ue_rows": len(ue_rows),
        "cell_rows": len(cell_rows),
    }
    return ExperimentResult(spec=spec, ue_rows=ue_rows, cell_rows=cell_rows, manifest=manifest)


def _run_point(
    spec, point_spec, scenario, stats, pt, point_idx, drop_idx, threads, ue_rows, cell_rows
):
    for label in spec.schemes:
        pair = parse_scheme(label)
        for engine in spec.engines:
            meta = {
                "experiment": spec.name,
                "point": point_idx,
                "drop": drop_idx,
                "N": pt.N,
                "K": pt.K,
                "scheme": pair.scheme,
                "normalization": pair.normalization,
                "engine": engine,
            }
            try:
                grid, trials, stderr = _evaluate(
                    engine, scenario, stats, pair, point_spec, threads
                )
            except Exception as exc:  # inapplicable engine; keep going
                msg = str(exc)
                ue_rows.append(
                    {**meta, "dof_per_ue": pt.N / pt.K, "cell": None, "ue": None, "error": msg}
                )
                cell_rows.append({**meta, "cell": None, "error": msg})
                continue
            report = pcinr(grid, scheme=pair.scheme, normalization=pair.normalization)
            for cell in range(grid.num_cells):
                for ue in range(grid.ues_per_cell):
                    row = {
                        **meta,
                        "dof_per_ue": pt.N / pt.K,
                        "cell": cell,
                        "ue": ue,
                        "signal": float(grid.signal[cell, ue]),
                        "noise": float(grid.noise),
                        "variance": float(grid.variance[cell, ue]),
                        "noncoherent_interference": float(
                            grid.noncoherent_interference[cell, ue]
                        ),
                        "pilot_contamination": float(grid.pilot_contamination[cell, ue]),
                        "sinr": float(grid.sinr[cell, ue]),
                        "rate_bits_hz": float(grid.rate[cell, ue]),
                        "pcinr": float(report.values[cell, ue]),
                        "pcinr_region": int(report.regions[cell, ue]),
                        "trials": trials,
                        "error": "",
                    }
                    if stderr is not None:
                        row["stderr_signal"] = float(stderr["signal"][cell, ue])
                        row["stderr_variance"] = float(stderr["variance"][cell, ue])
                        row["stderr_noncoherent_interference"] = float(
                            stderr["noncoherent_interference"][cell, ue]
                        )
                        row["stderr_pilot_contamination"] = float(
                            stderr["pilot_contamination"][cell, ue]
                        )
                    ue_rows.append(row)
                cell_rows.append(
                    {
                        **meta,
                        "cell": cell,
                        "sum_rate_bits_hz": float(grid.sum_rate(cell)),
                        "mean_pcinr": float(report.values[cell].mean()),
                        "trials": trials,
                        "error": "",
                    }
                )


def de_mc_gap(result: ExperimentResult):
    """Max per-user relative SINR gap between the de and mc engines.

    Joins rows on (point, drop, scheme, normalization, cell, ue); returns
    None when either engine is absent.
    """
    sinr = {}
    for row in result.ue_rows:
        if row.get("error") or row.get("cell") is None:
            continue
        key = (
            row["point"],
            row["drop"],
            row["scheme"],
            row["normalization"],
            row["cell"],
            row["ue"],
        )
        sinr.setdefault(key, {})[row["engine"]] = row["sinr"]
    gaps = [
        abs(v["de"] - v["mc"]) / v["mc"] for v in sinr.values() if "de" in v and "mc" in v
    ]
    return max(gaps) if gaps else None


def _write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


def write_result(result: ExperimentResult, out_dir: str | Path) -> dict:
    """Emit ``<name>_ue.csv``, ``<name>_cell.csv`` and the JSON manifest."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.spec.name
    paths = {
        "ue": out / f"{name}_ue.csv",
        "cell": out / f"{name}_cell.csv",
        "manifest": out / f"{name}_manifest.json",
    }
    _write_csv(paths["ue"], UE_COLUMNS, result.ue_rows)
    _write_csv(paths["cell"], CELL_COLUMNS, result.cell_rows)
    paths["manifest"].write_text(json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()}


def builtin_experiments() -> dict[str, ExperimentSpec]:
    """Desk-scale replications of the reference sweeps."""
    fig_scenario = ScenarioConfig(N=40, K=8, L=7, correlation="steering", seed=101)
    table_scenario = ScenarioConfig(N=40, K=8, L=7, correlation="uncorrelated", seed=202)
    sweep_n = [40, 60, 80, 100, 120]
    specs = {
        "fig1": ExperimentSpec(
            name="fig1",
            scenario=fig_scenario,
            sweep=[SweepPoint(N=n, K=8) for n in sweep_n],
            schemes=["mrt-vn", "zf-vn", "rzf-vn", "zf-mn"],
            engines=["de", "mc"],
            trials=500,
            seed=2024,
            description="center-cell ergodic sum rate vs antenna count, 8 users per cell",
        ),
        "fig2": ExperimentSpec(
            name="fig2",
            scenario=fig_scenario.model_copy(update={"K": 16}),
            sweep=[SweepPoint(N=n, K=16) for n in sweep_n],
            schemes=["mrt-vn", "zf-vn", "rzf-vn", "zf-mn"],
            engines=["de", "mc"],
            trials=500,
            seed=2024,
            description="center-cell ergodic sum rate vs antenna count, 16 users per cell",
        ),
        "table1": ExperimentSpec(
            name="table1",
            scenario=table_scenario,
            sweep=[SweepPoint(N=40, K=8), SweepPoint(N=80, K=8)],
            schemes=["zf-vn", "zf-mn"],
            engines=["de", "mc", "closed_form"],
            trials=4000,
            seed=77,
            description="per-user zero-forcing SINR, asymptotic vs simulated, uncorrelated drop",
        ),
        "fig3": ExperimentSpec(
            name="fig3",
            scenario=table_scenario,
            sweep=[
                SweepPoint(N=r * k, K=k)
                for k in (5, 10, 15)
                for r in (2, 4, 6, 8, 10, 12, 14, 16, 20)
            ],
            schemes=["zf-mn", "rzf-mn", "zf-vn", "rzf-vn", "mrt-vn", "mrt-mn"],
            engines=["de"],
            trials=2,
            seed=1,
            description="pilot contamination to interference-plus-noise ratio vs N/K",
        ),
    }
    return specs
