"""HTTP service exposing the SINR engines.

Evaluation endpoints are stateless wrappers around the core package; the
CLI is a thin client of the same handlers (in-process by default, over
HTTP with ``--server``).

Run with: ``uvicorn cellsinr.service.app:app``
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..experiments import (
    ExperimentResult,
    ExperimentSpec,
    SweepPoint,
    builtin_experiments,
    run_experiment,
    validate,
)
from . import schemas


def resolve_spec(request: schemas.ExperimentRunRequest) -> ExperimentSpec:
    """Materialize the spec a run request refers to, applying overrides."""
    if (request.name is None) == (request.spec is None):
        raise ValueError("give exactly one of 'name' or 'spec'")
    if request.name is not None:
        builtins = builtin_experiments()
        if request.name not in builtins:
            raise ValueError(
                f"unknown experiment {request.name!r}; known: {sorted(builtins)}"
            )
        spec = builtins[request.name]
    else:
        spec = request.spec
    updates = {}
    if request.trials is not None:
        updates["trials"] = request.trials
    if request.seed is not None:
        updates["seed"] = request.seed
    if request.engines is not None:
        updates["engines"] = request.engines
    return spec.model_copy(update=updates) if updates else spec


def evaluate(request: schemas.EvaluateRequest) -> ExperimentResult:
    """Single-point experiment equivalent of an evaluation request."""
    spec = ExperimentSpec(
        name="evaluate",
        scenario=request.scenario,
        sweep=[SweepPoint(N=request.scenario.N, K=request.scenario.K)],
        schemes=request.schemes,
        engines=[request.engine],
        trials=request.trials,
        seed=request.seed,
        rzf_alpha=request.rzf_alpha,
    )
    return run_experiment(spec)


def create_app() -> FastAPI:
    app = FastAPI(title="cellsinr", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/experiments", response_model=list[schemas.ExperimentInfo])
    def list_experiments():
        return [
            schemas.ExperimentInfo(name=name, description=spec.description)
            for name, spec in sorted(builtin_experiments().items())
        ]

    @app.post("/validate", response_model=schemas.ValidateResponse)
    def validate_spec(request: schemas.ValidateRequest):
        diagnostics = validate(request.spec)
        valid = not any(d.severity == "error" for d in diagnostics)
        return schemas.ValidateResponse(valid=valid, diagnostics=diagnostics)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_endpoint(request: schemas.EvaluateRequest):
        try:
            result = evaluate(request)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return schemas.EvaluateResponse(
            ue_rows=[schemas.UeRow.model_validate(r) for r in result.ue_rows],
            cell_rows=[schemas.CellRow.model_validate(r) for r in result.cell_rows],
        )

    @app.post("/experiments/run", response_model=schemas.ExperimentRunResponse)
    def run_endpoint(request: schemas.ExperimentRunRequest):
        try:
            spec = resolve_spec(request)
            result = run_experiment(spec, threads=request.threads)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return schemas.ExperimentRunResponse(
            manifest=result.manifest,
            ue_rows=[schemas.UeRow.model_validate(r) for r in result.ue_rows],
            cell_rows=[schemas.CellRow.model_validate(r) for r in result.cell_rows],
        )

    return app


app = create_app()
