"""Command line client for the experiment service.

Verbs: ``run``, ``validate``, ``list-experiments`` (and ``serve`` to start
the HTTP service). By default the CLI calls the same handlers the service
exposes, in process; with ``--server URL`` it talks to a running service
instead. Either way the CSV artifacts are written locally and are
byte-identical for identical manifests.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    ExperimentResult,
    ExperimentSpec,
    builtin_experiments,
    de_mc_gap,
    run_experiment,
    validate,
    write_result,
)
from .service.app import resolve_spec
from .service.schemas import ExperimentRunRequest


def _fail(errors, code=2):
    json.dump({"status": "error", "errors": errors}, sys.stderr, indent=2)
    sys.stderr.write("\n")
    return code


def _load_spec(args) -> ExperimentSpec:
    request = ExperimentRunRequest(
        name=args.name,
        spec=ExperimentSpec.model_validate_json(Path(args.config).read_text())
        if args.config
        else None,
        trials=args.trials,
        seed=args.seed,
        engines=args.engines.split(",") if args.engines else None,
        threads=getattr(args, "threads", 1),
    )
    return resolve_spec(request)


def _run_remote(args, spec: ExperimentSpec):
    import httpx

    payload = ExperimentRunRequest(spec=spec, threads=args.threads)
    resp = httpx.post(
        args.server.rstrip("/") + "/experiments/run",
        json=payload.model_dump(mode="json"),
        timeout=None,
    )
    resp.raise_for_status()
    body = resp.json()
    return ExperimentResult(
        spec=spec,
        ue_rows=body["ue_rows"],
        cell_rows=body["cell_rows"],
        manifest=body["manifest"],
    )


def cmd_run(args) -> int:
    try:
        spec = _load_spec(args)
    except ValueError as exc:
        return _fail([str(exc)])
    diagnostics = validate(spec)
    errors = [d.message for d in diagnostics if d.severity == "error"]
    if errors:
        return _fail(errors)
    if args.server:
        result = _run_remote(args, spec)
    else:
        result = run_experiment(spec, threads=args.threads)
    paths = write_result(result, args.out)
    print(f"{spec.name}: {len(result.ue_rows)} ue rows, {len(result.cell_rows)} cell rows")
    gap = de_mc_gap(result)
    if gap is not None:
        print(f"  max per-user |de-mc|/mc sinr gap: {gap:.2%}")
    for kind, path in paths.items():
        print(f"  {kind}: {path}")
    return 0


def cmd_validate(args) -> int:
    try:
        spec = _load_spec(args)
    except ValueError as exc:
        return _fail([str(exc)])
    if args.server:
        import httpx

        resp = httpx.post(
            args.server.rstrip("/") + "/validate",
            json={"spec": spec.model_dump(mode="json")},
            timeout=None,
        )
        resp.raise_for_status()
        body = resp.json()
        diagnostics = body["diagnostics"]
        valid = body["valid"]
    else:
        report = validate(spec)
        diagnostics = [d.model_dump() for d in report]
        valid = not any(d.severity == "error" for d in report)
    json.dump({"valid": valid, "diagnostics": diagnostics}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if valid else 2


def cmd_list(args) -> int:
    if args.server:
        import httpx

        resp = httpx.get(args.server.rstrip("/") + "/experiments", timeout=None)
        resp.raise_for_status()
        entries = resp.json()
    else:
        entries = [
            {"name": name, "description": spec.description}
            for name, spec in sorted(builtin_experiments().items())
        ]
    for entry in entries:
        print(f"{entry['name']}: {entry['description']}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("cellsinr.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellsinr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec_args(p, with_run_args=True):
        p.add_argument("name", nargs="?", help="built-in experiment name")
        p.add_argument("--config", help="experiment spec JSON file")
        p.add_argument("--seed", type=int, default=None, help="override the mc seed")
        p.add_argument("--trials", type=int, default=None, help="override the mc trial count")
        p.add_argument("--engines", default=None, help="comma-separated engine subset")
        p.add_argument("--server", default=None, help="service URL; default runs in process")
        if with_run_args:
            p.add_argument("--out", default="results", help="output directory")
            p.add_argument("--threads", type=int, default=1, help="mc worker threads")

    run_p = sub.add_parser("run", help="run an experiment and write CSV artifacts")
    add_spec_args(run_p)
    run_p.set_defaults(func=cmd_run)

    val_p = sub.add_parser("validate", help="report assumption violations without running")
    add_spec_args(val_p, with_run_args=False)
    val_p.set_defaults(func=cmd_validate)

    list_p = sub.add_parser("list-experiments", help="list built-in experiments")
    list_p.add_argument("--server", default=None)
    list_p.set_defaults(func=cmd_list)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # keep the exit contract machine readable
        return _fail([f"{type(exc).__name__}: {exc}"], code=1)


if __name__ == "__main__":
    sys.exit(main())
