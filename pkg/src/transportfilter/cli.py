"""Command-line interface.

Subcommands:

    run       load a scenario, simulate the truth, run the filter, and write
              metrics.csv, truth.csv, scenario.resolved.json, and mse.svg
    validate  load and validate a scenario, reporting the first failure
    truth     simulate and write only the ground-truth trajectory

Exit codes: 0 success, 1 scenario validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ScenarioError, TransportFilterError
from .filtering import run_filter
from .report import (
    render_mse_plot,
    write_metrics_csv,
    write_resolved_scenario,
    write_truth_csv,
)
from .scenario import load_scenario, with_overrides
from .simulate import simulate_truth

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transportfilter",
        description="Distributed transport-map filter simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_output=True):
        p.add_argument("--scenario", required=True, help="scenario file or bundled name")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if with_output:
            p.add_argument("--output", default="out", help="output directory (default: out)")

    run_p = sub.add_parser("run", help="run the filter and write all artifacts")
    add_common(run_p)
    run_p.add_argument("--particles", type=int, default=None, help="override the ensemble size")
    run_p.add_argument("--no-pca", action="store_true", help="disable PCA dimension reduction")
    run_p.add_argument("--gamma", type=float, default=None, help="override the consensus step size")
    run_p.add_argument(
        "--solver", choices=("closed-form", "gradient"), default=None,
        help="override the map estimation method",
    )
    run_p.add_argument("--no-plot", action="store_true", help="skip the mse.svg figure")

    val_p = sub.add_parser("validate", help="validate a scenario file")
    add_common(val_p, with_output=False)

    truth_p = sub.add_parser("truth", help="write the ground-truth trajectory only")
    add_common(truth_p)

    return parser


def _load(args) -> "ScenarioConfig":
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "particles", None) is not None:
        overrides["particles"] = args.particles
    if getattr(args, "no_pca", False):
        overrides["pca_enabled"] = False
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    if getattr(args, "solver", None) is not None:
        overrides["solver_method"] = args.solver
    if overrides:
        scenario = with_overrides(scenario, **overrides)
    return scenario


def _command_run(args) -> int:
    scenario = _load(args)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    truth = simulate_truth(scenario)
    write_resolved_scenario(scenario, outdir / "scenario.resolved.json")
    write_truth_csv(truth, outdir / "truth.csv")
    try:
        metrics = run_filter(scenario, truth)
    except TransportFilterError as exc:
        partial = getattr(exc, "partial_metrics", None)
        if partial is not None and partial.rows:
            write_metrics_csv(partial, outdir / "metrics.csv")
            print(f"flushed partial metrics to {outdir / 'metrics.csv'}", file=sys.stderr)
        raise
    write_metrics_csv(metrics, outdir / "metrics.csv")
    if not args.no_plot:
        render_mse_plot(metrics, outdir / "mse.svg")
    print(f"wrote artifacts to {outdir}")
    return EXIT_OK


def _command_validate(args) -> int:
    scenario = _load(args)
    print(
        f"scenario ok: model={scenario.model}, agents={scenario.n_agents}, "
        f"steps={scenario.n_steps}, particles={scenario.particles}"
    )
    return EXIT_OK


def _command_truth(args) -> int:
    scenario = _load(args)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    truth = simulate_truth(scenario)
    write_truth_csv(truth, outdir / "truth.csv")
    print(f"wrote {outdir / 'truth.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _command_run,
        "validate": _command_validate,
        "truth": _command_truth,
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TransportFilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
