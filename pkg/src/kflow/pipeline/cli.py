"""Command line interface.

Exit codes: 0 success, 1 unexpected failure, 2 filter divergence,
3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from kflow.grids import VoxelGrid
from kflow.pipeline.config import ConfigError, ExperimentConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DIVERGED = 2
EXIT_CONFIG = 3


def _add_common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="experiment YAML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="noise seed offset")
    p.add_argument("--threads", type=int, default=1, help="worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kflow",
        description="Twin experiments: parameter estimation from undersampled k-space flow MRI",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("generate", help="synthesize a measurement series"))

    p = sub.add_parser("estimate", help="run the filter on a series")
    _add_common(p)
    p.add_argument("--series", required=True, help="series directory from generate")

    p = sub.add_parser("evaluate", help="relative flow error of an estimate")
    _add_common(p)
    p.add_argument("--reference", required=True, help="reference.npz from generate")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--estimate", help="estimate.json from estimate")
    group.add_argument("--theta", help="comma-separated parameter values")

    p = sub.add_parser("mask", help="build and render a sampling mask")
    p.add_argument("--config", help="take the grid from this experiment config")
    p.add_argument("--dims", help="nx,ny,nz when no config is given")
    p.add_argument("--pattern", default="gaussian", choices=["full", "spiral", "gaussian"])
    p.add_argument("--R", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--turns", type=int, default=6)
    p.add_argument("--sigma-frac", type=float, default=1.0 / 6.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a sweep along one axis")
    _add_common(p)
    p.add_argument("--axis", choices=["R", "venc_fraction", "mask", "magnitude_source"])
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--realizations", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _dispatch(args) -> int:
    from kflow.pipeline import experiment, sweep

    if args.command == "mask":
        if args.config:
            grid = ExperimentConfig.from_file(args.config).acquisition.grid
        elif args.dims:
            dims = tuple(int(x) for x in args.dims.split(","))
            grid = VoxelGrid(dims)
        else:
            raise ConfigError("mask needs --config or --dims")
        report = experiment.cmd_mask(
            grid, args.pattern, args.R, args.seed, args.out,
            turns=args.turns, sigma_frac=args.sigma_frac,
        )
        print(json.dumps(report, indent=1))
        return EXIT_OK

    config = ExperimentConfig.from_file(args.config)

    if args.command == "generate":
        result = experiment.cmd_generate(config, args.out, seed_offset=args.seed)
        print(json.dumps(result.__dict__, indent=1))
        return EXIT_OK

    if args.command == "estimate":
        if args.threads > 1:
            config = config.with_overrides(**{"estimation.workers": args.threads})
        result = experiment.cmd_estimate(config, args.series, args.out)
        print(json.dumps({"trajectory": result.trajectory_csv, "estimate": result.estimate_json,
                          "diverged": result.diverged}, indent=1))
        return EXIT_DIVERGED if result.diverged else EXIT_OK

    if args.command == "evaluate":
        meta = {}
        if args.estimate:
            est = json.loads(open(args.estimate).read())
            if est.get("means") is None:
                raise ConfigError("estimate.json carries no parameter means")
            theta = np.asarray(est["means"], dtype=float)
            meta = {"variances": est.get("variances"), "sigma_used": est.get("sigma_used")}
        else:
            theta = np.asarray([float(x) for x in args.theta.split(",")])
        report = experiment.cmd_evaluate(config, theta, args.reference, args.out, estimate_meta=meta)
        print(json.dumps({"e": report.e, "estimates": report.estimates}, indent=1))
        return EXIT_OK

    if args.command == "sweep":
        values = None
        if args.values is not None:
            values = [_parse_value(v) for v in args.values.split(",")]
        rows = sweep.cmd_sweep(
            config, args.out, axis=args.axis, values=values,
            realizations=args.realizations, threads=args.threads, seed_offset=args.seed,
        )
        bad = [r for r in rows if r.get("status") != "ok"]
        print(json.dumps({"rows": len(rows), "failed_or_diverged": len(bad)}, indent=1))
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command}")


def _parse_value(text: str):
    try:
        return float(text)
    except ValueError:
        return text


if __name__ == "__main__":
    sys.exit(main())
