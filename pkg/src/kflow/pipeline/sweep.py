"""Sweeps: repeat the generate/estimate/evaluate chain along one axis.

Each (axis value, realization) pair is an independent process with its
own output directory and derived noise seed; failures are recorded in
the aggregate CSV and the sweep continues.
"""

from __future__ import annotations

import csv
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from kflow.pipeline.config import ConfigError, ExperimentConfig

_AXIS_OVERRIDES = {
    "R": lambda v: {"mask.R": float(v)},
    "venc_fraction": lambda v: {"acquisition.venc": {"fraction": float(v)}},
    "mask": lambda v: {"mask.pattern": str(v)},
    "magnitude_source": lambda v: {"estimation.magnitude_source": str(v)},
}


def _run_single(raw_config: dict, overrides: dict, seed_offset: int, outdir: str) -> dict:
    """One generate -> estimate -> evaluate chain; returns a result row."""
    from kflow.pipeline.experiment import cmd_estimate, cmd_evaluate, cmd_generate

    config = ExperimentConfig.from_dict(raw_config)
    if overrides:
        config = config.with_overrides(**overrides)
    out = Path(outdir)
    gen = cmd_generate(config, out, seed_offset=seed_offset)
    est = cmd_estimate(config, gen.series_dir, out)
    row = {
        "achieved_R": gen.achieved_R,
        "venc": gen.venc,
        "sigma_injected": gen.sigma,
        "sigma_estimated": est.sigma_used[0] if est.sigma_used else None,
        "diverged": est.diverged,
        "estimate_wall": est.wall_time,
    }
    if est.means is None:
        row["status"] = "diverged-before-first-correction"
        return row
    report = cmd_evaluate(
        config,
        est.means,
        gen.reference_path,
        out,
        estimate_meta={
            "variances": None if est.variances is None else list(map(float, est.variances)),
            "achieved_R": gen.achieved_R,
            "sigma_used": est.sigma_used,
        },
    )
    row["e"] = report.e
    for name, val in zip(config.parameters.names, est.means):
        row[f"{name}_mean"] = float(val)
    for name, val in zip(config.parameters.names, est.variances):
        row[f"{name}_var"] = float(val)
    row["status"] = "diverged" if est.diverged else "ok"
    return row


def _worker(task):
    axis, value, realization, raw_config, overrides, seed_offset, outdir = task
    base = {"axis": axis, "value": value, "realization": realization, "outdir": outdir}
    try:
        row = _run_single(raw_config, overrides, seed_offset, outdir)
    except Exception as exc:  # recorded, sweep continues
        return {**base, "status": "error", "error": f"{type(exc).__name__}: {exc}",
                "trace": traceback.format_exc(limit=4)}
    return {**base, **row}


def cmd_sweep(
    config: ExperimentConfig,
    outdir,
    axis: str | None = None,
    values: list | None = None,
    realizations: int | None = None,
    threads: int = 1,
    seed_offset: int = 0,
) -> list[dict]:
    """Run the sweep described by config.sweep (or the explicit arguments)."""
    sweep = config.sweep
    axis = axis or (sweep.axis if sweep else None)
    values = values if values is not None else (sweep.values if sweep else None)
    realizations = realizations or (sweep.realizations if sweep else 1)
    if axis not in _AXIS_OVERRIDES:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for vi, value in enumerate(values):
        for r in range(realizations):
            run_dir = outdir / f"{axis}={value}" / f"r{r}"
            tasks.append(
                (
                    axis,
                    value,
                    r,
                    config.raw,
                    _AXIS_OVERRIDES[axis](value),
                    seed_offset + 1000 * r,
                    str(run_dir),
                )
            )

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_worker, tasks))
    else:
        rows = [_worker(t) for t in tasks]

    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    csv_path = outdir / "sweep_results.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    (outdir / "sweep_manifest.json").write_text(
        json.dumps(
            {"axis": axis, "values": list(values), "realizations": realizations,
             "seed_offset": seed_offset, "rows": len(rows)},
            indent=1,
        )
    )
    return rows
