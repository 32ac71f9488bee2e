"""Experiment configuration: one YAML file describes a full twin experiment.

Sections: `model` (mesh/fluid/inflow/windkessel/solver, or a surrogate
network), `parameters` (which values are estimated, truth and prior),
`acquisition` (grid, venc policy, SNR, timing, directions, coils),
`mask`, `estimation` (innovation kind, magnitude source, skip count) and
`seeds`. See configs/ for the shipped experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from kflow.grids import VoxelGrid


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (CLI exit code 3)."""


def _require(mapping, key, ctx):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {ctx}")
    return mapping[key]


@dataclass
class ParameterBlock:
    names: list[str]
    truth: np.ndarray
    initial: np.ndarray
    prior_covariance: float = 0.5
    reparam: str = "Exponential"


@dataclass
class AcquisitionBlock:
    grid: VoxelGrid
    directions: list[tuple[float, float, float]]
    dt_meas: float
    t_end: float
    snr: float | None = 15.0
    venc_value: float | None = None
    venc_fraction: float | None = 2.0
    coils: int = 1
    lumen_magnitude: float = 1.0
    background_magnitude: float = 0.5
    phi_back: float = 7.5e-2


@dataclass
class MaskBlock:
    pattern: str = "full"  # full | spiral | gaussian
    R: float = 1.0
    seed: int = 0
    sigma_frac: float = 1.0 / 6.0
    turns: int = 6


@dataclass
class EstimationBlock:
    innovation: str = "KSpace"
    magnitude_source: str = "true"  # true | recon_r2 | constant
    constant_magnitude: float = 0.5
    skip_first: int = 0
    workers: int = 1
    noise_std: float | None = None


@dataclass
class SweepBlock:
    axis: str = "R"
    values: list = field(default_factory=list)
    realizations: int = 1


@dataclass
class ExperimentConfig:
    name: str
    model: dict
    parameters: ParameterBlock
    acquisition: AcquisitionBlock
    mask: MaskBlock
    estimation: EstimationBlock
    sweep: SweepBlock | None
    noise_seed: int
    output: str
    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, default_name=Path(path).stem)

    @classmethod
    def from_dict(cls, raw: dict, default_name: str = "experiment") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        model = _require(raw, "model", "config")
        if model.get("kind") not in ("navier_stokes", "surrogate_network"):
            raise ConfigError(f"unknown model kind {model.get('kind')!r}")

        pb = _require(raw, "parameters", "config")
        names = list(_require(pb, "names", "parameters"))
        truth = np.asarray(_require(pb, "truth", "parameters"), dtype=float)
        initial = np.asarray(_require(pb, "initial", "parameters"), dtype=float)
        if not (len(names) == truth.size == initial.size):
            raise ConfigError("parameters: names/truth/initial lengths differ")
        parameters = ParameterBlock(
            names=names,
            truth=truth,
            initial=initial,
            prior_covariance=float(pb.get("prior_covariance", 0.5)),
            reparam=pb.get("reparam", "Exponential"),
        )

        acq = _require(raw, "acquisition", "config")
        g = _require(acq, "grid", "acquisition")
        grid = VoxelGrid(
            tuple(_require(g, "dims", "grid")),
            tuple(g.get("spacing", (1.0, 1.0, 1.0))),
            tuple(g.get("origin", (0.0, 0.0, 0.0))),
        )
        venc = acq.get("venc", {"fraction": 2.0})
        if not isinstance(venc, dict) or not ({"value", "fraction"} & set(venc)):
            raise ConfigError("acquisition.venc needs 'value' or 'fraction'")
        dt_meas = float(_require(acq, "dt_meas", "acquisition"))
        t_end = float(_require(acq, "t_end", "acquisition"))
        mag = acq.get("magnitude", {})
        acquisition = AcquisitionBlock(
            grid=grid,
            directions=[tuple(map(float, d)) for d in _require(acq, "directions", "acquisition")],
            dt_meas=dt_meas,
            t_end=t_end,
            snr=acq.get("snr", 15.0),
            venc_value=venc.get("value"),
            venc_fraction=venc.get("fraction"),
            coils=int(acq.get("coils", 1)),
            lumen_magnitude=float(mag.get("lumen", 1.0)),
            background_magnitude=float(mag.get("background", 0.5)),
            phi_back=float(acq.get("phi_back", 7.5e-2)),
        )
        for d in acquisition.directions:
            if abs(np.linalg.norm(d) - 1.0) > 1e-9:
                raise ConfigError(f"direction {d} is not a unit vector")

        mk = raw.get("mask", {})
        mask = MaskBlock(
            pattern=mk.get("pattern", "full"),
            R=float(mk.get("R", 1.0)),
            seed=int(mk.get("seed", 0)),
            sigma_frac=float(mk.get("sigma_frac", 1.0 / 6.0)),
            turns=int(mk.get("turns", 6)),
        )
        if mask.pattern not in ("full", "spiral", "gaussian"):
            raise ConfigError(f"unknown mask pattern {mask.pattern!r}")

        eb = raw.get("estimation", {})
        estimation = EstimationBlock(
            innovation=eb.get("innovation", "KSpace"),
            magnitude_source=str(eb.get("magnitude_source", "true")).lower(),
            constant_magnitude=float(eb.get("constant_magnitude", 0.5)),
            skip_first=int(eb.get("skip_first", 0)),
            workers=int(eb.get("workers", 1)),
            noise_std=eb.get("noise_std"),
        )
        if estimation.innovation not in ("Velocity", "WrappedVelocity", "KSpace"):
            raise ConfigError(f"unknown innovation {estimation.innovation!r}")
        if estimation.magnitude_source not in ("true", "recon_r2", "constant"):
            raise ConfigError(f"unknown magnitude_source {estimation.magnitude_source!r}")

        sweep = None
        if "sweep" in raw:
            sb = raw["sweep"]
            sweep = SweepBlock(
                axis=sb.get("axis", "R"),
                values=list(_require(sb, "values", "sweep")),
                realizations=int(sb.get("realizations", 1)),
            )
            if sweep.axis not in ("R", "venc_fraction", "mask", "magnitude_source"):
                raise ConfigError(f"unknown sweep axis {sweep.axis!r}")

        tau = cls._model_tau(model)
        n_sub = dt_meas / tau
        if abs(n_sub - round(n_sub)) > 1e-9 or round(n_sub) < 1:
            raise ConfigError(f"dt_meas={dt_meas} is not an integer multiple of tau={tau}")

        seeds = raw.get("seeds", {})
        return cls(
            name=raw.get("name", default_name),
            model=model,
            parameters=parameters,
            acquisition=acquisition,
            mask=mask,
            estimation=estimation,
            sweep=sweep,
            noise_seed=int(seeds.get("noise", 0)),
            output=raw.get("output", "runs/" + raw.get("name", default_name)),
            raw=raw,
        )

    @staticmethod
    def _model_tau(model: dict) -> float:
        if model.get("kind") == "surrogate_network":
            return float(model.get("tau", 1e-3))
        return float(model.get("solver", {}).get("tau", 1e-3))

    @property
    def tau(self) -> float:
        return self._model_tau(self.model)

    @property
    def measurement_count(self) -> int:
        return int(np.floor(self.acquisition.t_end / self.acquisition.dt_meas))

    def with_overrides(self, **kv) -> "ExperimentConfig":
        """New config with dotted-path overrides applied to the raw dict."""
        import copy

        raw = copy.deepcopy(self.raw)
        for dotted, value in kv.items():
            node = raw
            parts = dotted.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(raw, default_name=self.name)
