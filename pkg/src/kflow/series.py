"""Measurement series: time-indexed masked k-space (or velocity) data.

On disk a series is a directory with a JSON manifest and one KFE1 binary
per field. The manifest records times, venc, directions, coil count,
mask references and a sha256 per field file; loading verifies the hashes
so an estimation run refuses a series whose payload was swapped out from
under its manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kflow.container import read_field, write_field
from kflow.grids import ComplexField, SamplingMask, ScalarField, VoxelGrid

FORMAT = "kflow-series 1"


@dataclass
class MeasurementChannel:
    """One acquired channel at one instant: a direction and optionally a coil."""

    direction: tuple[float, float, float]
    data: ComplexField | ScalarField
    mask: SamplingMask | None = None
    coil: int = 0


@dataclass
class MeasurementInstant:
    time: float
    channels: list[MeasurementChannel]


@dataclass
class MeasurementSeries:
    times: list[float]
    instants: list[MeasurementInstant]
    venc: float
    directions: list[tuple[float, float, float]]
    grid: VoxelGrid
    tau: float
    dt_meas: float
    coils: int = 1
    snr: float | None = None
    masks: dict[int, SamplingMask] = field(default_factory=dict)  # per direction index
    magnitude: ScalarField | None = None
    magnitude_recon: ScalarField | None = None
    coil_magnitudes: list[ScalarField] | None = None
    phi_back: ScalarField | None = None
    foreground: np.ndarray | None = None
    noise_ref: list[MeasurementChannel] = field(default_factory=list)  # rest-state data
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if list(self.times) != sorted(set(self.times)):
            raise ValueError("measurement times must be strictly increasing")
        for inst in self.instants:
            for ch in inst.channels:
                if isinstance(ch.data, ComplexField) and ch.mask is not None:
                    if np.any(ch.data.values[~ch.mask.selected] != 0):
                        raise ValueError(f"k-space at t={inst.time} has data outside its mask")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def save_series(outdir, series: MeasurementSeries, config_echo: dict | None = None) -> None:
    outdir = Path(outdir)
    fields_dir = outdir / "fields"
    fields_dir.mkdir(parents=True, exist_ok=True)
    hashes: dict[str, str] = {}

    def put(name, field_obj):
        rel = f"fields/{name}.kfe"
        write_field(outdir / rel, field_obj)
        hashes[rel] = _sha256(outdir / rel)
        return rel

    manifest = {
        "format": FORMAT,
        "times": list(map(float, series.times)),
        "venc": series.venc,
        "directions": [list(d) for d in series.directions],
        "coils": series.coils,
        "tau": series.tau,
        "dt_meas": series.dt_meas,
        "snr": series.snr,
        "grid": {
            "dims": list(series.grid.dims),
            "spacing": list(series.grid.spacing),
            "origin": list(series.grid.origin),
        },
        "measurement_count": len(series.times),
    }
    manifest["masks"] = {
        str(d): put(f"mask_d{d}", mask) for d, mask in series.masks.items()
    }
    if series.magnitude is not None:
        manifest["magnitude"] = put("magnitude", series.magnitude)
    if series.magnitude_recon is not None:
        manifest["magnitude_recon"] = put("magnitude_recon", series.magnitude_recon)
    if series.coil_magnitudes:
        manifest["coil_magnitudes"] = [
            put(f"magnitude_c{c}", m) for c, m in enumerate(series.coil_magnitudes)
        ]
    if series.phi_back is not None:
        manifest["phi_back"] = put("phi_back", series.phi_back)
    if series.foreground is not None:
        fg = SamplingMask(series.grid, series.foreground, target_R=1.0, pattern="Full")
        manifest["foreground"] = put("foreground", fg)
    manifest["noise_ref"] = [
        {
            "direction": list(ch.direction),
            "coil": ch.coil,
            "file": put(f"noise_ref_d{series.directions.index(tuple(ch.direction))}_c{ch.coil}", ch.data),
        }
        for ch in series.noise_ref
    ]
    instants = []
    for k, inst in enumerate(series.instants):
        channels = []
        for ch in inst.channels:
            d = series.directions.index(tuple(ch.direction))
            rel = put(f"y_t{k:04d}_d{d}_c{ch.coil}", ch.data)
            channels.append({"direction": list(ch.direction), "coil": ch.coil, "file": rel})
        instants.append({"time": inst.time, "channels": channels})
    manifest["instants"] = instants
    manifest["hashes"] = hashes
    if config_echo is not None:
        manifest["config_echo"] = config_echo
    manifest.update(series.meta)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_series(indir, verify: bool = True) -> MeasurementSeries:
    indir = Path(indir)
    manifest = json.loads((indir / "manifest.json").read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{indir}: not a measurement series")
    if verify:
        for rel, digest in manifest["hashes"].items():
            actual = _sha256(indir / rel)
            if actual != digest:
                raise ValueError(f"{indir}: checksum mismatch for {rel}")

    g = manifest["grid"]
    grid = VoxelGrid(tuple(g["dims"]), tuple(g["spacing"]), tuple(g["origin"]))
    masks = {int(d): read_field(indir / rel) for d, rel in manifest["masks"].items()}
    directions = [tuple(d) for d in manifest["directions"]]

    def get(name):
        return read_field(indir / manifest[name]) if name in manifest else None

    foreground_mask = get("foreground")
    coil_mags = None
    if "coil_magnitudes" in manifest:
        coil_mags = [read_field(indir / rel) for rel in manifest["coil_magnitudes"]]
    noise_ref = [
        MeasurementChannel(tuple(e["direction"]), read_field(indir / e["file"]),
                           masks.get(directions.index(tuple(e["direction"]))), e["coil"])
        for e in manifest.get("noise_ref", [])
    ]
    instants = []
    for e in manifest["instants"]:
        channels = [
            MeasurementChannel(
                tuple(c["direction"]),
                read_field(indir / c["file"]),
                masks.get(directions.index(tuple(c["direction"]))),
                c["coil"],
            )
            for c in e["channels"]
        ]
        instants.append(MeasurementInstant(e["time"], channels))

    known = {
        "format", "times", "venc", "directions", "coils", "tau", "dt_meas", "snr",
        "grid", "measurement_count", "masks", "magnitude", "magnitude_recon",
        "coil_magnitudes", "phi_back", "foreground", "noise_ref", "instants",
        "hashes", "config_echo",
    }
    meta = {k: v for k, v in manifest.items() if k not in known}
    return MeasurementSeries(
        times=list(manifest["times"]),
        instants=instants,
        venc=manifest["venc"],
        directions=directions,
        grid=grid,
        tau=manifest["tau"],
        dt_meas=manifest["dt_meas"],
        coils=manifest["coils"],
        snr=manifest["snr"],
        masks=masks,
        magnitude=get("magnitude"),
        magnitude_recon=get("magnitude_recon"),
        coil_magnitudes=coil_mags,
        phi_back=get("phi_back"),
        foreground=None if foreground_mask is None else foreground_mask.selected,
        noise_ref=noise_ref,
        meta=meta,
    )
