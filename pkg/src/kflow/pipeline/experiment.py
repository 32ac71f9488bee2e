"""Generate / estimate / evaluate twin experiments from one config."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from kflow.container import write_field, write_mask_pgm
from kflow.grids import ComplexField, SamplingMask, ScalarField, VoxelGrid
from kflow.imaging import (
    dft3,
    encode_magnetization,
    estimate_noise_std,
    estimate_velocity_noise_std,
    make_gaussian_mask,
    make_spiral_mask,
    phase_difference_velocity,
    simulate_kspace,
    snr_to_sigma,
    zero_filled_reconstruction,
)
from kflow.forward import (
    InflowProfile,
    NavierStokesModel,
    SolverConfig,
    SurrogateNetworkModel,
    WindkesselParams,
    load_mesh,
    tube_mesh,
    y_bifurcation_mesh,
)
from kflow.forward.solver import FluidProps
from kflow.pipeline.config import ConfigError, ExperimentConfig
from kflow.roukf import EstimationConfig, InnovationSpec, ParameterSet, estimate_run
from kflow.series import (
    MeasurementChannel,
    MeasurementInstant,
    MeasurementSeries,
    load_series,
    save_series,
)

MESH_GENERATORS = {"tube": tube_mesh, "y_bifurcation": y_bifurcation_mesh}


def build_model(config: ExperimentConfig):
    """Instantiate the forward model described by the config.

    The model starts at the config's baseline parameter values; callers
    bind truth or estimates explicitly through set_parameters.
    """
    m = config.model
    if m["kind"] == "surrogate_network":
        branches = [WindkesselParams(**b) for b in m["branches"]]
        model = SurrogateNetworkModel(
            branches,
            InflowProfile(**m.get("inflow", {})),
            tau=float(m.get("tau", 1e-3)),
            grid=config.acquisition.grid,
        )
        return model
    mesh_spec = dict(m["mesh"])
    kind = mesh_spec.pop("kind")
    if kind == "file":
        mesh = load_mesh(mesh_spec["path"])
    elif kind in MESH_GENERATORS:
        mesh = MESH_GENERATORS[kind](**mesh_spec)
    else:
        raise ConfigError(f"unknown mesh kind {kind!r}")
    model = NavierStokesModel(
        mesh,
        FluidProps(**m.get("fluid", {})),
        InflowProfile(**m.get("inflow", {})),
        [WindkesselParams(**w) for w in m.get("windkessel", [])],
        SolverConfig(**m.get("solver", {})),
    )
    model.attach_observation_grid(config.acquisition.grid)
    return model


def build_mask(config: ExperimentConfig, grid: VoxelGrid) -> SamplingMask:
    mk = config.mask
    if mk.pattern == "full" or mk.R <= 1.0:
        return SamplingMask.full(grid)
    if mk.pattern == "spiral":
        return make_spiral_mask(grid, mk.R, turns=mk.turns)
    return make_gaussian_mask(grid, mk.R, sigma_frac=mk.sigma_frac, seed=mk.seed)


def _foreground(config, model) -> np.ndarray:
    if isinstance(model, SurrogateNetworkModel):
        return np.ones(config.acquisition.grid.dims, dtype=bool)
    return model.sampler.inside


def _magnitude_field(config, model) -> ScalarField:
    acq = config.acquisition
    inside = _foreground(config, model)
    vals = np.where(inside, acq.lumen_magnitude, acq.background_magnitude)
    return ScalarField(acq.grid, vals)


def _noise_seed(base: int, instant: int, channel: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=base, spawn_key=(instant, channel))


def _run_velocity_trajectory(model, params: dict, n_steps: int):
    """Forward trajectory of the velocity dofs; shared by generate and
    evaluate so a re-run with identical parameters is bit-identical."""
    state = model.initial_state()
    rows = [velocity_dofs(model, state)]
    states = [state]
    model.set_parameters(params)
    for _ in range(n_steps):
        state = model.step(state)
        rows.append(velocity_dofs(model, state))
        states.append(state)
    return np.asarray(rows), states


def velocity_dofs(model, state) -> np.ndarray:
    if isinstance(model, SurrogateNetworkModel):
        return state.q.copy()
    return state.u.ravel(order="F")


@dataclass
class GenerateResult:
    series_dir: str
    reference_path: str
    venc: float
    sigma: float
    achieved_R: float
    measurement_count: int


def cmd_generate(config: ExperimentConfig, outdir, seed_offset: int = 0) -> GenerateResult:
    """Forward run at the true parameters plus synthetic PC-MRI acquisition."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    acq = config.acquisition
    model = build_model(config)
    truth = dict(zip(config.parameters.names, config.parameters.truth))

    tau = config.tau
    steps_per_meas = int(round(acq.dt_meas / tau))
    n_meas = config.measurement_count
    if n_meas < 1:
        raise ConfigError("t_end shorter than dt_meas: no measurements")
    n_steps = int(round(acq.t_end / tau))

    traj, states = _run_velocity_trajectory(model, truth, n_steps)
    meas_steps = [k * steps_per_meas for k in range(1, n_meas + 1)]
    observed = {}  # (instant index, direction index) -> ScalarField
    vmax = 0.0
    for ki, step_idx in enumerate(meas_steps):
        for di, d in enumerate(acq.directions):
            v = model.observe(states[step_idx], d)
            observed[(ki, di)] = v
            vmax = max(vmax, float(np.abs(v.values).max()))

    venc = acq.venc_value if acq.venc_value is not None else acq.venc_fraction * vmax
    if venc <= 0:
        raise ConfigError("resolved venc is not positive (zero reference flow?)")

    mask = build_mask(config, acq.grid)
    foreground = _foreground(config, model)
    M = _magnitude_field(config, model)
    phi_back = ScalarField.full(acq.grid, acq.phi_back)
    sigma = snr_to_sigma(M, foreground, acq.snr) if acq.snr else 0.0
    base_seed = config.noise_seed + seed_offset

    coil_weights = _coil_sensitivities(acq.grid, acq.coils)
    coil_mags = None
    if acq.coils > 1:
        coil_mags = [ScalarField(acq.grid, M.values * w) for w in coil_weights]

    def acquire(v: ScalarField, instant_idx: int, di: int):
        channels = []
        for ci in range(acq.coils):
            mag = coil_mags[ci] if coil_mags else M
            m_img = encode_magnetization(mag, v, phi_back, venc)
            seed = _noise_seed(base_seed, instant_idx, di * max(acq.coils, 1) + ci)
            y = simulate_kspace(m_img, mask, sigma, seed)
            channels.append(MeasurementChannel(tuple(acq.directions[di]), y, mask, ci))
        return channels

    zero_v = ScalarField.full(acq.grid, 0.0)
    noise_ref = []
    for di in range(len(acq.directions)):
        noise_ref.extend(acquire(zero_v, 0, di))
    instants = []
    for ki in range(n_meas):
        channels = []
        for di in range(len(acq.directions)):
            channels.extend(acquire(observed[(ki, di)], ki + 1, di))
        instants.append(MeasurementInstant(meas_steps[ki] * tau, channels))

    # magnitude reconstructed from an R=2 Gaussian acquisition at rest
    mask_r2 = make_gaussian_mask(acq.grid, 2.0, seed=config.mask.seed + 1)
    m0 = encode_magnetization(M, zero_v, phi_back, venc)
    y_r2 = simulate_kspace(m0, mask_r2, sigma, _noise_seed(base_seed, 0, 4099))
    m_recon = ScalarField(acq.grid, np.abs(zero_filled_reconstruction(y_r2, mask_r2).values))

    assert n_meas == int(np.floor(acq.t_end / acq.dt_meas)), "measurement count convention"
    series = MeasurementSeries(
        times=[i.time for i in instants],
        instants=instants,
        venc=float(venc),
        directions=[tuple(d) for d in acq.directions],
        grid=acq.grid,
        tau=tau,
        dt_meas=acq.dt_meas,
        coils=acq.coils,
        snr=acq.snr,
        masks={di: mask for di in range(len(acq.directions))},
        magnitude=M,
        magnitude_recon=m_recon,
        coil_magnitudes=coil_mags,
        phi_back=phi_back,
        foreground=foreground,
        noise_ref=noise_ref,
        meta={
            "achieved_R": mask.achieved_R,
            "injected_sigma": sigma,
            "count_convention": "floor(t_end / dt_meas)",
            "seed_offset": seed_offset,
        },
    )
    series_dir = outdir / "series"
    save_series(series_dir, series, config_echo=config.raw)

    ref_path = outdir / "reference.npz"
    np.savez_compressed(
        ref_path,
        velocity=traj,
        times=tau * np.arange(n_steps + 1),
        names=np.array(config.parameters.names),
        truth=config.parameters.truth,
        venc=venc,
        sigma=sigma,
    )
    return GenerateResult(
        str(series_dir), str(ref_path), float(venc), float(sigma), mask.achieved_R, n_meas
    )


def _coil_sensitivities(grid: VoxelGrid, coils: int) -> list[np.ndarray]:
    """Smooth synthetic sensitivity profiles, one bump per coil."""
    if coils <= 1:
        return [np.ones(grid.dims)]
    nx, ny, nz = grid.dims
    x = np.linspace(0.0, 1.0, nx)[:, None, None]
    y = np.linspace(0.0, 1.0, ny)[None, :, None]
    out = []
    for c in range(coils):
        ang = 2.0 * np.pi * c / coils
        cx, cy = 0.5 + 0.45 * np.cos(ang), 0.5 + 0.45 * np.sin(ang)
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        out.append(np.broadcast_to(0.3 + 0.7 * np.exp(-2.0 * d2), grid.dims).copy())
    return out


def _resolve_magnitude(config: ExperimentConfig, series: MeasurementSeries) -> ScalarField:
    src = config.estimation.magnitude_source
    if src == "true":
        return series.magnitude
    if src == "recon_r2":
        if series.magnitude_recon is None:
            raise ConfigError("series has no reconstructed magnitude")
        return series.magnitude_recon
    return ScalarField.full(series.grid, config.estimation.constant_magnitude)


def _velocity_view(series: MeasurementSeries) -> list[MeasurementInstant]:
    """Zero-filled velocity decode of every k-space channel."""
    out = []
    for inst in series.instants:
        channels = []
        for ch in inst.channels:
            recon = zero_filled_reconstruction(ch.data, ch.mask)
            v = phase_difference_velocity(recon, series.phi_back, series.venc)
            channels.append(MeasurementChannel(ch.direction, v, ch.mask, ch.coil))
        out.append(MeasurementInstant(inst.time, channels))
    return out


@dataclass
class EstimateResult:
    trajectory_csv: str
    estimate_json: str
    diverged: bool
    means: np.ndarray | None
    variances: np.ndarray | None
    sigma_used: list[float]
    wall_time: float


def cmd_estimate(config: ExperimentConfig, series_dir, outdir) -> EstimateResult:
    """Run the filter against a stored series; refuses manifest mismatches."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    series = load_series(series_dir, verify=True)
    if tuple(series.grid.dims) != tuple(config.acquisition.grid.dims):
        raise ConfigError("series grid does not match the config grid")
    if abs(series.tau - config.tau) > 1e-12:
        raise ConfigError("series tau does not match the model tau")

    model = build_model(config)
    est = config.estimation
    M_used = _resolve_magnitude(config, series)
    phi_back = series.phi_back

    t0 = time.perf_counter()
    sigma_used: list[float] = []
    if est.innovation == "KSpace":
        if series.coils > 1:
            from kflow.roukf.innovations import CoilSpec

            coil_specs = []
            for ci in range(series.coils):
                ref = next(ch for ch in series.noise_ref if ch.coil == ci)
                mag = series.coil_magnitudes[ci] if series.coil_magnitudes else M_used
                s = est.noise_std or estimate_noise_std(ref.data, mag, phi_back, ref.mask)
                sigma_used.append(s)
                coil_specs.append(CoilSpec(mag, phi_back, s, ref.mask))
            spec = InnovationSpec(kind="KSpace", venc=series.venc, coils=coil_specs)
        else:
            if est.noise_std is not None:
                sigma_used = [float(est.noise_std)]
            else:
                sigma_used = [
                    estimate_noise_std(ch.data, M_used, phi_back, ch.mask)
                    for ch in series.noise_ref
                ]
            sigma = float(np.mean(sigma_used))
            spec = InnovationSpec(
                kind="KSpace",
                venc=series.venc,
                M=M_used,
                phi_back=phi_back,
                mask=next(iter(series.masks.values())),
                sigma=sigma,
            )
        instants = series.instants
    else:
        instants = _velocity_view(series)
        if est.noise_std is not None:
            sigma_v = float(est.noise_std)
        else:
            refs = _velocity_view_channels(series)
            sigma_v = float(
                np.mean([estimate_velocity_noise_std(v, series.foreground) for v in refs])
            )
        sigma_used = [sigma_v]
        spec = InnovationSpec(kind=est.innovation, venc=series.venc, sigma=sigma_v)

    params = ParameterSet(
        config.parameters.names,
        config.parameters.initial,
        config.parameters.prior_covariance * np.eye(len(config.parameters.names)),
        config.parameters.reparam,
    )
    run_series = MeasurementSeries(
        times=series.times,
        instants=instants,
        venc=series.venc,
        directions=series.directions,
        grid=series.grid,
        tau=series.tau,
        dt_meas=series.dt_meas,
        coils=series.coils,
        snr=series.snr,
        masks=series.masks,
        phi_back=series.phi_back,
        foreground=series.foreground,
    )
    traj = estimate_run(
        EstimationConfig(params=params, spec=spec, skip_first=est.skip_first, workers=est.workers),
        run_series,
        model,
    )
    wall = time.perf_counter() - t0

    csv_path = outdir / "trajectory.csv"
    traj.to_csv(csv_path)
    means = traj.means[-1] if traj.means else None
    variances = traj.variances[-1] if traj.variances else None
    est_json = outdir / "estimate.json"
    est_json.write_text(
        json.dumps(
            {
                "names": config.parameters.names,
                "means": None if means is None else list(map(float, means)),
                "variances": None if variances is None else list(map(float, variances)),
                "diverged": traj.diverged,
                "divergence_message": traj.divergence_message,
                "corrections": len(traj.steps),
                "skip_first": est.skip_first,
                "innovation": est.innovation,
                "magnitude_source": est.magnitude_source,
                "sigma_used": list(map(float, sigma_used)),
                "wall_time": wall,
            },
            indent=1,
        )
    )
    return EstimateResult(
        str(csv_path), str(est_json), traj.diverged, means, variances, sigma_used, wall
    )


def _velocity_view_channels(series: MeasurementSeries) -> list[ScalarField]:
    out = []
    for ch in series.noise_ref:
        recon = zero_filled_reconstruction(ch.data, ch.mask)
        out.append(phase_difference_velocity(recon, series.phi_back, series.venc))
    return out


@dataclass
class ErrorReport:
    e: float
    names: list[str]
    estimates: list[float]
    variances: list[float] | None
    achieved_R: float | None
    noise_std_estimate: list[float] | None
    wall_time: float

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=1))


def cmd_evaluate(
    config: ExperimentConfig, theta, reference_path, outdir=None, estimate_meta: dict | None = None
) -> ErrorReport:
    """Relative flow error of a forward re-run at the estimated parameters.

    e = ||v_ref - v_recon||_2 / ||v_ref||_2 over all velocity dofs at all
    time steps, stacked.
    """
    ref = np.load(reference_path, allow_pickle=False)
    v_ref = ref["velocity"]
    n_steps = v_ref.shape[0] - 1
    model = build_model(config)
    theta = np.asarray(theta, dtype=float)
    params = dict(zip(config.parameters.names, theta))
    t0 = time.perf_counter()
    v_rec, _ = _run_velocity_trajectory(model, params, n_steps)
    wall = time.perf_counter() - t0
    e = float(np.linalg.norm(v_ref - v_rec) / np.linalg.norm(v_ref))
    meta = estimate_meta or {}
    report = ErrorReport(
        e=e,
        names=list(config.parameters.names),
        estimates=[float(x) for x in theta],
        variances=meta.get("variances"),
        achieved_R=meta.get("achieved_R"),
        noise_std_estimate=meta.get("sigma_used"),
        wall_time=wall,
    )
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        report.write(outdir / "report.json")
    return report


def cmd_mask(grid: VoxelGrid, pattern: str, R: float, seed: int, outdir, **kwargs) -> dict:
    """Build a mask, persist KFE1 + PGM renders, report achieved acceleration."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if pattern == "full" or R <= 1.0:
        mask = SamplingMask.full(grid)
    elif pattern == "spiral":
        mask = make_spiral_mask(grid, R, turns=int(kwargs.get("turns", 6)))
    elif pattern == "gaussian":
        mask = make_gaussian_mask(grid, R, sigma_frac=float(kwargs.get("sigma_frac", 1 / 6)), seed=seed)
    else:
        raise ConfigError(f"unknown mask pattern {pattern!r}")
    write_field(outdir / "mask.kfe", mask)
    write_mask_pgm(outdir / "mask.pgm", mask)

    plane = mask.inplane()
    nx, ny = plane.shape
    kx = np.fft.fftfreq(nx, 1 / nx)[:, None]
    ky = np.fft.fftfreq(ny, 1 / ny)[None, :]
    radius = np.sqrt(kx**2 + ky**2)
    report = {
        "pattern": mask.pattern,
        "target_R": mask.target_R,
        "achieved_R": mask.achieved_R,
        "selected_inplane": int(plane.sum()),
        "mean_selected_radius": float(radius[plane].mean()),
        "mean_uniform_radius": float(radius.mean()),
        "dc_selected": bool(plane[0, 0]),
        "files": {"kfe": str(outdir / "mask.kfe"), "pgm": str(outdir / "mask.pgm")},
    }
    (outdir / "mask_report.json").write_text(json.dumps(report, indent=1))
    return report
