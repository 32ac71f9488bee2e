"""The reduced-order unscented Kalman filter loop.

Each assimilation step samples 2p particles around the current estimate,
propagates every particle through the forward model up to the
measurement time (parameters constant per particle), and corrects state
and parameter estimates with the weighted cross-covariances against the
sigma points. The square root C of U^{-1} is obtained by triangular
solves against U's Cholesky factor; U is never inverted explicitly.

Forward models plug in through a small contract: `tau`,
`advance(state, params_dict, n_steps)`, `observe(state, direction)`,
`state_to_vector` / `vector_to_state`, and `initial_state`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from kflow.roukf.innovations import InnovationSpec, innovation_kspace, innovation_velocity, innovation_wrapped
from kflow.roukf.reparam import ParameterSet
from kflow.roukf.sigma_points import canonical_sigma_points


class FilterDivergence(RuntimeError):
    """A particle's forward solve failed or U lost positive definiteness."""

    def __init__(self, message, step_index=None, particle=None):
        super().__init__(message)
        self.step_index = step_index
        self.particle = particle


@dataclass
class FilterState:
    """A posteriori estimate after `step_index` corrections.

    theta_plus lives in internal (reparameterized) coordinates; physical
    values come from params.to_physical.
    """

    params: ParameterSet
    x_plus: np.ndarray
    theta_plus: np.ndarray
    L_X: np.ndarray
    L_theta: np.ndarray
    U_mat: np.ndarray
    step_index: int = 0
    time: float = 0.0

    def theta_physical(self) -> np.ndarray:
        return self.params.to_physical(self.theta_plus)

    def P_theta(self) -> np.ndarray:
        cf = cho_factor(self.U_mat, lower=True)
        return self.L_theta @ cho_solve(cf, self.L_theta.T)


def filter_init(params: ParameterSet, X0: np.ndarray, t0: float = 0.0) -> FilterState:
    """Initial sensitivities: L_theta = chol(P0), L_X = 0, U = identity."""
    p = params.p
    L_theta = cholesky(params.P0, lower=True)
    return FilterState(
        params=params,
        x_plus=np.asarray(X0, dtype=np.float64).copy(),
        theta_plus=params.internal_prior(),
        L_X=np.zeros((np.size(X0), p)),
        L_theta=L_theta,
        U_mat=np.eye(p),
        step_index=0,
        time=t0,
    )


def _channel_innovation(model, state, channel, spec: InnovationSpec):
    """Residual and W-diagonal for one measurement channel."""
    Hu = model.observe(state, channel.direction)
    if spec.coils:
        coil = spec.coils[channel.coil]
        gamma = innovation_kspace(channel.data, Hu, coil.M, coil.phi_back, spec.venc, coil.mask)
        return gamma, np.full(gamma.size, coil.sigma**2)
    if spec.kind == "Velocity":
        gamma = innovation_velocity(channel.data, Hu)
    elif spec.kind == "WrappedVelocity":
        gamma = innovation_wrapped(channel.data, Hu, spec.venc)
    else:
        mask = channel.mask if channel.mask is not None else spec.mask
        gamma = innovation_kspace(channel.data, Hu, spec.M, spec.phi_back, spec.venc, mask)
    return gamma, np.full(gamma.size, spec.sigma**2)


def _innovate(model, state, measurement, spec):
    parts = [_channel_innovation(model, state, ch, spec) for ch in measurement.channels]
    gamma = np.concatenate([g for g, _ in parts])
    weight = np.concatenate([w for _, w in parts])
    return gamma, weight


def filter_step(fs: FilterState, model, measurement, spec: InnovationSpec, workers: int = 1) -> FilterState:
    """One sampling / prediction / correction cycle at a measurement time."""
    params = fs.params
    p = params.p
    sigma, alpha = canonical_sigma_points(p)

    n_float = (measurement.time - fs.time) / model.tau
    n_steps = int(round(n_float))
    if n_steps < 0 or abs(n_float - n_steps) > 1e-6:
        raise ValueError(
            f"measurement at t={measurement.time} is not an integer number of "
            f"model steps from t={fs.time} (tau={model.tau})"
        )

    try:
        L_U = cholesky(fs.U_mat, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergence(
            f"U lost positive definiteness at step {fs.step_index}", fs.step_index
        ) from exc
    C = solve_triangular(L_U, np.eye(p), lower=True)  # C^T C = U^{-1}
    spread_X = fs.L_X @ C.T
    spread_theta = fs.L_theta @ C.T

    nu_particles = fs.theta_plus[:, None] + spread_theta @ sigma  # (p, 2p)
    x_particles = fs.x_plus[:, None] + spread_X @ sigma  # (r, 2p)

    def propagate(i):
        nu_i = nu_particles[:, i]
        theta_phys = params.to_physical(nu_i)
        state = model.vector_to_state(x_particles[:, i], fs.time)
        try:
            state = model.advance(state, dict(zip(params.names, theta_phys)), n_steps)
            gamma, weight = _innovate(model, state, measurement, spec)
        except Exception as exc:
            raise FilterDivergence(
                f"particle {i} failed during prediction: {exc}", fs.step_index, particle=i
            ) from exc
        return model.state_to_vector(state), gamma, weight

    indices = range(2 * p)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(propagate, indices))
    else:
        results = [propagate(i) for i in indices]

    X_new = np.stack([r[0] for r in results], axis=1)  # (r, 2p)
    Gamma = np.stack([r[1] for r in results], axis=1)  # (m, 2p)
    weight = results[0][2]
    if not np.all(np.isfinite(Gamma)):
        raise FilterDivergence(f"non-finite innovation at step {fs.step_index}", fs.step_index)

    x_minus = alpha * X_new.sum(axis=1)
    theta_minus = alpha * nu_particles.sum(axis=1)

    L_X = alpha * (X_new @ sigma.T)
    L_theta = alpha * (nu_particles @ sigma.T)
    L_Gamma = alpha * (Gamma @ sigma.T)

    winv_LG = L_Gamma / weight[:, None]
    U_new = np.eye(p) + L_Gamma.T @ winv_LG
    mean_gamma = alpha * Gamma.sum(axis=1)
    try:
        cf = cho_factor(U_new, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergence(
            f"U lost positive definiteness at step {fs.step_index + 1}", fs.step_index + 1
        ) from exc
    gain = cho_solve(cf, winv_LG.T @ mean_gamma)

    return FilterState(
        params=params,
        x_plus=x_minus - L_X @ gain,
        theta_plus=theta_minus - L_theta @ gain,
        L_X=L_X,
        L_theta=L_theta,
        U_mat=U_new,
        step_index=fs.step_index + 1,
        time=measurement.time,
    )


@dataclass
class EstimationConfig:
    params: ParameterSet
    spec: InnovationSpec
    skip_first: int = 0
    workers: int = 1
    x0: np.ndarray | None = None
    t0: float = 0.0


@dataclass
class EstimateTrajectory:
    """Parameter means/variances after each correction, plus the end state.

    Variances are the diagonal of P_theta in internal (reparameterized)
    coordinates. A diverged run keeps the trajectory recorded so far.
    """

    names: list[str]
    steps: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    means: list[np.ndarray] = field(default_factory=list)
    variances: list[np.ndarray] = field(default_factory=list)
    final: FilterState | None = None
    diverged: bool = False
    divergence_message: str = ""

    def record(self, fs: FilterState):
        self.steps.append(fs.step_index)
        self.times.append(fs.time)
        self.means.append(fs.theta_physical())
        self.variances.append(np.diag(fs.P_theta()).copy())

    def to_csv(self, path) -> None:
        header = ["step", "time"]
        header += [f"{n}_mean" for n in self.names] + [f"{n}_var" for n in self.names]
        rows = [",".join(header)]
        for s, t, m, v in zip(self.steps, self.times, self.means, self.variances):
            rows.append(",".join([str(s), repr(float(t))] + [repr(float(x)) for x in (*m, *v)]))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def estimate_run(config: EstimationConfig, series, model) -> EstimateTrajectory:
    """Assimilate every instant of a measurement series in order.

    The first `skip_first` instants are not assimilated: the central
    estimate is propagated through them deterministically and no
    correction is applied.
    """
    x0 = config.x0 if config.x0 is not None else model.state_to_vector(model.initial_state())
    fs = filter_init(config.params, x0, t0=config.t0)
    traj = EstimateTrajectory(names=list(config.params.names))
    for k, instant in enumerate(series.instants):
        if k < config.skip_first:
            n_steps = int(round((instant.time - fs.time) / model.tau))
            state = model.vector_to_state(fs.x_plus, fs.time)
            theta_phys = fs.theta_physical()
            state = model.advance(state, dict(zip(config.params.names, theta_phys)), n_steps)
            fs.x_plus = model.state_to_vector(state)
            fs.time = instant.time
            continue
        try:
            fs = filter_step(fs, model, instant, config.spec, workers=config.workers)
        except FilterDivergence as exc:
            traj.diverged = True
            traj.divergence_message = str(exc)
            break
        traj.record(fs)
    traj.final = fs
    return traj
