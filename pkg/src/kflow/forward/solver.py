"""Fractional-step Navier-Stokes solver with semi-implicit Windkessel coupling.

One time step advances the state (u, pi) through four stages:

1. viscous step: tentative velocity from a linearized momentum solve with
   skew-symmetrized convection, streamline (SUPG-type) stabilization and
   backflow stabilization on the outlets;
2. projection-Windkessel step: pressure Poisson problem whose outlet
   coupling encodes the discrete Windkessel flux law through the
   coefficients (alpha, beta, gamma);
3. velocity correction: L2 projection of u_tilde - (tau/rho) grad p with
   the Dirichlet rows pinned;
4. Windkessel update of the distal pressures pi.

The filter treats `step` as the model operator: parameters (inflow
amplitude, outlet resistances/compliances) are re-read on every call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator, gmres, splu

from kflow.forward import kernels
from kflow.forward.fem import FACE_MASS_TEMPLATE, BoundaryPatch, COOPattern, P1Geometry
from kflow.forward.inflow import InflowProfile, inflow_value
from kflow.forward.mesh import Mesh
from kflow.forward.windkessel import WindkesselParams, windkessel_coefficients, windkessel_update


class SolverError(RuntimeError):
    """Linear solver failure inside a forward step."""


@dataclass(frozen=True)
class FluidProps:
    rho: float = 1.2  # g/cm^3
    mu: float = 0.035  # P

    def __post_init__(self):
        if self.rho <= 0 or self.mu <= 0:
            raise ValueError("rho and mu must be positive")


@dataclass
class SolverConfig:
    tau: float = 1e-3  # s
    delta: float = 1.0  # prefactor of the elementwise streamline stabilization
    epsilon: float = 1e-2  # outlet tangential pressure-gradient stabilization
    linear_tol: float = 1e-8
    gmres_restart: int = 80
    gmres_maxiter: int = 400

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.delta < 0 or self.epsilon < 0:
            raise ValueError("stabilization coefficients must be non-negative")


@dataclass
class FlowState:
    """Velocity, pressure, Windkessel pressures and time.

    Only u and pi carry memory between steps; p is recomputed by the
    projection and kept for inspection.
    """

    u: np.ndarray  # (n, 3)
    p: np.ndarray  # (n,)
    pi: np.ndarray  # (n_outlets,)
    t: float = 0.0

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.p.copy(), self.pi.copy(), self.t)


class NavierStokesModel:
    def __init__(
        self,
        mesh: Mesh,
        props: FluidProps,
        inflow: InflowProfile,
        windkessel: list[WindkesselParams],
        config: SolverConfig,
    ):
        self.mesh = mesh
        self.props = props
        self.inflow = inflow
        self.config = config
        self.outlet_tags = mesh.outlet_tags
        if len(windkessel) != len(self.outlet_tags):
            raise ValueError(
                f"{len(windkessel)} Windkessel parameter sets for "
                f"{len(self.outlet_tags)} outlets"
            )
        self.windkessel = list(windkessel)

        geom = P1Geometry(mesh)
        self.geom = geom
        n = geom.n_nodes
        self.n = n
        self.patches = {tag: BoundaryPatch(mesh, tag) for tag in mesh.boundary}
        self.outlets = [self.patches[tag] for tag in self.outlet_tags]

        wall_nodes = set(mesh.boundary["wall"].ravel().tolist()) if "wall" in mesh.boundary else set()
        inlet_nodes = set(mesh.boundary["inlet"].ravel().tolist())
        dirichlet = np.array(sorted(wall_nodes | inlet_nodes), dtype=np.int64)
        self.dirichlet = dirichlet
        self.free = np.setdiff1d(np.arange(n, dtype=np.int64), dirichlet)
        self.wall_nodes = np.array(sorted(wall_nodes), dtype=np.int64)
        self.inlet_only = np.array(sorted(inlet_nodes - wall_nodes), dtype=np.int64)

        # constant matrices
        self.M_s = geom.scalar_mass()
        self.K_stiff_s = geom.scalar_stiffness()
        self.K_visc = geom.vector_viscous(props.mu)
        self.G = geom.gradient_ops()
        self.T_stab = geom.tangential_pressure_stab(self.outlets)

        nf = len(self.free)
        self.nf = nf
        vec_free = np.concatenate([self.free + c * n for c in range(3)])
        vec_dir = np.concatenate([self.dirichlet + c * n for c in range(3)])
        self.K_ff = self.K_visc[vec_free][:, vec_free].tocsr()
        self.K_fd = self.K_visc[vec_free][:, vec_dir].tocsr()

        # per-step scalar pattern: element blocks then outlet face blocks
        face_rows, face_cols = [], []
        self._outlet_face_slices = []
        start = 0
        for patch in self.outlets:
            f = patch.faces.astype(np.int64)
            face_rows.append(np.repeat(f, 3, axis=1).ravel())
            face_cols.append(np.tile(f, (1, 3)).ravel())
            self._outlet_face_slices.append((start, start + len(f)))
            start += len(f)
        rows = np.concatenate([geom.elem_rows] + face_rows) if face_rows else geom.elem_rows
        cols = np.concatenate([geom.elem_cols] + face_cols) if face_cols else geom.elem_cols
        self._step_pattern = COOPattern(rows, cols, (n, n))
        self._n_face_vals = start

        # factorizations reused across steps
        rho, tau = props.rho, config.tau
        self._mass_term = (rho / tau) * self.M_s
        # viscous preconditioner: LU of the scalar step operator, refreshed
        # when the advecting field has drifted enough to slow GMRES down
        self._precond_lu = None
        self._precond_refresh_iters = 12
        self._last_iters = 0
        self._mass_lu = splu(self.M_s[self.free][:, self.free].tocsc())
        self._M_fd = self.M_s[self.free][:, self.dirichlet].tocsr()
        self._pressure_cache: tuple | None = None

        # inlet boundary data
        inlet_patch = self.patches["inlet"]
        n_mean = inlet_patch.normals.mean(axis=0)
        self._inlet_inward = -n_mean / np.linalg.norm(n_mean)
        self._stokes_profile: np.ndarray | None = None

    # -- parameters ---------------------------------------------------------

    def set_parameters(self, params: dict[str, float]) -> None:
        """Bind parameter values by name: "U", "Rp<i>", "Rd<i>", "C<i>"."""
        wk_changed = False
        for name, value in params.items():
            if name == "U":
                self.inflow = replace(self.inflow, U=float(value))
                continue
            key, idx = name[:-1], name[-1]
            if not idx.isdigit() or key not in ("Rp", "Rd", "C"):
                raise KeyError(f"unknown parameter {name!r}")
            i = int(idx)
            self.windkessel[i] = replace(self.windkessel[i], **{key: float(value)})
            wk_changed = True
        if wk_changed:
            self._pressure_cache = None

    def _wk_coeffs(self):
        return [windkessel_coefficients(wk, self.config.tau) for wk in self.windkessel]

    def _pressure_lu(self):
        key = tuple((wk.Rp, wk.Rd, wk.C) for wk in self.windkessel)
        if self._pressure_cache is not None and self._pressure_cache[0] == key:
            return self._pressure_cache[1]
        tau, rho, eps = self.config.tau, self.props.rho, self.config.epsilon
        Ap = (tau / rho) * self.K_stiff_s + eps * self.T_stab
        Ap = Ap.tolil()
        for patch, (_, _, gamma) in zip(self.outlets, self._wk_coeffs()):
            if gamma <= 0:
                raise SolverError(f"outlet {patch.tag}: gamma = {gamma} is not positive")
            idx = np.flatnonzero(patch.node_weights)
            a = patch.node_weights[idx] / patch.total_area
            Ap[np.ix_(idx, idx)] = Ap[np.ix_(idx, idx)].toarray() + np.outer(a, a) / gamma
        lu = splu(Ap.tocsc())
        self._pressure_cache = (key, lu)
        return lu

    # -- boundary data ------------------------------------------------------

    def inlet_velocity(self, t: float) -> np.ndarray:
        """Nodal Dirichlet values on the inlet at time t (zeros elsewhere)."""
        value = self.inflow.U * inflow_value(self.inflow, t)
        out = np.zeros((self.n, 3))
        if self.inflow.spatial == "PlugNormal":
            out[self.inlet_only] = value * self._inlet_inward
        else:
            if self._stokes_profile is None:
                from kflow.forward.stokes import solve_stokes_profile

                self._stokes_profile = solve_stokes_profile(self.mesh)
            out[self.inlet_only] = value * self._stokes_profile[self.inlet_only]
        return out

    # -- the four stages ----------------------------------------------------

    def _step_scalar_matrix(self, w: np.ndarray) -> csr_matrix:
        rho, mu = self.props.rho, self.props.mu
        w = np.ascontiguousarray(w)
        elem_vals = kernels.convection_supg_values(
            self.mesh.tets,
            self.geom.grads,
            self.geom.vols,
            self.geom.h,
            w,
            rho,
            self.config.delta,
            4.0 * mu / rho,
        )
        parts = [np.asarray(elem_vals).ravel()]
        if self._n_face_vals:
            face_vals = np.empty((self._n_face_vals, 9))
            for patch, (lo, hi) in zip(self.outlets, self._outlet_face_slices):
                coef = 0.5 * rho * np.maximum(-patch.face_normal_velocity(w), 0.0)
                face_vals[lo:hi] = (coef * patch.areas)[:, None] * FACE_MASS_TEMPLATE.ravel()
            parts.append(face_vals.ravel())
        return self._step_pattern.build(np.concatenate(parts))

    def viscous_step(self, state: FlowState, t: float) -> np.ndarray:
        """Tentative velocity at time t from the linearized momentum solve."""
        A_s = self._step_scalar_matrix(state.u) + self._mass_term
        A_f = A_s[self.free]
        A_ff = A_f[:, self.free].tocsr()
        A_fd = A_f[:, self.dirichlet].tocsr()
        if self._precond_lu is None or self._last_iters > self._precond_refresh_iters:
            self._precond_lu = splu(A_ff.tocsc())

        u_bc = self.inlet_velocity(t)
        u_d = u_bc[self.dirichlet]  # walls are zero rows of u_bc
        rhs_full = self._mass_term @ state.u  # (n, 3), same operator per component
        b = rhs_full[self.free].T.copy()  # (3, nf)
        for c in range(3):
            b[c] -= A_fd @ u_d[:, c]
        b = b.ravel() - self.K_fd @ u_d.ravel(order="F")

        nf = self.nf
        K_ff = self.K_ff

        def matvec(x):
            y = K_ff @ x
            xr = x.reshape(3, nf)
            yr = y.reshape(3, nf)
            for c in range(3):
                yr[c] += A_ff @ xr[c]
            return y

        lu = self._precond_lu

        def psolve(x):
            xr = x.reshape(3, nf)
            return np.stack([lu.solve(xr[c]) for c in range(3)]).ravel()

        op = LinearOperator((3 * nf, 3 * nf), matvec=matvec)
        pre = LinearOperator((3 * nf, 3 * nf), matvec=psolve)
        x0 = state.u[self.free].T.ravel()
        iters = 0

        def count(_):
            nonlocal iters
            iters += 1

        x, info = gmres(
            op,
            b,
            x0=x0,
            rtol=self.config.linear_tol,
            atol=0.0,
            restart=self.config.gmres_restart,
            maxiter=self.config.gmres_maxiter,
            M=pre,
            callback=count,
            callback_type="pr_norm",
        )
        self._last_iters = iters
        if info != 0:
            raise SolverError(f"viscous solve did not converge (info={info})")
        u_tilde = u_bc
        u_tilde[self.free] = x.reshape(3, nf).T
        return u_tilde

    def projection_windkessel_step(self, u_tilde: np.ndarray, pi_prev: np.ndarray) -> np.ndarray:
        """Pressure from the projection problem with outlet coupling."""
        rhs = np.zeros(self.n)
        for c in range(3):
            rhs -= self.G[c] @ u_tilde[:, c]
        for patch, pi_l, (alpha, _, gamma) in zip(self.outlets, pi_prev, self._wk_coeffs()):
            q_t = patch.flux(u_tilde)
            rhs += (q_t + alpha * pi_l / gamma) * (patch.node_weights / patch.total_area)
        return self._pressure_lu().solve(rhs)

    def velocity_correction(self, u_tilde: np.ndarray, p: np.ndarray) -> np.ndarray:
        """L2 projection of u_tilde - (tau/rho) grad p, Dirichlet rows pinned."""
        scale = self.config.tau / self.props.rho
        u = u_tilde.copy()
        u_d = u_tilde[self.dirichlet]
        for c in range(3):
            rhs = self.M_s @ u_tilde[:, c] - scale * (self.G[c] @ p)
            rhs_f = rhs[self.free] - self._M_fd @ u_d[:, c]
            u[self.free, c] = self._mass_lu.solve(rhs_f)
        return u

    def step(self, state: FlowState, params: dict[str, float] | None = None) -> FlowState:
        """One full fractional step; parameters are re-read each call."""
        if params:
            self.set_parameters(params)
        t_new = state.t + self.config.tau
        u_tilde = self.viscous_step(state, t_new)
        p = self.projection_windkessel_step(u_tilde, state.pi)
        u = self.velocity_correction(u_tilde, p)
        pi = np.array(
            [
                windkessel_update(pi_l, patch.mean(p), wk, self.config.tau)
                for patch, pi_l, wk in zip(self.outlets, state.pi, self.windkessel)
            ]
        )
        if not np.all(np.isfinite(u)):
            raise SolverError(f"velocity blew up at t={t_new:.4f}")
        return FlowState(u, p, pi, t_new)

    # -- forward-model contract for the filter -------------------------------

    @property
    def tau(self) -> float:
        return self.config.tau

    def initial_state(self) -> FlowState:
        return FlowState(np.zeros((self.n, 3)), np.zeros(self.n), np.zeros(len(self.outlets)), 0.0)

    def advance(self, state: FlowState, params: dict[str, float] | None, n_steps: int) -> FlowState:
        if params:
            self.set_parameters(params)
        for _ in range(n_steps):
            state = self.step(state)
        return state

    def state_to_vector(self, state: FlowState) -> np.ndarray:
        return np.concatenate([state.u.ravel(order="F"), state.pi])

    def vector_to_state(self, vec: np.ndarray, t: float) -> FlowState:
        nk = len(self.outlets)
        u = vec[: 3 * self.n].reshape(self.n, 3, order="F").copy()
        pi = vec[3 * self.n:].copy() if nk else np.zeros(0)
        return FlowState(u, np.zeros(self.n), pi, t)

    def attach_observation_grid(self, grid) -> None:
        from kflow.imaging.voxelize import VoxelSampler

        self._sampler = VoxelSampler(self.mesh, grid)

    @property
    def sampler(self):
        if getattr(self, "_sampler", None) is None:
            raise RuntimeError("call attach_observation_grid first")
        return self._sampler

    def observe(self, state: FlowState, direction) -> "ScalarField":
        d = np.asarray(direction, dtype=np.float64)
        return self.sampler.sample_nodal(state.u @ d)

    # -- diagnostics ---------------------------------------------------------

    def mass_imbalance(self, state: FlowState) -> tuple[float, float]:
        """(net boundary outflux, inlet flux magnitude) of the corrected velocity."""
        total = sum(p.flux(state.u) for p in self.patches.values())
        q_in = abs(self.patches["inlet"].flux(state.u))
        return float(total), float(q_in)
