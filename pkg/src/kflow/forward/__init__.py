"""Incompressible Navier-Stokes forward model with Windkessel outlets."""

from kflow.forward.inflow import InflowProfile, inflow_value
from kflow.forward.mesh import Mesh, load_mesh, load_medit_mesh, save_mesh, tube_mesh, y_bifurcation_mesh
from kflow.forward.solver import FlowState, NavierStokesModel, SolverConfig
from kflow.forward.stokes import solve_stokes_flow, solve_stokes_profile
from kflow.forward.surrogate import SurrogateNetworkModel
from kflow.forward.windkessel import WindkesselParams, windkessel_coefficients, windkessel_update

__all__ = [
    "Mesh",
    "load_mesh",
    "save_mesh",
    "load_medit_mesh",
    "tube_mesh",
    "y_bifurcation_mesh",
    "InflowProfile",
    "inflow_value",
    "WindkesselParams",
    "windkessel_coefficients",
    "windkessel_update",
    "FlowState",
    "SolverConfig",
    "NavierStokesModel",
    "SurrogateNetworkModel",
    "solve_stokes_profile",
    "solve_stokes_flow",
]
