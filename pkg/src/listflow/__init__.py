"""Finite-difference simulation of the rotationally symmetric List flow."""
from .dynamics import NonFiniteError, Outcome, StepOutcome, Trajectory, cfl_dt, evolve, rhs, step
from .geometry import (
    AdmEstimate, CurvatureProfile, MassProfile, bianchi_residual, curvature, deturck_gradient, masses,
)
from .grid import Parity, RadialGrid, build_grid, d1, d2
from .monitors import BoundConstants, DiagnosticsRecord, audit, compute_constants
from .singularity import BlowUpRecord, BlowUpTracker, rescale, track_blowup
from .state import (
    DataKind, FlowParameters, FlowState, InitialDataSpec, OuterBC, make_initial_data, reconstruct_u,
    validate_asymptotics,
)

__version__ = "0.1.0"

__all__ = [
    "AdmEstimate", "BlowUpRecord", "BlowUpTracker", "BoundConstants", "CurvatureProfile", "DataKind",
    "DiagnosticsRecord", "FlowParameters", "FlowState", "InitialDataSpec", "MassProfile", "NonFiniteError",
    "OuterBC", "Outcome", "Parity", "RadialGrid", "StepOutcome", "Trajectory", "audit", "bianchi_residual",
    "build_grid", "cfl_dt", "compute_constants", "curvature", "d1", "d2", "deturck_gradient", "evolve",
    "make_initial_data", "masses", "reconstruct_u", "rescale", "rhs", "step", "track_blowup",
    "validate_asymptotics",
]
