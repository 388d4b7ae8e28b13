"""Two-domain phase-field (Caginalp) solver with energy and well-posedness diagnostics."""
from .assembly import AssembledOperators, ModelParams, assemble_operators, project_initial_data
from .diagnostics import DiagnosticsMonitor, DiagnosticsRecord, free_energy
from .geometry import Mesh, MeshSpec, build_nested_rect_mesh, validate_mesh
from .state import FieldState
from .stepper import CubicMode, SemiImplicitStepper, StepperConfig

__all__ = [
    "AssembledOperators", "CubicMode", "DiagnosticsMonitor", "DiagnosticsRecord", "FieldState", "Mesh",
    "MeshSpec", "ModelParams", "SemiImplicitStepper", "StepperConfig", "assemble_operators",
    "build_nested_rect_mesh", "free_energy", "project_initial_data", "validate_mesh",
]
