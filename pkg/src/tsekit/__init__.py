"""Kinematics and design-space analysis for the triple scissor extender,
a 6-DOF parallel mechanism built from three scissor linkages on linear slides."""

from .core import (
    ActuatorLayout,
    ActuatorVector,
    DomainError,
    Pose,
    ScissorFrame,
    ScissorGeometry,
    TopPlate,
    TseDesign,
)
from .kinematics import (
    InfeasibleSolution,
    NoRealSolution,
    NonConvergence,
    apex_positions,
    forward_kinematics,
    inverse_kinematics,
)
from .differential import inverse_jacobian, jacobian_analysis, singularity_matrix
from .design import (
    WorkspaceGrid,
    height_amplification_factor,
    parameter_sweep,
    sigma_z_profile,
    workspace_volume,
)
from .config import load_design, prototype_design

__version__ = "0.1.0"
