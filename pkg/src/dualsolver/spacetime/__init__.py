"""Dual scheme for first-order PDE systems on a 1-D space x time grid."""
from .dirichlet import ELASTOSTATIC_ROWS, dirichlet_defect, elastostatics_layout, encode_dirichlet
from .dtp import pointwise_dtp
from .fields import DualFieldState, PdeAuxPotential
from .grid import SpaceTimeGrid
from .kernels import BACKEND
from .solver import (DiscreteDual, RecoveredPrimal, SpaceTimeReport, assemble_dual_gradient,
                     consistency_residual, discrete_objective, export_dual_csv,
                     export_primal_csv, project_to_nodes, solve_dual_field)
from .systems import BUILTINS, DualBC, FirstOrderSystem, burgers, heat, transport

__all__ = [
    "BACKEND", "BUILTINS", "DiscreteDual", "DualBC", "DualFieldState", "ELASTOSTATIC_ROWS",
    "FirstOrderSystem", "PdeAuxPotential", "RecoveredPrimal", "SpaceTimeGrid",
    "SpaceTimeReport", "assemble_dual_gradient", "burgers", "consistency_residual",
    "dirichlet_defect", "discrete_objective", "elastostatics_layout", "encode_dirichlet",
    "export_dual_csv", "export_primal_csv", "heat", "pointwise_dtp", "project_to_nodes",
    "solve_dual_field", "transport",
]
