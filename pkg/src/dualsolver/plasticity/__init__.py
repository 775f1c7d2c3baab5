"""Material-point DtP systems for single-crystal plasticity."""
from .kinematics import SlipGeometry, check_admissible
from .models import (MaterialResponse, RateDependentModel, RateIndependentModel,
                     check_model_partials)
from .residuals import (constraint_rows, dtp_residual_rd, dtp_residual_ri, fd_jacobian,
                        lagrangian, lagrangian_rd, lagrangian_ri, layout_for, residual,
                        yield_values)
from .solve import (ConvexityReport, DtPReport, convexity_audit, default_base,
                    dtp_solve, dtp_solve_rd, dtp_solve_ri, enforce_constraint_rows,
                    minimize_lagrangian, random_dual)
from .state import DUAL_FIELDS, DualPointValue, Layout, PlasticAuxPotential

__all__ = [
    "SlipGeometry", "check_admissible", "MaterialResponse", "RateDependentModel",
    "RateIndependentModel", "check_model_partials", "constraint_rows", "dtp_residual_rd",
    "dtp_residual_ri", "fd_jacobian", "lagrangian", "lagrangian_rd", "lagrangian_ri",
    "layout_for", "residual", "yield_values", "ConvexityReport", "DtPReport",
    "convexity_audit", "default_base", "dtp_solve", "dtp_solve_rd", "dtp_solve_ri",
    "enforce_constraint_rows", "minimize_lagrangian", "random_dual", "DUAL_FIELDS",
    "DualPointValue", "Layout", "PlasticAuxPotential",
]
