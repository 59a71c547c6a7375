"""Generalised Chazy equations: integration, Halphen combinations and the
maps between solutions for different parameters."""

from .core import (Parameter, RationalSolutionSpec, SystemSpec, Triple,
                   admissible_residues, chazy_coefficient, rational_triple,
                   rational_trajectory, residual, system_rhs)
from .errors import (BranchCollision, ChazyError, DegenerateInput, InconsistentRoot,
                     MultipleRoot, OutOfRange, ParameterMismatch, PoleAtSix)
from .halphen import AngleTriple, CombinationRule, WState, admissible_rules, triple_from_w
from .odeint import integrate
from .roots import BranchState, PolySpec, solve, track_branch
from .transforms import apply, catalog, compose, implicit_root_derivative
from .verify import audit, commutation_check, transform_residual, verify_trajectory

__version__ = "0.1.0"

__all__ = [
    "AngleTriple", "BranchCollision", "BranchState", "ChazyError", "CombinationRule",
    "DegenerateInput", "InconsistentRoot", "MultipleRoot", "OutOfRange", "Parameter",
    "ParameterMismatch", "PoleAtSix", "PolySpec", "RationalSolutionSpec", "SystemSpec",
    "Triple", "WState", "admissible_residues", "admissible_rules", "apply", "audit",
    "catalog", "chazy_coefficient", "commutation_check", "compose",
    "implicit_root_derivative", "integrate", "rational_trajectory", "rational_triple",
    "residual", "solve", "system_rhs", "track_branch", "transform_residual",
    "triple_from_w", "verify_trajectory",
]
