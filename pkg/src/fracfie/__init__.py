"""Weighted fractional integral equations: quadrature, Picard solver and
measure-of-noncompactness diagnostics."""

from .fraccalc import (
    GridFunction,
    KernelSpec,
    WarpFunction,
    WeightFunction,
    iterated_weighted_integral,
    weighted_derivative_1,
    weighted_fractional_derivative,
    weighted_fractional_integral,
)
from .mnc import (
    AlphaFunction,
    FunctionFamily,
    SigmaFunction,
    check_generalized_darbo,
    darbo_iteration_diagnostic,
    family_modulus,
    gamma0_estimate,
    hausdorff_mnc,
    modulus_of_continuity,
    verify_mnc_axioms,
)
from .solver import FieProblem, apply_H, picard_solve, residual
from .special import gamma

__version__ = "0.1.0"
