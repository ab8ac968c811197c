"""Radon transforms with adjoints, FBP, iterative solvers, alpha-shearlets and ADMM reconstruction."""

__version__ = "0.1.0"

from .tensor import PRECISIONS, to_half_storage, relative_error, mse, precision_of, as_precision
from .geometry import ParallelGeometry, FanbeamGeometry, make_parallel, make_fanbeam, angles_linspace
from .phantom import shepp_logan
from .projector import forward, backprojection, materialize_matrix
from .filtering import FilterSpec, make_filter, filter_sinogram, fbp
from .linop import LinearOperator, adjoint_check, gradient_check
from .solvers import estimate_alpha, landweber, cg, cgne
from .shearlet import ShearletPlan, make_plan
from .admm import AdmmParams, shrink, admm_reconstruct, admm_objective
from .npyio import read_array, write_array

__all__ = [
    "PRECISIONS", "to_half_storage", "relative_error", "mse", "precision_of", "as_precision",
    "ParallelGeometry", "FanbeamGeometry", "make_parallel", "make_fanbeam", "angles_linspace",
    "shepp_logan",
    "forward", "backprojection", "materialize_matrix",
    "FilterSpec", "make_filter", "filter_sinogram", "fbp",
    "LinearOperator", "adjoint_check", "gradient_check",
    "estimate_alpha", "landweber", "cg", "cgne",
    "ShearletPlan", "make_plan",
    "AdmmParams", "shrink", "admm_reconstruct", "admm_objective",
    "read_array", "write_array",
]
