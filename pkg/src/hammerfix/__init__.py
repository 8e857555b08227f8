"""Positive fixed points of Hammerstein integral operators with rank-2 kernels."""

__version__ = "0.1.0"

from .expr import Expression, check_cone, evaluate, parse_expr
from .quad import CoefficientSet, KernelSpec, binomial, compute_coefficients, integrate
from .polyroots import (
    PolySpec,
    PositiveRoot,
    build_polynomial,
    descartes_positive_bound,
    isolate_and_refine,
    root_upper_bound,
    sturm_count,
)
from .solver import (
    FixedPointFn,
    PlanePoint,
    SolveOptions,
    SolveReport,
    classify,
    reconstruct,
    root_to_point,
    solve,
    verify_operator,
    verify_q,
)
from .gibbs import GibbsModel, analyze, gibbs_coefficients, gibbs_d, h_function_check
