"""Principal eigenpairs of increasing, positively 1-homogeneous operators on cones."""
from .cones import ConeKind, ConeSpec, contains, delta, governed, interior_delta, is_interior, leq
from .errors import KRLError
from .operators import MonotoneOperator, PropertyReport, apply, find_H_constant
from .solver import ContinuationConfig, EigenPair, continuation, residual, solve_eps

__version__ = "0.1.0"
