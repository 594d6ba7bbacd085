"""Concrete operators: nonnegative matrices and the inverses of the 1D
p-Laplacian, the radial Hardy-Sobolev operator and the 1D Pucci operators."""
from typing import Union

import numpy as np

from ..errors import ConfigError
from ..operators import MonotoneOperator
from .grid import GridFunction, GridSpec
from .hardy_sobolev import (HardySobolevSpec, best_constant, build_hardy_sobolev_operator,
                            hardy_sobolev_dirichlet_solve, radial_plaplace_solve)
from .matrix import build_matrix_operator, load_matrix
from .plaplace import PLaplaceSpec, build_plaplace_operator, plaplace_dirichlet_solve
from .pucci import PucciSpec, build_pucci_operator, pucci_dirichlet_solve

InverseSpec = Union[PLaplaceSpec, HardySobolevSpec, PucciSpec]


def build_inverse_operator(spec: InverseSpec) -> MonotoneOperator:
    """Wrap the Dirichlet solve of ``spec`` as the operator T.

    Eigenvalue dictionary: PDE eigenvalue = lambda0^(p-1) for p-type
    instances, lambda0 for Pucci (see ``MonotoneOperator.eigenvalue_power``).
    """
    if isinstance(spec, PLaplaceSpec):
        return build_plaplace_operator(spec)
    if isinstance(spec, HardySobolevSpec):
        return build_hardy_sobolev_operator(spec)
    if isinstance(spec, PucciSpec):
        return build_pucci_operator(spec)
    raise ConfigError(f"no inverse operator for {type(spec).__name__}")


def build_operator(spec) -> MonotoneOperator:
    if isinstance(spec, np.ndarray) or isinstance(spec, (list, tuple)):
        return build_matrix_operator(spec)
    return build_inverse_operator(spec)


__all__ = [
    "GridFunction", "GridSpec", "HardySobolevSpec", "PLaplaceSpec", "PucciSpec", "best_constant",
    "build_hardy_sobolev_operator", "build_inverse_operator", "build_matrix_operator", "build_operator",
    "build_plaplace_operator", "build_pucci_operator", "hardy_sobolev_dirichlet_solve", "load_matrix",
    "plaplace_dirichlet_solve", "pucci_dirichlet_solve", "radial_plaplace_solve",
]
