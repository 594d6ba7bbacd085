"""1D Pucci extremal operators and their Dirichlet solution operator.

In one dimension M+(s) = max(lam*s, Lam*s) and M-(s) = min(lam*s, Lam*s).
The operator T solves -F(D2_h v) = f (sign flipped with respect to
F(D2 u) = f so that f >= 0 gives v >= 0).
"""
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import solve_banded

from ..cones import ConeKind, DEFAULT_TOLERANCE
from ..errors import ConfigError, EvaluationFailure, PolicyCycle
from ..logs import log_json
from ..operators import MonotoneOperator
from .grid import GridFunction, GridSpec
from .plaplace import make_cone

VARIANT_ALIASES = {"M+": "plus", "+": "plus", "M-": "minus", "-": "minus"}


class PucciSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_p: float = Field(1.0, gt=0.0)
    big_lambda: float = Field(1.0, gt=0.0)
    variant: Literal["plus", "minus"] = "plus"
    grid: GridSpec = GridSpec()
    residual_tol: float = Field(1e-12, gt=0.0)
    cone: ConeKind = ConeKind.DISCRETE_INTERIOR
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0.0, lt=1.0)

    @field_validator("variant", mode="before")
    @classmethod
    def _variant_alias(cls, value):
        return VARIANT_ALIASES.get(value, value)

    @model_validator(mode="after")
    def _ordered_ellipticity(self):
        if self.lambda_p > self.big_lambda:
            raise ConfigError(f"ellipticity needs lambda_p <= big_lambda, got {self.lambda_p} > {self.big_lambda}",
                              field="lambda_p")
        return self


def pucci(spec: PucciSpec, s):
    """Pointwise 1D Pucci operator applied to second differences s."""
    lo, hi = spec.lambda_p * s, spec.big_lambda * s
    return np.maximum(lo, hi) if spec.variant == "plus" else np.minimum(lo, hi)


def second_difference(v, h):
    padded = np.concatenate([[0.0], v, [0.0]])
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / (h * h)


def _laplacian_bands(n, h):
    ab = np.empty((3, n))
    ab[0], ab[1], ab[2] = -1.0, 2.0, -1.0
    return ab / (h * h)


def _improve(spec: PucciSpec, coeff, s):
    # switch a node only when the other coefficient is strictly better
    lam, Lam = spec.lambda_p, spec.big_lambda
    want_big = s > 0 if spec.variant == "plus" else s < 0
    target = np.where(want_big, Lam, lam)
    gain = np.abs((target - coeff) * s)
    threshold = 64 * np.finfo(float).eps * max(float(np.max(np.abs(Lam * s))), np.finfo(float).tiny)
    return np.where(gain > threshold, target, coeff)


def pucci_dirichlet_solve(spec: PucciSpec, f: GridFunction) -> GridFunction:
    """Policy iteration on the per-node coefficient a_i in {lambda_p, big_lambda}."""
    n, h = f.n, f.h
    rhs = f.values
    if not np.any(rhs):
        return GridFunction(np.zeros(n), f.grid)
    bands = _laplacian_bands(n, h)
    coeff = np.full(n, spec.lambda_p if spec.variant == "plus" else spec.big_lambda)
    seen = set()
    best = np.inf
    for it in range(2 * n + 10):
        v = solve_banded((1, 1), bands, rhs / coeff)
        s = second_difference(v, h)
        residual = float(np.max(np.abs(-pucci(spec, s) - rhs)))
        new = _improve(spec, coeff, s)
        if np.array_equal(new, coeff):
            scale = float(np.max(np.abs(rhs))) + 4.0 * spec.big_lambda * float(np.max(np.abs(v))) / (h * h)
            if residual > spec.residual_tol * scale:
                raise EvaluationFailure("Pucci policy iteration converged with a large residual",
                                        residual=residual, tolerance=spec.residual_tol * scale)
            log_json("DEBUG", "Pucci solve converged", component="instances", policy_switches=it,
                     residual=residual)
            return GridFunction(v, f.grid)
        key = new.tobytes()
        if key in seen and residual >= best:
            raise PolicyCycle("policy repeated without residual decrease", iterations=it, residual=residual)
        seen.add(coeff.tobytes())
        best = min(best, residual)
        coeff = new
    raise PolicyCycle("policy iteration exceeded its switch budget", iterations=2 * n + 10)


def build_pucci_operator(spec: PucciSpec) -> MonotoneOperator:
    """T f = v with -F(D2 v) = f; PDE eigenvalue = lambda0."""
    grid = spec.grid

    def fn(f):
        return pucci_dirichlet_solve(spec, GridFunction(f, grid)).values

    sign = "+" if spec.variant == "plus" else "-"
    return MonotoneOperator(fn, grid.n, make_cone(spec.cone, grid, spec.tolerance),
                            f"pucci{sign}({spec.lambda_p:g},{spec.big_lambda:g})",
                            eigenvalue_power=1.0, default_u=GridFunction.hat(grid).values, spec=spec)
