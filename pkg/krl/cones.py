"""Ordered-vector-space primitives for the cones the solver works in.

Two cones are supported, both with a coordinate-wise membership test:

* ``NonNegOrthant``: ``x_i >= 0``.
* ``DiscreteInteriorCone``: grid analogue of ``{w >= 0 in the domain,
  dw/dn <= 0 on the boundary}``. The vector holds the interior values of a
  grid function with zero Dirichlet data; the governed coordinates are the
  interior values followed by the two negated outward boundary slopes
  ``(w_1 - w_0)/h`` and ``(w_n - w_{n+1})/h``.

Membership is tolerant: a governed coordinate ``g_i`` passes when
``g_i >= -eta * max(1, ||g||_inf)``.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigError, DimensionMismatch, NotInCone

DEFAULT_TOLERANCE = 1e-10


class ConeKind(str, Enum):
    NON_NEG_ORTHANT = "NonNegOrthant"
    DISCRETE_INTERIOR = "DiscreteInteriorCone"


class ConeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ConeKind = ConeKind.NON_NEG_ORTHANT
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0.0, lt=1.0)
    n: int = Field(..., gt=0)
    h: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _spacing_for_grid_cone(self):
        if self.kind is ConeKind.DISCRETE_INTERIOR and self.h is None:
            raise ConfigError("DiscreteInteriorCone needs a grid spacing h")
        return self

    @classmethod
    def orthant(cls, n: int, tolerance: float = DEFAULT_TOLERANCE) -> "ConeSpec":
        return cls(kind=ConeKind.NON_NEG_ORTHANT, n=n, tolerance=tolerance)

    @classmethod
    def interior(cls, n: int, h: float, tolerance: float = DEFAULT_TOLERANCE) -> "ConeSpec":
        return cls(kind=ConeKind.DISCRETE_INTERIOR, n=n, h=h, tolerance=tolerance)

    def widened(self, extra: float) -> "ConeSpec":
        return self.model_copy(update={"tolerance": min(self.tolerance + extra, 0.5)})


@dataclass(frozen=True)
class DeltaValue:
    value: float

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise ValueError(f"delta must be nonnegative, got {self.value}")

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def __float__(self):
        return float(self.value)


def _as_vector(K: ConeSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != K.n:
        raise DimensionMismatch(f"expected a vector of length {K.n}, got shape {x.shape}", expected=K.n)
    return x


def governed(K: ConeSpec, x) -> np.ndarray:
    x = _as_vector(K, x)
    if K.kind is ConeKind.NON_NEG_ORTHANT:
        return x
    slopes = np.array([x[0], x[-1]]) / K.h  # boundary values are zero
    return np.concatenate([x, slopes])


def _scale(g: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)


def _contains_governed(K: ConeSpec, g: np.ndarray) -> bool:
    return bool(np.all(g >= -K.tolerance * _scale(g)))


def contains(K: ConeSpec, x) -> bool:
    return _contains_governed(K, governed(K, x))


def leq(K: ConeSpec, x, y) -> bool:
    """x ≼ y, i.e. y - x in K."""
    x, y = _as_vector(K, x), _as_vector(K, y)
    return contains(K, y - x)


def is_interior(K: ConeSpec, x) -> bool:
    g = governed(K, x)
    return bool(np.all(g > K.tolerance * _scale(g)))


def delta(K: ConeSpec, x, y) -> DeltaValue:
    """Largest t >= 0 with x + t*y in K; infinite when y itself lies in K."""
    x, y = _as_vector(K, x), _as_vector(K, y)
    if not contains(K, x):
        raise NotInCone("delta needs x in K")
    if contains(K, y):
        return DeltaValue(math.inf)

    gx, gy = governed(K, x), governed(K, y)
    negative = gy < 0
    # subnormal components of y push the bracket past the float range
    with np.errstate(over="ignore", invalid="ignore"):
        ratios = np.maximum(gx[negative], 0.0) / -gy[negative]
        start = min(float(np.min(ratios)), np.finfo(float).max)
        member = lambda t: _contains_governed(K, gx + t * gy)
        return DeltaValue(_largest_member(member, start, gx, gy, K.tolerance))


def interior_delta(K: ConeSpec, x, y) -> DeltaValue:
    """Interior case of delta: x in the interior and y outside K give delta > 0."""
    if not is_interior(K, x):
        raise NotInCone("interior_delta needs x in the interior of K")
    if contains(K, y):
        raise NotInCone("interior_delta needs y outside K")
    value = delta(K, x, y)
    if value.value <= 0.0:
        raise NotInCone("delta vanished for an interior point", delta=value.value)
    return value


def _largest_member(member, start, gx, gy, eta, bisections=200):
    # the exact eta = 0 formula is a bracket; the tolerance band is found by bisection
    lo = start
    shrink = 0
    while not member(lo):
        shrink += 1
        if shrink > 52:
            lo = 0.0
            break
        lo = lo * (1.0 - 2.0 ** (shrink - 53))
    step = (eta + 2.0 ** -52) * (1.0 + lo) * (1.0 + np.max(np.abs(gx)) / np.max(np.abs(gy)))
    hi = lo + step
    for _ in range(2000):
        if not member(hi):
            break
        lo, step = hi, step * 2.0
        hi = lo + step
    else:
        return lo
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if member(mid):
            lo = mid
        else:
            hi = mid
    return lo
