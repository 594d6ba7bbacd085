from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ConfigError, DimensionMismatch


class GridSpec(BaseModel):
    """Uniform grid with ``n`` interior nodes on ``interval``; h = (b - a)/(n + 1)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(199, ge=3)
    interval: Tuple[float, float] = (0.0, 1.0)

    @field_validator("interval")
    @classmethod
    def _ordered(cls, value):
        a, b = value
        if not b > a:
            raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
        return value

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    def nodes(self) -> np.ndarray:
        a = self.interval[0]
        return a + self.h * np.arange(1, self.n + 1)


@dataclass(frozen=True)
class GridFunction:
    """Interior values of a function with zero Dirichlet data on the grid ends."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n:
            raise DimensionMismatch(f"grid has {self.grid.n} nodes, got {values.shape}")
        if self.grid.n < 3:
            raise ConfigError("grid functions need n >= 3")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def interval(self):
        return self.grid.interval

    def nodes(self) -> np.ndarray:
        return self.grid.nodes()

    def with_boundary(self) -> np.ndarray:
        return np.concatenate([[0.0], self.values, [0.0]])

    @classmethod
    def from_callable(cls, grid: GridSpec, fn) -> "GridFunction":
        return cls(np.asarray(fn(grid.nodes()), dtype=float), grid)

    @classmethod
    def hat(cls, grid: GridSpec) -> "GridFunction":
        a, b = grid.interval
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return cls.from_callable(grid, lambda x: 1.0 - np.abs(x - mid) / half)

    @classmethod
    def bump(cls, grid: GridSpec, center=None, width=None) -> "GridFunction":
        """Smooth compactly supported bump, nonnegative."""
        a, b = grid.interval
        center = 0.5 * (a + b) if center is None else center
        width = 0.25 * (b - a) if width is None else width

        def fn(x):
            s = (x - center) / width
            out = np.zeros_like(x)
            inside = np.abs(s) < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return out

        return cls.from_callable(grid, fn)
