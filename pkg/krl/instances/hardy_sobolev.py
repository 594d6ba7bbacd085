"""Radial Hardy-Sobolev operator L_mu = -Δ_p - mu |x|^{-p} |.|^{p-2}. on a ball.

Radial grid on (0, R): nodes r_i = i*h (i = 1..n), Dirichlet value at
r_{n+1} = R, no node at the origin. Faces sit between consecutive nodes at
r = (i + 1/2) h and carry the weight r^(n_dim - 1); the face between the
origin and r_1 carries no flux (symmetry), which is the natural condition
at r -> 0. Node i carries the volume weight r_i^(n_dim - 1).

The discrete energy (divided by the constant surface measure) is

    J(v) = h * [ (1/p) sum_f w_f |D_f|^p - (mu/p) sum_i W_i |v_i|^p / r_i^p - sum_i W_i g_i v_i ].
"""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..cones import ConeKind, DEFAULT_TOLERANCE
from ..errors import ConfigError, EvaluationFailure
from ..operators import MonotoneOperator
from .grid import GridFunction, GridSpec
from .newton import minimize_energy
from .plaplace import make_cone, phi, phi_inv


def best_constant(p: float, n_dim: int) -> float:
    """Best constant ((n - p)/p)^p of the Hardy inequality with weight |x|^{-p}."""
    return ((n_dim - p) / p) ** p


class HardySobolevSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float = Field(..., gt=1.0)
    n_dim: int = Field(3, ge=2)
    mu: float = Field(0.0, ge=0.0)
    v_scale: float = Field(1.0, gt=0.0)
    v_decay: float = Field(0.0, ge=0.0)
    grid: GridSpec = GridSpec()
    newton_tol: float = Field(1e-12, gt=0.0)
    max_newton: int = Field(200, gt=0)
    max_picard: int = Field(2000, gt=0)
    eps_reg_factor: float = Field(1e-8, gt=0.0)
    cone: ConeKind = ConeKind.DISCRETE_INTERIOR
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0.0, lt=1.0)

    @field_validator("grid")
    @classmethod
    def _starts_at_origin(cls, grid):
        if grid.interval[0] != 0.0:
            raise ValueError(f"radial grid must start at r = 0, got {grid.interval[0]}")
        return grid

    @model_validator(mode="after")
    def _below_best_constant(self):
        if not self.p < self.n_dim:
            raise ConfigError(f"Hardy-Sobolev needs 1 < p < n_dim, got p={self.p}, n_dim={self.n_dim}",
                              field="p")
        bound = best_constant(self.p, self.n_dim)
        if not self.mu < bound:
            raise ConfigError(f"mu = {self.mu} must be below the best constant ((n_dim-p)/p)^p = {bound:.6g}",
                              field="mu", bound=bound)
        return self

    @property
    def radius(self) -> float:
        return self.grid.interval[1]

    def weight(self, r):
        """Eigen-weight V(r) = v_scale * exp(-v_decay * r); bounded and positive."""
        return self.v_scale * np.exp(-self.v_decay * np.asarray(r))


def _radial_weights(n_dim: int, grid: GridSpec):
    h = grid.h
    r = grid.nodes()
    faces = h * (np.arange(0, grid.n + 1) + 0.5)
    w_face = faces ** (n_dim - 1)
    w_face[0] = 0.0  # no flux through the origin
    return r, w_face, r ** (n_dim - 1)


def radial_plaplace_solve(p: float, n_dim: int, grid: GridSpec, g: GridFunction) -> GridFunction:
    """Exact discrete radial Dirichlet solve for mu = 0: F_f = -h sum_{k<=f} W_k g_k."""
    h = grid.h
    _, w_face, w_node = _radial_weights(n_dim, grid)
    flux = -h * np.cumsum(w_node * g.values)  # faces 1..n
    D = phi_inv(flux / w_face[1:], p)
    v = -h * np.cumsum(D[::-1])[::-1]
    return GridFunction(v, grid)


def _energy_functions(spec: HardySobolevSpec, g, eps_reg, eps_v):
    p, mu, h = spec.p, spec.mu, spec.grid.h
    r, w_face, w_node = _radial_weights(spec.n_dim, spec.grid)
    hardy = w_node / r ** p

    def diffs(v):
        return np.diff(np.concatenate([[v[0]], v, [0.0]])) / h

    def energy(v):
        D = diffs(v)
        return h * (float(w_face @ np.abs(D) ** p) / p
                    - mu * float(hardy @ np.abs(v) ** p) / p
                    - float(w_node @ (g * v)))

    def gradient(v):
        flux = w_face * phi(diffs(v), p)
        return flux[:-1] - flux[1:] - h * (mu * hardy * phi(v, p) + w_node * g)

    def hessians(v):
        D = diffs(v)
        c = w_face * (p - 1.0) * (D * D + eps_reg * eps_reg) ** ((p - 2.0) / 2.0) / h
        n = v.shape[0]
        convex = np.zeros((2, n))
        convex[1] = c[:-1] + c[1:]
        convex[0, 1:] = -c[1:-1]
        if mu > 0.0:
            full = convex.copy()
            full[1] -= h * mu * (p - 1.0) * hardy * (v * v + eps_v * eps_v) ** ((p - 2.0) / 2.0)
            yield full
        yield convex

    return energy, gradient, hessians


def _picard_solve(spec: HardySobolevSpec, g, v0) -> np.ndarray:
    """Monotone iteration L_0 v_{k+1} = g + mu r^{-p} |v_k|^{p-2} v_k on exact radial solves.

    Its fixed point zeroes the same discrete gradient as the energy below. The
    step map is 1-homogeneous in v with ratio about mu / best_constant < 1.
    """
    grid = spec.grid
    singular = spec.mu / grid.nodes() ** spec.p
    v = v0
    step = float("inf")
    for _ in range(spec.max_picard):
        data = GridFunction(g + singular * phi(v, spec.p), grid)
        nxt = radial_plaplace_solve(spec.p, spec.n_dim, grid, data).values
        step = float(np.max(np.abs(nxt - v)))
        v = nxt
        if step <= spec.newton_tol * max(float(np.max(np.abs(v))), np.finfo(float).tiny):
            return v
    raise EvaluationFailure(f"hardy_sobolev(mu={spec.mu:g}): fixed-point iteration did not settle",
                            step=step, iterations=spec.max_picard)


def hardy_sobolev_dirichlet_solve(spec: HardySobolevSpec, g: GridFunction) -> GridFunction:
    """Solve L_mu v = g on the radial grid.

    Newton on the discrete energy; for p < 2 with mu > 0 a fixed-point iteration
    on exact radial solves instead.
    """
    if not spec.mu < best_constant(spec.p, spec.n_dim):
        raise ConfigError("mu is not below the best constant", field="mu")
    data = g.values
    scale = float(np.max(np.abs(data))) if data.size else 0.0
    if scale == 0.0:
        return GridFunction(np.zeros(g.n), g.grid)
    v0 = radial_plaplace_solve(spec.p, spec.n_dim, spec.grid, g).values
    if spec.p < 2.0 and spec.mu > 0.0:
        # Newton cannot reach a gradient tolerance where |v|^{p-2} blows up
        v = _picard_solve(spec, data, v0)
        if not np.all(np.isfinite(v)):
            raise EvaluationFailure("Hardy-Sobolev solve produced non-finite values", mu=spec.mu)
        return GridFunction(v, g.grid)
    eps_reg = spec.eps_reg_factor * scale ** (1.0 / (spec.p - 1.0))
    eps_v = spec.eps_reg_factor * max(float(np.max(np.abs(v0))), math.ulp(1.0))
    energy, gradient, hessians = _energy_functions(spec, data, eps_reg, eps_v)
    h = spec.grid.h
    data_scale = scale * float(np.max(_radial_weights(spec.n_dim, spec.grid)[2]))
    result = minimize_energy(energy, gradient, hessians, v0,
                             gtol=spec.newton_tol * h * data_scale,
                             accept_tol=1e-10 * max(1.0, data_scale),
                             max_iter=spec.max_newton, label=f"hardy_sobolev(mu={spec.mu:g})")
    if not np.all(np.isfinite(result.v)):
        raise EvaluationFailure("Hardy-Sobolev solve produced non-finite values", mu=spec.mu)
    return GridFunction(result.v, g.grid)


def build_hardy_sobolev_operator(spec: HardySobolevSpec) -> MonotoneOperator:
    """T f = L_mu^{-1}(V |f|^{p-2} f); PDE eigenvalue = lambda0^(p-1)."""
    grid = spec.grid
    V = spec.weight(grid.nodes())

    def fn(f):
        return hardy_sobolev_dirichlet_solve(spec, GridFunction(V * phi(f, spec.p), grid)).values

    r = grid.nodes()
    return MonotoneOperator(fn, grid.n, make_cone(spec.cone, grid, spec.tolerance),
                            f"hardy_sobolev(p={spec.p:g},mu={spec.mu:g})",
                            eigenvalue_power=spec.p - 1.0, default_u=1.0 - r / spec.radius, spec=spec)
