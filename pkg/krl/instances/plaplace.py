"""1D p-Laplacian Dirichlet solve and its inverse operator.

Discretization: forward differences ``D_f = (v_{f+1} - v_f)/h`` on the
``n + 1`` faces of the grid and the discrete energy

    J_h(v) = h * sum_f |D_f|^p / p  -  h * sum_i g_i v_i,

which is convex, so the Dirichlet problem is a minimization. Its optimality
condition is the flux balance ``phi(D_{i-1}) - phi(D_i) = h g_i`` with
``phi(s) = |s|^(p-2) s``; in 1D that integrates once, which gives the exact
discrete solution up to one scalar root (the flux constant). Newton then
polishes it to the gradient tolerance.
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq

from ..cones import ConeKind, ConeSpec, DEFAULT_TOLERANCE
from ..errors import EvaluationFailure
from ..logs import log_json
from ..operators import MonotoneOperator
from .grid import GridFunction, GridSpec
from .newton import minimize_energy

EPS = np.finfo(float).eps


class PLaplaceSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float = Field(..., gt=1.0)
    grid: GridSpec = GridSpec()
    newton_tol: float = Field(1e-12, gt=0.0)
    max_newton: int = Field(200, gt=0)
    eps_reg_factor: float = Field(1e-8, gt=0.0)
    cone: ConeKind = ConeKind.DISCRETE_INTERIOR
    tolerance: float = Field(DEFAULT_TOLERANCE, ge=0.0, lt=1.0)


def phi(s, p):
    return np.sign(s) * np.abs(s) ** (p - 1.0)


def phi_inv(q, p):
    return np.sign(q) * np.abs(q) ** (1.0 / (p - 1.0))


def make_cone(kind: ConeKind, grid: GridSpec, tolerance: float) -> ConeSpec:
    if kind is ConeKind.DISCRETE_INTERIOR:
        return ConeSpec.interior(grid.n, grid.h, tolerance)
    return ConeSpec.orthant(grid.n, tolerance)


def face_differences(v, h):
    padded = np.concatenate([[0.0], v, [0.0]])
    return np.diff(padded) / h


def tridiagonal_bands(c):
    """Upper band form of the stiffness matrix with face coefficients c (n + 1 faces)."""
    n = c.shape[0] - 1
    ab = np.zeros((2, n))
    ab[1] = c[:-1] + c[1:]
    ab[0, 1:] = -c[1:-1]
    return ab


def flux_quadrature(p: float, h: float, g: np.ndarray) -> np.ndarray:
    """Exact minimizer of J_h: F_f = c - h*sum_{k<=f} g_k, with c fixed by v_{n+1} = 0."""
    G = np.concatenate([[0.0], np.cumsum(h * g)])
    lo, hi = float(np.min(G)), float(np.max(G))
    if hi - lo <= 0.0:
        return np.zeros_like(g)

    def closure(c):
        return float(np.sum(phi_inv(c - G, p)))

    c = brentq(closure, lo, hi, xtol=EPS * max(abs(lo), abs(hi)), rtol=4 * EPS, maxiter=500)
    D = phi_inv(c - G, p)
    return h * np.cumsum(D)[:-1]


def _energy_functions(p, h, g, eps_reg):
    def energy(v):
        D = face_differences(v, h)
        return h * float(np.sum(np.abs(D) ** p)) / p - h * float(g @ v)

    def gradient(v):
        flux = phi(face_differences(v, h), p)
        return flux[:-1] - flux[1:] - h * g

    def hessians(v):
        D = face_differences(v, h)
        c = (p - 1.0) * (D * D + eps_reg * eps_reg) ** ((p - 2.0) / 2.0) / h
        yield tridiagonal_bands(c)

    return energy, gradient, hessians


def plaplace_dirichlet_solve(spec: PLaplaceSpec, g: GridFunction) -> GridFunction:
    """Discrete minimizer of J_h for data g (any sign)."""
    p, h = spec.p, g.h
    data = g.values
    scale = float(np.max(np.abs(data))) if data.size else 0.0
    if scale == 0.0:
        return GridFunction(np.zeros(g.n), g.grid)
    try:
        v0 = flux_quadrature(p, h, data)
    except (ValueError, RuntimeError) as e:
        log_json("WARNING", "flux quadrature failed, starting Newton from zero", component="instances",
                 error=str(e))
        v0 = np.zeros(g.n)
    eps_reg = spec.eps_reg_factor * scale ** (1.0 / (p - 1.0))
    energy, gradient, hessians = _energy_functions(p, h, data, eps_reg)
    result = minimize_energy(energy, gradient, hessians, v0,
                             gtol=spec.newton_tol * h * scale,
                             accept_tol=1e-10 * max(1.0, scale),
                             max_iter=spec.max_newton, label=f"plaplace(p={p:g})")
    if not np.all(np.isfinite(result.v)):
        raise EvaluationFailure("p-Laplacian solve produced non-finite values", p=p)
    return GridFunction(result.v, g.grid)


def build_plaplace_operator(spec: PLaplaceSpec) -> MonotoneOperator:
    """T f = (-Δ_p)^{-1}(|f|^{p-2} f); PDE eigenvalue = lambda0^(p-1)."""
    grid = spec.grid

    def fn(f):
        return plaplace_dirichlet_solve(spec, GridFunction(phi(f, spec.p), grid)).values

    return MonotoneOperator(fn, grid.n, make_cone(spec.cone, grid, spec.tolerance), f"plaplace(p={spec.p:g})",
                            eigenvalue_power=spec.p - 1.0, default_u=GridFunction.hat(grid).values, spec=spec)
