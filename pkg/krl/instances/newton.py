"""Damped Newton for the discrete Dirichlet energies, with a Barzilai-Borwein
gradient-descent fallback.

The energies have tridiagonal Hessians. ``hessians(v)`` yields candidate
band matrices in upper LAPACK form (``ab[0, 1:]`` superdiagonal, ``ab[1]``
diagonal), most accurate first; the first one that factors as SPD is used,
so a convex majorant can stand in when the true Hessian is indefinite.
"""
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from ..errors import EvaluationFailure
from ..logs import log_json

ARMIJO = 1e-4


@dataclass(frozen=True)
class NewtonResult:
    v: np.ndarray
    gradient_norm: float
    iterations: int
    fallback: bool


def _norm(x):
    return float(np.max(np.abs(x))) if x.size else 0.0


def _newton_direction(g, bands: Iterable[np.ndarray]):
    for ab in bands:
        try:
            factor = cholesky_banded(ab, lower=False)
        except (LinAlgError, ValueError):
            continue
        return -cho_solve_banded((factor, False), g)
    return -g


def minimize_energy(energy: Callable, gradient: Callable, hessians: Callable, v0: np.ndarray,
                    gtol: float, accept_tol: float, max_iter: int = 200, label: str = "energy",
                    bb_max_iter: int = 20000) -> NewtonResult:
    """Minimize until ||grad||_inf <= gtol (or stagnation below accept_tol)."""
    v = np.array(v0, dtype=float)
    g = gradient(v)
    gnorm = _norm(g)
    for it in range(max_iter):
        if gnorm <= gtol:
            return NewtonResult(v, gnorm, it, False)
        d = _newton_direction(g, hessians(v))
        slope = float(g @ d)
        if not slope < 0:
            d, slope = -g, -float(g @ g)
        E = energy(v)
        alpha, accepted = 1.0, False
        floor = 4 * np.finfo(float).eps * max(_norm(v), np.finfo(float).tiny)
        dnorm = _norm(d)
        for _ in range(60):
            if alpha * dnorm <= floor and gnorm <= accept_tol:
                break
            w = v + alpha * d
            if energy(w) <= E + ARMIJO * alpha * slope:
                accepted = True
                break
            # near the minimum energy differences drown in roundoff; accept on gradient decrease
            gw = gradient(w)
            if _norm(gw) < (1.0 - ARMIJO * alpha) * gnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        step = alpha * _norm(d)
        v = w
        g = gradient(v)
        gnorm = _norm(g)
        if step <= 4 * np.finfo(float).eps * max(_norm(v), np.finfo(float).tiny) and gnorm <= accept_tol:
            return NewtonResult(v, gnorm, it + 1, False)
    if gnorm <= accept_tol:
        return NewtonResult(v, gnorm, max_iter, False)

    log_json("WARNING", "Newton stalled, falling back to gradient descent", component="instances",
             solve=label, gradient_norm=gnorm)
    return _barzilai_borwein(energy, gradient, v, gtol, accept_tol, bb_max_iter, label)


def _barzilai_borwein(energy, gradient, v, gtol, accept_tol, max_iter, label) -> NewtonResult:
    g = gradient(v)
    gnorm = _norm(g)
    alpha = 1.0 / max(gnorm, 1.0)
    iterations = 0
    for iterations in range(max_iter):
        if gnorm <= gtol:
            break
        E = energy(v)
        slope = -float(g @ g)
        step = alpha
        for _ in range(60):
            w = v - step * g
            if energy(w) <= E + ARMIJO * step * slope:
                break
            step *= 0.5
        else:
            break
        gw = gradient(w)
        s, y = w - v, gw - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else 2.0 * step
        v, g = w, gw
        gnorm = _norm(g)
    if gnorm > accept_tol:
        raise EvaluationFailure(f"{label}: Newton and gradient descent both stalled",
                                gradient_norm=gnorm, tolerance=accept_tol)
    return NewtonResult(v, gnorm, iterations, True)
