"""Independent reference computations used to certify solver output."""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import cho_solve_banded, cholesky_banded, eig, LinAlgError

from .errors import BracketFailure, ConfigError, EvaluationFailure
from .instances.grid import GridSpec
from .instances.plaplace import face_differences, phi, tridiagonal_bands
from .instances.pucci import VARIANT_ALIASES
from .logs import log_json

MAX_DENSE_N = 64


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray  # complex, modulus descending
    radius: float
    perron_vector: Optional[np.ndarray] = None


def dense_spectrum(A) -> SpectrumResult:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"dense_spectrum needs a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DENSE_N:
        raise ConfigError(f"dense_spectrum is capped at n = {MAX_DENSE_N}, got {A.shape[0]}")
    mu, vecs = eig(A)
    order = np.lexsort((-mu.imag, -mu.real, -np.round(np.abs(mu), 12)))
    mu, vecs = mu[order], vecs[:, order]
    radius = float(np.max(np.abs(mu)))
    return SpectrumResult(eigenvalues=mu, radius=radius, perron_vector=_perron_vector(mu, vecs, radius))


def _perron_vector(mu, vecs, radius):
    for value, vec in zip(mu, vecs.T):
        if abs(value - radius) > 1e-10 * max(radius, 1.0):
            continue
        if np.max(np.abs(vec.imag)) > 1e-10 * np.max(np.abs(vec)):
            continue
        v = np.real(vec)
        v = v / v[np.argmax(np.abs(v))]
        if np.all(v >= -1e-12):
            return np.clip(v, 0.0, None)
    return None


def power_iteration(A, tol: float = 1e-13, max_iter: int = 100_000, seed: int = 0) -> Tuple[float, np.ndarray]:
    """Spectral radius and sup-normalized Perron vector of a nonnegative matrix."""
    A = np.asarray(A, dtype=float)
    rng = np.random.default_rng(seed)
    x = 0.5 + rng.random(A.shape[0])
    x /= np.max(x)
    init_val = 1.0
    for it in range(max_iter):
        y = A @ x
        val = float(np.max(np.abs(y)))
        if val == 0.0:
            return 0.0, x
        y /= val
        rel_var = abs(val - init_val) / init_val
        step = float(np.max(np.abs(y - x)))
        x, init_val = y, val
        if rel_var < tol and step < tol:
            return val, x
    raise EvaluationFailure("power iteration did not converge", iterations=max_iter, value=init_val)


def tridiagonal_dirichlet_eigenvalues(n: int, interval=(0.0, 1.0)) -> np.ndarray:
    """Eigenvalues (4/h^2) sin^2(k*pi*h/(2L)), k = 1..n, of the discrete Dirichlet Laplacian (ascending)."""
    grid = GridSpec(n=n, interval=tuple(interval))
    h, L = grid.h, grid.length
    k = np.arange(1, n + 1)
    return 4.0 / h ** 2 * np.sin(k * np.pi * h / (2.0 * L)) ** 2


def rayleigh_quotient(p: float, grid: GridSpec, u) -> float:
    """Discrete quotient sum |D u|^p / sum |u|^p with homogeneous Dirichlet faces."""
    u = np.asarray(u, dtype=float)
    D = face_differences(u, grid.h)
    return float(np.sum(np.abs(D) ** p) / np.sum(np.abs(u) ** p))


def _normalize(u, p, h):
    return u / (h * np.sum(np.abs(u) ** p)) ** (1.0 / p)


def _minimize_from(p, grid, u, tol, max_iter):
    h = grid.h
    u = _normalize(np.abs(u), p, h)
    R = rayleigh_quotient(p, grid, u)
    for it in range(max_iter):
        D = face_differences(u, h)
        flux = phi(D, p)
        grad = (flux[:-1] - flux[1:]) / h - R * phi(u, p)
        eps_reg = 1e-4 * float(np.max(np.abs(D)))
        c = (p - 1.0) * (D * D + eps_reg * eps_reg) ** ((p - 2.0) / 2.0) / h ** 2
        try:
            d = cho_solve_banded((cholesky_banded(tridiagonal_bands(c)), False), grad)
        except LinAlgError:
            d = grad
        alpha, accepted = p - 1.0, False
        for _ in range(40):
            trial = _normalize(np.abs(u - alpha * d), p, h)
            R_trial = rayleigh_quotient(p, grid, trial)
            if R_trial <= R:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return R, u, it
        decrease = R - R_trial
        u, R = trial, R_trial
        if decrease <= tol * R:
            return R, u, it + 1
    return R, u, max_iter


def rayleigh_quotient_min(p: float, grid: GridSpec, starts: int = 10, seed: int = 0,
                          tol: float = 1e-14, max_iter: int = 5000, return_vector: bool = False):
    """Smallest discrete Rayleigh quotient over the unit L^p sphere.

    Projected preconditioned gradient: the preconditioner is the (regularized)
    Hessian of the numerator, the projection takes |.| and rescales onto the
    sphere. Best of ``starts`` random positive starts.
    """
    if not p > 1.0:
        raise ConfigError(f"Rayleigh quotient needs p > 1, got {p}")
    rng = np.random.default_rng(seed)
    best, best_u = np.inf, None
    for k in range(starts):
        u0 = 0.1 + rng.random(grid.n)
        R, u, iters = _minimize_from(p, grid, u0, tol, max_iter)
        log_json("DEBUG", "Rayleigh start finished", component="oracles", start=k, quotient=R, iters=iters)
        if R < best:
            best, best_u = R, u
    return (best, best_u) if return_vector else best


def _pucci_inverse(lambda_p, big_lambda, variant):
    # s with F(s) = t for the 1D Pucci operator F
    variant = VARIANT_ALIASES.get(variant, variant)
    if variant not in ("plus", "minus"):
        raise ConfigError(f"unknown Pucci variant {variant!r}")
    pos, neg = (big_lambda, lambda_p) if variant == "plus" else (lambda_p, big_lambda)

    def inverse(t):
        return t / pos if t > 0 else t / neg

    return inverse


def _first_zero(inverse, mu, L, rtol):
    def rhs(x, y):
        return [y[1], inverse(-mu * y[0])]

    def crossing(x, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1
    sol = solve_ivp(rhs, (0.0, L), [0.0, 1.0], method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                    events=crossing, first_step=L * 1e-6)
    zeros = [z for z in sol.t_events[0] if z > 1e-9 * L]
    if zeros:
        return zeros[0] - L  # crossed early: mu too large
    return float(sol.y[0, -1])


def pucci_shooting(lambda_p: float, big_lambda: float, variant: str = "plus", L: float = 1.0,
                   rtol: float = 1e-12, max_bisections: int = 200) -> float:
    """Principal mu of -F(u'') = mu*u on (0, L) by shooting from u(0) = 0, u'(0) = 1."""
    if not 0 < lambda_p <= big_lambda:
        raise ConfigError(f"shooting needs 0 < lambda_p <= big_lambda, got ({lambda_p}, {big_lambda})")
    inverse = _pucci_inverse(lambda_p, big_lambda, variant)
    lo, hi = 1e-6 * lambda_p * np.pi ** 2 / L ** 2, 4.0 * big_lambda * np.pi ** 2 / L ** 2
    g_lo, g_hi = _first_zero(inverse, lo, L, rtol), _first_zero(inverse, hi, L, rtol)
    if not (g_lo > 0 > g_hi):
        raise BracketFailure("no sign change of the shooting residual", lo=lo, hi=hi, g_lo=g_lo, g_hi=g_hi)
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * mid:
            break
        if _first_zero(inverse, mid, L, rtol) > 0:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    log_json("DEBUG", "Pucci shooting converged", component="oracles", variant=variant, mu=mu)
    return mu


def pucci_dirichlet_shooting(lambda_p: float, big_lambda: float, variant: str, f: Callable[[float], float],
                             L: float = 1.0, x=None, rtol: float = 1e-12) -> np.ndarray:
    """Solution of -F(u'') = f, u(0) = u(L) = 0, evaluated at ``x``.

    u'' does not depend on u, so u(L) is affine in the initial slope and two
    shots fix it.
    """
    inverse = _pucci_inverse(lambda_p, big_lambda, variant)
    x = np.linspace(0.0, L, 101) if x is None else np.asarray(x, dtype=float)

    def rhs(t, y):
        return [y[1], inverse(-f(t))]

    def shoot(slope):
        return solve_ivp(rhs, (0.0, L), [0.0, slope], method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                         dense_output=True)

    end0, end1 = shoot(0.0).y[0, -1], shoot(1.0).y[0, -1]
    if end1 == end0:
        raise BracketFailure("shooting end value does not depend on the slope")
    sol = shoot(-end0 / (end1 - end0))
    return sol.sol(x)[0]
