"""Principal eigenpair by epsilon-regularized fixed points.

For eps > 0 the map x -> lambda*T(x + eps*u) has, for every eps, a fixed
point with ||x||_inf = 1 and lambda <= M, where M*T(u) ≽ u. A normalized
fixed-point iteration computes it; warm-started levels with decreasing eps
give the eigenpair x0 = lambda0*T(x0) in the limit. Convergence of the
iteration is monitored, never assumed.

The eigenvalue convention is the operator one: lambda*T(x) = x, so for a
matrix lambda0 = 1/rho(A).
"""
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import svdvals

from . import cones
from .cones import ConeSpec
from .errors import ConfigError, KRLError, NoConvergence, NoHConstant, ResidualTooLarge, ZeroImage
from .logs import log_json
from .metrics import record_continuation, record_level
from .operators import (HConstant, MonotoneOperator, PropertyReport, check_strong_positivity,
                        find_H_constant, property_report, sample_cone)
from .oracles import dense_spectrum

TRACE_HEADER = ["eps", "lambda", "iters", "residual", "step_delta"]


class ContinuationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    eps0: float = Field(1e-1, gt=0.0)
    ratio: float = Field(0.5, gt=0.0, lt=1.0)
    eps_min: float = Field(1e-8, gt=0.0)
    max_inner_iters: int = Field(10_000, gt=0)
    inner_tol: float = Field(1e-12, gt=0.0)
    seed: int = 0
    acceptance_residual: float = Field(1e-6, gt=0.0)
    damping: float = Field(0.5, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _schedule_is_decreasing(self):
        if not self.eps_min < self.eps0:
            raise ConfigError(f"eps_min ({self.eps_min}) must be below eps0 ({self.eps0})", field="eps_min")
        return self


@dataclass
class TraceRecord:
    eps: float
    lam: float
    iterations: int
    residual: float
    step_delta: float
    x: np.ndarray = field(repr=False)


@dataclass
class ContinuationTrace:
    records: List[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.records)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.records:
            writer.writerow([repr(r.eps), repr(r.lam), r.iterations, repr(r.residual), repr(r.step_delta)])
        return out.getvalue()


@dataclass
class EigenPair:
    """(lambda0, x0) with ||x0||_inf = 1 and x0 = lambda0*T(x0) up to ``residual``."""

    lambda0: float
    x: np.ndarray
    residual: float
    in_cone: bool
    eigenvalue_power: float = 1.0
    label: str = ""

    @property
    def pde_eigenvalue(self) -> float:
        return self.lambda0 ** self.eigenvalue_power

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "lambda0": self.lambda0,
            "residual": self.residual,
            "norm": "sup",
            "x": [float(v) for v in self.x],
            "pde_eigenvalue": self.pde_eigenvalue,
            "operator": self.label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _sup(x) -> float:
    return float(np.max(np.abs(x)))


def residual(T: MonotoneOperator, lam: float, x) -> float:
    """||x - lam*T(x)||_inf."""
    x = np.asarray(x, dtype=float)
    return _sup(x - lam * T.apply(x))


def eps_schedule(cfg: ContinuationConfig) -> List[float]:
    levels = []
    eps = cfg.eps0
    while eps > cfg.eps_min:
        levels.append(eps)
        eps *= cfg.ratio
    levels.append(cfg.eps_min)
    return levels


def default_start(T: MonotoneOperator, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = 0.5 + np.abs(rng.standard_normal(T.n))
    return x / _sup(x)


def _iterate(T, u, eps, x, cfg, theta):
    lam = np.nan
    eta = T.cone.tolerance
    diff = np.inf
    for k in range(1, cfg.max_inner_iters + 1):
        shifted = x + eps * u
        y = T.apply(shifted)
        norm = _sup(y)
        if norm <= eta * _sup(shifted):
            raise ZeroImage(f"T(x + eps*u) vanished at eps={eps:g}", eps=eps, iteration=k)
        lam_next = 1.0 / norm
        x_next = y * lam_next
        if theta < 1.0:
            x_next = (1.0 - theta) * x + theta * x_next
            x_next /= _sup(x_next)
        diff = _sup(x_next - x)
        converged = diff <= cfg.inner_tol and abs(lam_next - lam) <= cfg.inner_tol * lam
        x, lam = x_next, lam_next
        if converged:
            return lam, x, k, diff
    raise NoConvergence(f"no convergence at eps={eps:g} after {cfg.max_inner_iters} iterations",
                        iterate=x, residual=diff, eps=eps, damped=theta < 1.0)


def solve_eps(T: MonotoneOperator, u, eps: float, start, cfg: ContinuationConfig) -> Tuple[float, np.ndarray, int]:
    """Normalized fixed point x = lambda*T(x + eps*u), ||x||_inf = 1, x in K.

    Plain iteration first; one damped retry (theta = cfg.damping) before failing.
    """
    lam, x, iters, _ = _solve_level(T, u, eps, start, cfg)
    return lam, x, iters


def _solve_level(T, u, eps, start, cfg):
    u = np.asarray(u, dtype=float)
    start = np.asarray(start, dtype=float)
    if not cones.contains(T.cone, u) or not np.any(u):
        raise NoHConstant("u must be a nonzero element of K")
    if not cones.contains(T.cone, start):
        raise ConfigError("start vector must lie in K")
    start = start / _sup(start)
    try:
        return _iterate(T, u, eps, start, cfg, 1.0)
    except NoConvergence as e:
        log_json("WARNING", "plain iteration failed, retrying damped", component="solver",
                 operator=T.label, eps=eps, residual=e.residual)
        return _iterate(T, u, eps, start, cfg, cfg.damping)


def continuation(T: MonotoneOperator, u=None, cfg: Optional[ContinuationConfig] = None,
                 start=None) -> Tuple[EigenPair, ContinuationTrace]:
    """Run solve_eps over the eps schedule, warm-starting each level."""
    cfg = cfg or ContinuationConfig()
    u = T.default_u() if u is None else np.asarray(u, dtype=float)
    find_H_constant(T, u)
    x = default_start(T, cfg.seed) if start is None else np.asarray(start, dtype=float) / _sup(start)
    trace = ContinuationTrace()
    log_json("INFO", "continuation started", component="solver", operator=T.label,
             levels=len(eps_schedule(cfg)), n=T.n)
    try:
        for eps in eps_schedule(cfg):
            try:
                lam, x_new, iters, level_residual = _solve_level(T, u, eps, x, cfg)
            except NoConvergence as e:
                e.trace = trace
                raise
            trace.records.append(TraceRecord(eps, lam, iters, level_residual, _sup(x_new - x), x_new.copy()))
            record_level(T.label, iters)
            log_json("DEBUG", "eps level converged", component="solver", operator=T.label, eps=eps,
                     **{"lambda": lam}, iters=iters, residual=level_residual)
            x = x_new
    except KRLError:
        record_continuation(T.label, "failure")
        raise

    last = trace.records[-1]
    x0 = last.x / _sup(last.x)
    res = residual(T, last.lam, x0)
    pair = EigenPair(lambda0=last.lam, x=x0, residual=res, in_cone=cones.contains(T.cone, x0),
                     eigenvalue_power=T.eigenvalue_power, label=T.label)
    if res > cfg.acceptance_residual:
        record_continuation(T.label, "failure")
        raise ResidualTooLarge(f"final residual {res:.3e} exceeds {cfg.acceptance_residual:g}",
                               pair=pair, trace=trace, residual=res)
    record_continuation(T.label, "success", pair.lambda0)
    log_json("INFO", "continuation complete", component="solver", operator=T.label, lambda0=pair.lambda0,
             residual=res, iters=trace.total_iterations)
    return pair, trace


def _shortfall(K: ConeSpec, lower, upper) -> float:
    """Relative amount by which lower ≼ upper fails (0 when it holds)."""
    g = cones.governed(K, np.asarray(upper) - np.asarray(lower))
    return max(0.0, float(-np.min(g)) / max(1.0, _sup(g)))


def verify_branch_bounds(T: MonotoneOperator, u, H: HConstant, trace: ContinuationTrace,
                         depth: int = 8, tol: float = 1e-8) -> PropertyReport:
    """Check lambda_eps <= M, x ≽ lambda*eps*T(u), x ≽ lambda*T(x) and x ≽ (lambda/M)^n eps u."""
    u = np.asarray(u, dtype=float)
    K = T.cone.widened(tol)
    Tu = T.apply(u)
    worst, witness, checks = 0.0, None, 0
    for r in trace:
        x, lam, eps = r.x, r.lam, r.eps
        candidates = [("lambda_le_M", max(0.0, lam - H.M - tol) / H.M),
                      ("x_ge_lambda_eps_Tu", 0.0 if cones.leq(K, lam * eps * Tu, x)
                       else _shortfall(T.cone, lam * eps * Tu, x)),
                      ("x_ge_lambda_Tx", 0.0 if cones.leq(K, lam * T.apply(x), x)
                       else _shortfall(T.cone, lam * T.apply(x), x))]
        for n in range(1, depth + 1):
            lower = (lam / H.M) ** n * eps * u
            candidates.append((f"iterate_{n}", 0.0 if cones.leq(K, lower, x) else _shortfall(T.cone, lower, x)))
        for name, gap in candidates:
            checks += 1
            if gap > 0.0 and gap >= worst:
                worst, witness = gap, {"eps": eps, "check": name}
    return property_report("branch_bounds", witness is None, worst, checks, tol=tol, witness=witness,
                           levels=len(trace), M=H.M, depth=depth)


def delta_certificate(K: ConeSpec, x0, y) -> Tuple[float, float]:
    """Order comparison of two positive eigenvectors: (delta(-y), ||x0 - delta(-y)*y||_inf)."""
    d = cones.delta(K, x0, -np.asarray(y, dtype=float))
    if d.infinite:
        return np.inf, np.inf
    return d.value, _sup(np.asarray(x0) - d.value * np.asarray(y))


def uniqueness_probe(T: MonotoneOperator, cfg: Optional[ContinuationConfig] = None, k: int = 20,
                     seed: int = 0, tol_x: float = 1e-5, tol_lambda: float = 1e-6) -> PropertyReport:
    """Continuation from k random (start, u) pairs; the positive eigendirection must not depend on them."""
    cfg = cfg or ContinuationConfig()
    precondition = check_strong_positivity(T, samples=10, seed=seed)
    rng = np.random.default_rng(seed)
    vectors, lambdas, failures = [], [], 0
    for i in range(k):
        start = sample_cone(T.cone, rng) + 0.1
        u = sample_cone(T.cone, rng)
        try:
            pair, _ = continuation(T, u, cfg, start=start)
        except KRLError as e:
            failures += 1
            log_json("WARNING", "uniqueness run failed", component="solver",
                     **e.to_log(operator=T.label, run=i))
            continue
        vectors.append(pair.x)
        lambdas.append(pair.lambda0)
    max_dist, spread, gap = 0.0, 0.0, 0.0
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            max_dist = max(max_dist, _sup(vectors[i] - vectors[j]))
            spread = max(spread, abs(lambdas[i] - lambdas[j]) / lambdas[0])
            gap = max(gap, delta_certificate(T.cone, vectors[i], vectors[j])[1])
    passed = (precondition.passed and len(vectors) >= 2 and max_dist < tol_x and spread < tol_lambda)
    return property_report("uniqueness", passed, max_dist, k, seed, tol_x,
                           max_pairwise_distance=max_dist, lambda_spread=spread, max_delta_gap=gap,
                           excluded_runs=failures, precondition_strong_positivity=precondition.passed)


def _real_eigenpairs(A, tol):
    mu, vecs = np.linalg.eig(A)
    scale = max(float(np.max(np.abs(mu))), 1.0)
    for value, vec in zip(mu, vecs.T):
        if abs(value.imag) <= tol * scale and abs(value) > tol * scale:
            y = np.real(vec) if np.max(np.abs(vec.imag)) <= 1e-8 * np.max(np.abs(vec)) else None
            yield float(value.real), y


def minimality_check(T: MonotoneOperator, lambda0: float, x0=None, tol: float = 1e-8) -> PropertyReport:
    """lambda0 has the smallest modulus among the operator eigenvalues 1/mu (matrix instances)."""
    A = T.spec
    if not isinstance(A, np.ndarray):
        raise ConfigError("minimality_check needs a matrix instance")
    spectrum = dense_spectrum(A)
    worst, witness = abs(lambda0 * spectrum.radius - 1.0), None
    for mu, _ in _real_eigenpairs(A, 1e-12):
        gap = lambda0 - abs(1.0 / mu)
        if gap > tol and gap > worst:
            worst, witness = gap, {"mu": mu}
    passed = witness is None and abs(lambda0 * spectrum.radius - 1.0) <= tol
    details = {"spectral_radius": spectrum.radius}
    if x0 is not None:
        details["delta_relations"] = _delta_relations(T, A, lambda0, np.asarray(x0, dtype=float))
    return property_report("minimality", passed, worst, len(spectrum.eigenvalues), tol=tol, witness=witness,
                           **details)


def _delta_relations(T, A, lambda0, x0) -> bool:
    # x0 ± (lambda0/lam)*delta(±y)*y in K for real eigenpairs (1/lam, y) other than x0's
    K = T.cone.widened(1e-8)
    for mu, y in _real_eigenpairs(A, 1e-12):
        if y is None or abs(mu * lambda0 - 1.0) <= 1e-8:
            continue
        lam = 1.0 / mu
        for sign in (1.0, -1.0):
            d = cones.delta(T.cone, x0, sign * y)
            if d.infinite:
                continue
            if not cones.contains(K, x0 + sign * (lambda0 / lam) * d.value * y):
                return False
    return True


def simplicity_check(T: MonotoneOperator, lambda0: float, tol: float = 1e-8) -> PropertyReport:
    """Geometric multiplicity of mu = 1/lambda0 for a matrix instance must be one."""
    A = T.spec
    if not isinstance(A, np.ndarray):
        raise ConfigError("simplicity_check needs a matrix instance")
    mu = 1.0 / lambda0
    # singular values of A - mu*I at the noise level of lambda0 count as kernel
    sigma = svdvals(A - mu * np.eye(A.shape[0]))
    dim = int(np.sum(sigma <= tol * max(1.0, float(np.linalg.norm(A, 2)))))
    return property_report("simplicity", dim == 1, float(dim - 1), 1, tol=tol, eigenspace_dimension=dim)
