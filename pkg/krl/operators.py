"""Operator contract and sampling checkers for the hypotheses of the existence
theorem: positive 1-homogeneity, monotonicity, hypothesis (H) and strong
positivity.

Checkers never raise on a failing property; they return a ``PropertyReport``
whose witness records the offending inputs.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import cones
from .cones import ConeSpec
from .errors import DimensionMismatch, NoHConstant
from .logs import log_json
from .metrics import record_application, record_property

DEFAULT_SCALES = (1e-3, 0.5, 1.0, 2.0, 1e3)
ZERO_FRACTION = 0.2


class MonotoneOperator:
    """An immutable map ``T`` on R^n with an attached cone.

    ``eigenvalue_power`` is the exponent linking the operator eigenvalue
    ``lambda`` of ``lambda*T(x) = x`` to the eigenvalue of the underlying
    problem (``p - 1`` for p-type inverses, ``1`` otherwise).
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], n: int, cone: ConeSpec, label: str,
                 eigenvalue_power: float = 1.0, default_u: Optional[np.ndarray] = None,
                 spec: Any = None):
        if cone.n != n:
            raise DimensionMismatch(f"cone dimension {cone.n} differs from operator dimension {n}")
        self._fn = fn
        self.n = n
        self.cone = cone
        self.label = label
        self.eigenvalue_power = eigenvalue_power
        self.spec = spec
        self._default_u = None if default_u is None else np.array(default_u, dtype=float)

    def __repr__(self):
        return f"MonotoneOperator({self.label!r}, n={self.n})"

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"{self.label}: expected shape ({self.n},), got {x.shape}")
        if not np.any(x):
            return np.zeros(self.n)
        record_application(self.label)
        return np.asarray(self._fn(x), dtype=float)

    __call__ = apply

    def default_u(self) -> np.ndarray:
        if self._default_u is None:
            return np.ones(self.n)
        return self._default_u.copy()

    def scaled(self, c: float) -> "MonotoneOperator":
        if not c > 0:
            raise ValueError("scaling factor must be positive")
        return MonotoneOperator(lambda x: c * self._fn(x), self.n, self.cone, f"{c:g}*{self.label}",
                                self.eigenvalue_power, self._default_u, self.spec)


def apply(T: MonotoneOperator, x) -> np.ndarray:
    return T.apply(x)


class PropertyReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    property: str
    passed: bool = Field(..., alias="pass")
    worst_violation: float = 0.0
    samples: int = 0
    seed: Optional[int] = None
    tolerance: Optional[float] = None
    witness: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    def to_json_dict(self) -> Dict[str, Any]:
        data = self.model_dump(by_alias=True)
        if data["witness"] is None:
            data.pop("witness")
        if not data["details"]:
            data.pop("details")
        return data


def property_report(name, passed, worst, samples, seed=None, tol=None, witness=None, **details) -> PropertyReport:
    report = PropertyReport(property=name, passed=passed, worst_violation=float(worst), samples=samples,
                            seed=seed, tolerance=tol, witness=witness, details=details)
    record_property(name, passed)
    log_json("INFO" if passed else "WARNING", f"property {name} {'passed' if passed else 'failed'}",
             component="operators", property=name, worst_violation=float(worst), samples=samples)
    return report


def _vec(x) -> List[float]:
    return [float(v) for v in np.asarray(x).ravel()]


@dataclass(frozen=True)
class HConstant:
    M: float
    u: np.ndarray


def sample_cone(K: ConeSpec, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """|N(0,1)| coordinates with ~20% zeroed; never returns the zero vector."""
    shape = (K.n,) if size is None else (size, K.n)
    x = np.abs(rng.standard_normal(shape))
    x[rng.random(shape) < ZERO_FRACTION] = 0.0
    x = np.atleast_2d(x)
    for row in x:
        if not np.any(row):
            row[rng.integers(K.n)] = 1.0
    return x[0] if size is None else x


def _violation(K: ConeSpec, v: np.ndarray) -> float:
    # relative amount by which v misses the cone (0 when inside)
    g = cones.governed(K, v)
    scale = max(1.0, float(np.max(np.abs(g))))
    return max(0.0, float(-np.min(g)) / scale)


def check_homogeneity(T: MonotoneOperator, samples: int = 20, scales: Sequence[float] = DEFAULT_SCALES,
                      tol: float = 1e-6, seed: int = 0) -> PropertyReport:
    if any(t <= 0 for t in scales):
        raise ValueError("homogeneity is only checked for positive scales")
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for x in sample_cone(T.cone, rng, samples):
        tx = T.apply(x)
        norm = float(np.max(np.abs(tx)))
        for t in scales:
            gap = float(np.max(np.abs(T.apply(t * x) - t * tx))) / max(1.0, t * norm)
            if gap > worst:
                worst = gap
                if gap > tol:
                    witness = {"x": _vec(x), "t": float(t)}
    return property_report("homogeneity", worst <= tol, worst, samples, seed, tol, witness)


def check_monotonicity(T: MonotoneOperator, samples: int = 50, tol: float = 1e-8, seed: int = 0) -> PropertyReport:
    """Pairs (x, x + d) with x, d in K; basis probes (0, e_j) come first."""
    rng = np.random.default_rng(seed)
    K = T.cone.widened(tol)
    probes = np.unique(np.linspace(0, T.n - 1, min(T.n, 8)).round().astype(int))
    pairs = [(np.zeros(T.n), np.eye(T.n)[j]) for j in probes]
    xs, ds = sample_cone(T.cone, rng, samples), sample_cone(T.cone, rng, samples)
    pairs.extend(zip(xs, ds))
    worst, witness = 0.0, None
    for x, d in pairs:
        diff = T.apply(x + d) - T.apply(x)
        if not cones.contains(K, diff):
            gap = _violation(T.cone, diff)
            if witness is None or gap > worst:
                witness = {"x": _vec(x), "d": _vec(d)}
            worst = max(worst, gap)
    return property_report("monotonicity", witness is None, worst, len(pairs), seed, tol, witness)


def find_H_constant(T: MonotoneOperator, u) -> HConstant:
    """Smallest M with M*T(u) ≽ u on the support of u."""
    u = np.asarray(u, dtype=float)
    if not cones.contains(T.cone, u) or not np.any(u):
        raise NoHConstant("u must be a nonzero element of K", operator=T.label)
    v = T.apply(u)
    eta = T.cone.tolerance
    support = u > eta * np.max(np.abs(u))
    lost = support & (v <= eta * max(np.max(np.abs(v)), np.finfo(float).tiny))
    if np.any(lost):
        raise NoHConstant(f"T(u) vanishes on {int(lost.sum())} coordinates of supp(u)",
                          operator=T.label, first=int(np.argmax(lost)))
    M = float(np.max(u[support] / v[support]))
    if not cones.leq(T.cone, u, M * v):
        raise NoHConstant("M*T(u) ≽ u fails after the ratio bound", operator=T.label, M=M)
    return HConstant(M=M, u=u)


def h_constant_report(T: MonotoneOperator, u) -> PropertyReport:
    try:
        H = find_H_constant(T, u)
    except NoHConstant as e:
        return property_report("h_constant", False, float("inf"), 1, None, None, {"u": _vec(u)},
                               error=e.message)
    return property_report("h_constant", True, 0.0, 1, None, None, M=H.M)


def search_H_constant(T: MonotoneOperator, candidates: Optional[Sequence[np.ndarray]] = None):
    """Try candidate u vectors until one satisfies (H); returns (u, HConstant)."""
    if candidates is None:
        u0 = T.default_u()
        candidates = [u0, T.apply(u0), np.ones(T.n)]
        for center in np.linspace(0, T.n - 1, 5)[1:-1].round().astype(int):
            bump = np.zeros(T.n)
            bump[max(center - 1, 0):center + 2] = 1.0
            candidates.append(bump)
    last = None
    for i, u in enumerate(candidates):
        try:
            return np.asarray(u, dtype=float), find_H_constant(T, u)
        except NoHConstant as e:
            last = e
            log_json("WARNING", "hypothesis (H) failed for candidate u", component="operators",
                     operator=T.label, candidate=i, error=e.message)
    raise NoHConstant(f"no candidate u satisfies (H) for {T.label}", operator=T.label,
                      last=last.message if last else None)


def check_strong_positivity(T: MonotoneOperator, samples: int = 20, tol: float = 0.0,
                            seed: int = 0) -> PropertyReport:
    """Boundary points of K (unit vectors and random supports) must map into the interior.

    ``tol`` > 0 replaces the cone tolerance as the interior margin.
    """
    rng = np.random.default_rng(seed)
    K = T.cone if tol <= 0.0 else T.cone.model_copy(update={"tolerance": tol})
    points = [np.eye(T.n)[j] for j in np.unique(np.linspace(0, T.n - 1, min(T.n, 8)).round().astype(int))]
    for _ in range(samples):
        x = np.abs(rng.standard_normal(T.n))
        x[rng.random(T.n) < 0.5] = 0.0
        if np.all(x > 0):
            x[rng.integers(T.n)] = 0.0
        if not np.any(x):
            x[rng.integers(T.n)] = 1.0
        points.append(x)
    failures, worst, witness = 0, 0.0, None
    for x in points:
        y = T.apply(x)
        if not cones.is_interior(K, y):
            failures += 1
            g = cones.governed(K, y)
            gap = max(0.0, float(-np.min(g)) / max(1.0, float(np.max(np.abs(g)))))
            if witness is None:
                witness = {"x": _vec(x), "Tx_min": float(np.min(g))}
            worst = max(worst, gap)
    return property_report("strong_positivity", failures == 0, worst, len(points), seed, tol, witness,
                           failures=failures)


def check_nonlinearity(T: MonotoneOperator, samples: int = 20, threshold: float = 1e-3,
                       seed: int = 0) -> PropertyReport:
    """Passes when some x, y in K give ||T(x+y) - T(x) - T(y)|| > threshold*||T(x+y)||."""
    rng = np.random.default_rng(seed)
    xs, ys = sample_cone(T.cone, rng, samples), sample_cone(T.cone, rng, samples)
    best, witness = 0.0, None
    for x, y in zip(xs, ys):
        txy = T.apply(x + y)
        gap = float(np.max(np.abs(txy - T.apply(x) - T.apply(y)))) / max(float(np.max(np.abs(txy))), 1e-300)
        if gap > best:
            best, witness = gap, {"x": _vec(x), "y": _vec(y)}
    return property_report("nonlinearity", best > threshold, best, samples, seed, threshold,
                           witness if best > threshold else None)
