"""
Elementary symmetric functions and the admissible curvature functions f.

All functions take eigen-tuples along the last axis, so ``values`` may be a single
tuple of shape (n,) or a whole grid of them with shape (..., n).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np

from curvflow import config
from curvflow.models.curvature import CurvatureSpec
from curvflow.utils.errors import AuditFailure, ConeError, CurvatureSpecError

logger = logging.getLogger(__name__)


def _result(x: np.ndarray):
    return float(x) if np.ndim(x) == 0 else x


def elementary(values, kmax: int) -> List[np.ndarray]:
    """sigma_0 .. sigma_kmax by the partial-product recursion."""
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    if not 0 <= kmax <= n:
        raise ValueError(f"k must lie in [0, {n}], got {kmax}")
    lead = v.shape[:-1]
    partial = [np.ones(lead)] + [np.zeros(lead) for _ in range(kmax)]
    for i in range(n):
        for j in range(min(i + 1, kmax), 0, -1):
            partial[j] = partial[j] + v[..., i] * partial[j - 1]
    return partial


def sigma_k(values, k: int):
    return _result(elementary(values, k)[k])


def sigma_k_grad(values, k: int):
    """d sigma_k / d v_i = sigma_{k-1}(v without v_i)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    parts = [elementary(np.delete(v, i, axis=-1), k - 1)[k - 1] for i in range(n)]
    return np.stack(parts, axis=-1)


def cone_margin(spec: CurvatureSpec, values) -> np.ndarray:
    """Positive exactly inside the cone of ``spec``: min of the defining sigma_j, or the min entry."""
    v = np.asarray(values, dtype=float)
    order = spec.cone_order
    if order is None:
        return np.min(v, axis=-1)
    sig = elementary(v, order)
    return np.min(np.stack(sig[1:], axis=-1), axis=-1)


def check_cone(spec: CurvatureSpec, values):
    margin = np.atleast_1d(cone_margin(spec, values))
    if np.all(margin > 0):
        return
    flat = margin.ravel()
    worst = int(np.argmin(flat))
    tuples = np.asarray(values, dtype=float).reshape(-1, spec.n)
    raise ConeError(
        f"{spec.argument} tuple {tuples[worst].tolist()} outside the cone of {spec.kind}",
        node=worst,
        values=tuples[worst],
    )


def f_value(spec: CurvatureSpec, values):
    check_cone(spec, values)
    v = np.asarray(values, dtype=float)
    if spec.kind == "sigma_k_root":
        return _result(sigma_k(v, spec.k) ** (1.0 / spec.k))
    if spec.kind == "quotient":
        sig = elementary(v, spec.l)
        return _result((sig[spec.l] / sig[spec.k]) ** (1.0 / (spec.l - spec.k)))
    return _result(np.sum(v ** spec.m, axis=-1) ** (1.0 / spec.m))


def f_grad(spec: CurvatureSpec, values):
    check_cone(spec, values)
    v = np.asarray(values, dtype=float)
    if spec.kind == "sigma_k_root":
        s = np.asarray(sigma_k(v, spec.k))
        return (s ** (1.0 / spec.k - 1.0) / spec.k)[..., None] * sigma_k_grad(v, spec.k)
    if spec.kind == "quotient":
        sig = elementary(v, spec.l)
        top, bottom = sig[spec.l], sig[spec.k]
        f = (top / bottom) ** (1.0 / (spec.l - spec.k))
        d_top = sigma_k_grad(v, spec.l) / top[..., None]
        d_bottom = sigma_k_grad(v, spec.k) / bottom[..., None] if spec.k > 0 else 0.0
        return (f / (spec.l - spec.k))[..., None] * (d_top - d_bottom)
    total = np.sum(v ** spec.m, axis=-1)
    return (total ** (1.0 / spec.m - 1.0))[..., None] * v ** (spec.m - 1.0)


def speed(spec: CurvatureSpec, values):
    """The speed factor: f^{-beta} on curvatures, f^{beta} on radii."""
    exponent = spec.beta if spec.on_radii else -spec.beta
    return _result(np.asarray(f_value(spec, values)) ** exponent)


def speed_grad(spec: CurvatureSpec, values):
    exponent = spec.beta if spec.on_radii else -spec.beta
    f = np.asarray(f_value(spec, values))
    return (exponent * f ** (exponent - 1.0))[..., None] * f_grad(spec, values)


def eta_kappa(spec: CurvatureSpec) -> float:
    if spec.on_radii:
        raise CurvatureSpecError("eta_kappa needs a spec on principal curvatures")
    return float(f_value(spec, np.ones(spec.n)) ** (-spec.beta))


def eta_lambda(n: int, k: int, beta: float) -> float:
    if not 1 <= k <= n or not beta > 0:
        raise CurvatureSpecError(f"eta_lambda needs 1 <= k <= n and beta > 0, got n={n}, k={k}, beta={beta}")
    return float(math.comb(n, k) ** (beta / k))


def eta_for(spec: CurvatureSpec) -> float:
    """Normalization constant matched to the argument convention (equal to eta_lambda for sigma roots on radii)."""
    return float(speed(spec, np.ones(spec.n)))


# --- Assumption audit ---

@dataclass
class AuditReport:
    spec: CurvatureSpec
    samples: int
    max_homogeneity_error: float = 0.0
    min_gradient: float = math.inf
    max_concavity_slack: float = 0.0
    max_boundary_ratio: float = 0.0
    failures: List[Tuple[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def raise_for_failure(self):
        if self.failures:
            prop, witness = self.failures[0]
            raise AuditFailure(prop, witness, f"({len(self.failures)} failures, spec {self.spec.to_dict()})")


def _cone_samples(spec: CurvatureSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    positive = rng.uniform(0.2, 3.0, size=(count, spec.n))
    order = spec.cone_order
    if order is None or order == spec.n:
        return positive
    # Garding cones reach beyond the positive orthant
    wide = rng.uniform(-1.0, 3.0, size=(8 * count, spec.n))
    wide = wide[cone_margin(spec, wide) > 0.05][: count // 2]
    return np.concatenate([positive[: count - len(wide)], wide])


def _boundary_ray(spec: CurvatureSpec, v: np.ndarray) -> Tuple[bool, float]:
    """Walk v - t(1,..,1) towards the cone boundary; f must fall monotonically towards zero."""
    ones = np.ones_like(v)
    lo, hi = 0.0, float(np.max(v)) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cone_margin(spec, v - mid * ones) > 0:
            lo = mid
        else:
            hi = mid
    base = f_value(spec, v)
    ratios = []
    for decade in range(2, 11):
        point = v - lo * (1.0 - 10.0 ** -decade) * ones
        if cone_margin(spec, point) <= 0:
            break
        ratios.append(f_value(spec, point) / base)
    if len(ratios) < 2:
        return False, 1.0
    monotone = all(b <= a * (1.0 + 1e-12) for a, b in zip(ratios, ratios[1:]))
    return monotone and ratios[-1] <= 0.1, ratios[-1]


def assumption_audit(spec: CurvatureSpec, samples: int = config.AUDIT_DEFAULT_SAMPLES,
                     seed: Optional[int] = 0) -> AuditReport:
    """
    Sample homogeneity, monotonicity, concavity and boundary decay of f at random cone points.
    """
    if samples < config.AUDIT_MIN_SAMPLES:
        raise CurvatureSpecError(f"audit needs at least {config.AUDIT_MIN_SAMPLES} samples, got {samples}")
    rng = np.random.default_rng(seed)
    report = AuditReport(spec, samples)
    points = _cone_samples(spec, samples, rng)

    f = np.asarray(f_value(spec, points))
    t = rng.uniform(0.5, 3.0, size=len(points))
    scaled = np.asarray(f_value(spec, points * t[:, None]))
    err = np.abs(scaled - t * f) / (t * f)
    report.max_homogeneity_error = float(np.max(err))
    for i in np.flatnonzero(err > config.AUDIT_HOMOGENEITY_TOL)[:5]:
        report.failures.append(("homogeneity", points[i].tolist()))

    grad = f_grad(spec, points)
    report.min_gradient = float(np.min(grad))
    for i in np.flatnonzero(np.min(grad, axis=-1) <= 0)[:5]:
        report.failures.append(("monotonicity", points[i].tolist()))

    for v, fv in zip(points, f):
        d = rng.normal(size=spec.n)
        d /= np.linalg.norm(d)
        step = 1e-3 * float(np.min(np.abs(v))) + 1e-4
        while step > 1e-9 and (cone_margin(spec, v + step * d) <= 0 or cone_margin(spec, v - step * d) <= 0):
            step *= 0.5
        if step <= 1e-9:
            continue
        second = f_value(spec, v + step * d) + f_value(spec, v - step * d) - 2.0 * fv
        slack = max(0.0, second)
        report.max_concavity_slack = max(report.max_concavity_slack, slack)
        if slack > config.AUDIT_CONCAVITY_SLACK * max(1.0, fv):
            report.failures.append(("concavity", v.tolist()))

    for v in points[: max(10, samples // 10)]:
        ok, ratio = _boundary_ray(spec, v)
        report.max_boundary_ratio = max(report.max_boundary_ratio, ratio)
        if not ok:
            report.failures.append(("boundary_decay", v.tolist()))

    logger.debug("audit of %s: %d failures", spec.to_dict(), len(report.failures))
    return report
