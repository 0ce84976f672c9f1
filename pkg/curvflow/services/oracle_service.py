"""Closed-form and brute-force references. Nothing here touches a grid."""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

from curvflow.utils.errors import ScheduleError

# |s - 1| below this selects the scale-invariant branch
SCALE_INVARIANT_TOL = 1e-12


def exponent_sum(alpha: float, delta: float, beta: float) -> float:
    return alpha + delta + beta


def is_scale_invariant(alpha: float, delta: float, beta: float) -> bool:
    return abs(exponent_sum(alpha, delta, beta) - 1.0) <= SCALE_INVARIANT_TOL


def spherical_theta(r: float, t: float, alpha: float, delta: float, beta: float, eta: float) -> float:
    """Radius at time t of the sphere that starts at radius r (rho' = eta rho^{alpha+delta+beta})."""
    if r <= 0:
        raise ScheduleError(f"initial radius must be positive, got {r}")
    if is_scale_invariant(alpha, delta, beta):
        return r * math.exp(eta * t)
    e = 1.0 - exponent_sum(alpha, delta, beta)
    base = e * eta * t + r ** e
    if base <= 0:
        raise ScheduleError(f"t={t} is past the blow-up time {spherical_Tstar(r, alpha, delta, beta, eta)}")
    return base ** (1.0 / e)


def spherical_Tstar(r: float, alpha: float, delta: float, beta: float, eta: float) -> float:
    s = exponent_sum(alpha, delta, beta)
    if s <= 1.0 or is_scale_invariant(alpha, delta, beta):
        raise ScheduleError(f"no finite blow-up time for alpha+delta+beta={s} <= 1")
    return r ** (1.0 - s) / ((s - 1.0) * eta)


def inner_ball_radius(r0: float, t: float, p: float, q: float, beta: float, n: int, psi_min: float) -> float:
    """
    Lower barrier ball of the Gauss-curvature original flow with psi >= psi_min:
    r(t) = (r0^{beta(p-q)/n} + t beta(p-q)/n psi_min)^{n/(beta(p-q))}.
    """
    if p == q:
        return r0 * math.exp(psi_min * t)
    e = beta * (p - q) / n
    base = r0 ** e + t * e * psi_min
    if base <= 0:
        raise ScheduleError(f"barrier ball blows up before t={t}")
    return base ** (1.0 / e)


def sigma_k_bruteforce(values: Sequence[float], k: int) -> float:
    v = [float(x) for x in values]
    if len(v) > 8:
        raise ValueError("brute-force enumeration is limited to n <= 8")
    if k == 0:
        return 1.0
    return math.fsum(math.prod(c) for c in itertools.combinations(v, k))


def sigma_k_newton(values: Sequence[float], k: int) -> float:
    """Newton's identities: k e_k = sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i."""
    v = np.asarray(values, dtype=float)
    power_sums = [float(np.sum(v ** i)) for i in range(k + 1)]
    e = [1.0]
    for j in range(1, k + 1):
        e.append(sum((-1) ** (i - 1) * e[j - i] * power_sums[i] for i in range(1, j + 1)) / j)
    return e[k]


def fd_gradient(f: Callable[[np.ndarray], float], point: Sequence[float], step: float = 1e-3) -> np.ndarray:
    """Central differences at steps h and h/2 combined by Richardson extrapolation."""
    x = np.asarray(point, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0

        def central(h):
            return (f(x + h * e) - f(x - h * e)) / (2.0 * h)

        grad[i] = (4.0 * central(step / 2.0) - central(step)) / 3.0
    return grad
