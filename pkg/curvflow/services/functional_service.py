"""
Exponent dictionary and the entropy functionals.

U_p = 1/p mean(u^p) against psi^{-n/beta} dx, V_q = 1/q mean(rho^q) over d xi, and
J_pq = U_p - V_q; the p = 0 and q = 0 branches use logarithms.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from curvflow.models.flow import FlowConfig
from curvflow.models.problem import Exponents
from curvflow.models.shape import RadialShape, ShapeState, SupportShape
from curvflow.services.shape_service import jacobian_reverse_gauss
from curvflow.services.spherical_domain import integrate_values


def dual_exponent(q: float, n: int) -> Optional[float]:
    if q > n + 1:
        return q / (q - n)
    if q == n + 1:
        return float(n + 1)
    if 1 < q < n + 1:
        return n * q / (q - 1)
    if 0 < q <= 1:
        return math.inf
    return None


def exponents_from(alpha: float, delta: float, beta: float, n: int) -> Exponents:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    q = n + 1 + n * delta / beta
    p = 1 + n * (1 - alpha) / beta
    return Exponents(p, q, dual_exponent(q, n), alpha, delta, beta, n)


def alpha_delta_from(p: float, q: float, beta: float, n: int) -> Tuple[float, float]:
    return 1 - beta * (p - 1) / n, beta * (q - n - 1) / n


def exponents_for_sigma_k(alpha: float, delta: float, beta: float, k: int, n: int) -> Exponents:
    """Exponents of the stationary equation sigma_k(h) = rho^{k+1-q} u^{p-1} psi'."""
    q = k + 1 + k * delta / beta
    p = 1 + k * (1 - alpha) / beta
    return Exponents(p, q, dual_exponent(q, n), alpha, delta, beta, n)


def alpha_delta_for_sigma_k(p: float, q: float, beta: float, k: int) -> Tuple[float, float]:
    return 1 - beta * (p - 1) / k, beta * (q - k - 1) / k


def _mean_power(values: np.ndarray, weights: np.ndarray, power: float) -> float:
    total = math.fsum(weights.ravel())
    if power == 0:
        return math.fsum((weights * np.log(values)).ravel()) / total
    return math.fsum((weights * values ** power).ravel()) / total / power


def U_p(shape: ShapeState, psi: np.ndarray, p: float, beta: float) -> float:
    """
    For radial shapes the x-integral is pulled back to the xi-grid through the Gauss
    map Jacobian rho^{n+1} K / u (signed where the shape is not convex).
    """
    grid = shape.grid
    psi = np.broadcast_to(np.asarray(psi, dtype=float), grid.shape)
    measure = psi ** (-grid.n / beta)
    if isinstance(shape, RadialShape):
        u = shape.support_values
        weights = grid.weights * measure * shape.values ** (grid.n + 1) * shape.gauss_curvature / u
    else:
        u = shape.values
        weights = grid.weights * measure
    return _mean_power(u, weights, p)


def V_q(shape: ShapeState, q: float) -> float:
    grid = shape.grid
    if isinstance(shape, RadialShape):
        rho, jac = shape.values, np.ones(grid.shape)
    else:
        rho, jac = shape.rho, jacobian_reverse_gauss(shape).values
    # normalized by |S^n|, not by the integral of the Jacobian
    if q == 0:
        return integrate_values(grid, jac * np.log(rho)) / grid.area
    return integrate_values(grid, jac * rho ** q) / grid.area / q


def J_pq(shape: ShapeState, psi: np.ndarray, exponents: Exponents, beta: float) -> float:
    return U_p(shape, psi, exponents.p, beta) - V_q(shape, exponents.q)


def volume(shape: SupportShape) -> float:
    """Divergence-theorem volume (1/(n+1)) * integral of u det(h) dx."""
    return integrate_values(shape.grid, shape.values * shape.det_h) / (shape.grid.n + 1)


def stationarity_field(shape: SupportShape, psi: np.ndarray, cfg: FlowConfig) -> np.ndarray:
    """h = psi u^{alpha-1} rho^delta K^{-beta/n}."""
    n = shape.grid.n
    return psi * shape.values ** (cfg.alpha - 1) * shape.rho ** cfg.delta * shape.det_h ** (cfg.beta / n)


def stationarity_gap(shape: SupportShape, psi: np.ndarray, cfg: FlowConfig, phi_now: float) -> float:
    h = phi_now * stationarity_field(shape, psi, cfg)
    return float(np.max(h) - np.min(h))
