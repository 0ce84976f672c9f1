"""
Discretization of S^1 and S^2: grids, covariant derivatives, quadrature, statistics.

Derivatives are centred second-order differences. In place of the plain 2h and h^2
the denominators are trigonometrically fitted (2 sin h for first and 2(1 - cos h) for
second differences), so first spherical harmonics are differentiated to roundoff
while smooth fields keep O(h^2) accuracy. On S^2 the rows next to a pole are continued
across it with w(-theta, phi) = w(theta, phi + pi).
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np

from curvflow.models.grid import FrameTensorField, ScalarField, SphereGrid
from curvflow.utils.errors import GridError

logger = logging.getLogger(__name__)


class FieldStats(NamedTuple):
    min: float
    max: float
    osc: float
    max_gradient_norm: float


def build_grid(n: int, n_theta: int, n_phi: int | None = None) -> SphereGrid:
    if n == 1:
        if n_theta < 16:
            raise GridError(f"S^1 grid needs at least 16 nodes, got {n_theta}")
        h = 2.0 * np.pi / n_theta
        theta = h * np.arange(n_theta)
        weights = np.full(n_theta, 2.0 * np.pi / n_theta)
        points = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        frame = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)[:, None, :]
        return SphereGrid(1, theta, None, weights, h, h, points, frame)

    if n != 2:
        raise GridError(f"unsupported sphere dimension n={n}")
    if n_phi is None:
        n_phi = 2 * n_theta
    if n_theta < 8 or n_phi < 16:
        raise GridError(f"S^2 grid needs N_theta >= 8 and N_phi >= 16, got {n_theta}x{n_phi}")
    if n_phi % 2:
        raise GridError("odd longitude count")

    h_theta = np.pi / n_theta
    h_phi = 2.0 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * h_theta
    phi = np.arange(n_phi) * h_phi
    weights = np.outer(np.sin(theta) * h_theta * h_phi, np.ones(n_phi))
    weights *= 4.0 * np.pi / math.fsum(weights.ravel())

    st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
    sp, cp = np.sin(phi)[None, :], np.cos(phi)[None, :]
    points = np.stack(np.broadcast_arrays(st * cp, st * sp, ct), axis=-1)
    e_theta = np.stack(np.broadcast_arrays(ct * cp, ct * sp, -st), axis=-1)
    zeros = np.zeros((n_theta, n_phi))
    e_phi = np.stack([zeros - sp, zeros + cp, zeros], axis=-1)
    frame = np.stack([e_theta, e_phi], axis=-2)
    return SphereGrid(2, theta, phi, weights, h_theta, h_phi, points, frame)


def _pad_poles(values: np.ndarray) -> np.ndarray:
    """Ghost rows above the north and below the south pole (shift by pi in longitude)."""
    half = values.shape[1] // 2
    north = np.roll(values[0], -half)
    south = np.roll(values[-1], -half)
    return np.vstack([north[None, :], values, south[None, :]])


def _partials(grid: SphereGrid, values: np.ndarray):
    """Coordinate partials (w_t, w_p, w_tt, w_tp, w_pp); n=1 returns (w', w'')."""
    h = grid.h_theta
    d1, d2 = 2.0 * np.sin(h), 2.0 * (1.0 - np.cos(h))
    if grid.n == 1:
        fwd, bwd = np.roll(values, -1), np.roll(values, 1)
        return (fwd - bwd) / d1, (fwd - 2.0 * values + bwd) / d2

    padded = _pad_poles(values)
    w_t = (padded[2:] - padded[:-2]) / d1
    w_tt = (padded[2:] - 2.0 * values + padded[:-2]) / d2

    hp = grid.h_phi
    e1, e2 = 2.0 * np.sin(hp), 2.0 * (1.0 - np.cos(hp))
    east, west = np.roll(values, -1, axis=1), np.roll(values, 1, axis=1)
    w_p = (east - west) / e1
    w_pp = (east - 2.0 * values + west) / e2
    w_tp = (np.roll(w_t, -1, axis=1) - np.roll(w_t, 1, axis=1)) / e1
    return w_t, w_p, w_tt, w_tp, w_pp


def differentiate(f: ScalarField) -> FrameTensorField:
    grid = f.grid
    if grid.n == 1:
        w1, w2 = _partials(grid, f.values)
        return FrameTensorField(grid, w1[:, None], w2[:, None, None])

    w_t, w_p, w_tt, w_tp, w_pp = _partials(grid, f.values)
    sin_t = np.sin(grid.theta)[:, None]
    cot_t = (np.cos(grid.theta) / np.sin(grid.theta))[:, None]

    # Christoffel symbols of d theta^2 + sin^2 theta d phi^2
    h_tp = w_tp - cot_t * w_p
    h_pp = w_pp + sin_t * np.cos(grid.theta)[:, None] * w_t

    gradient = np.stack([w_t, w_p / sin_t], axis=-1)
    off = h_tp / sin_t
    hessian = np.empty(grid.shape + (2, 2))
    hessian[..., 0, 0] = w_tt
    hessian[..., 0, 1] = off
    hessian[..., 1, 0] = off
    hessian[..., 1, 1] = h_pp / sin_t ** 2
    return FrameTensorField(grid, gradient, hessian)


def integrate(f: ScalarField) -> float:
    """Quadrature sum; ``math.fsum`` over the row-major node order keeps it bit-reproducible."""
    return math.fsum((f.grid.weights * f.values).ravel())


def integrate_values(grid: SphereGrid, values: np.ndarray) -> float:
    return math.fsum((grid.weights * np.asarray(values, dtype=float)).ravel())


def field_stats(f: ScalarField) -> FieldStats:
    if f.grid.size == 0:
        raise GridError("empty grid")
    lo, hi = float(np.min(f.values)), float(np.max(f.values))
    grad = differentiate(f).gradient_norm
    return FieldStats(lo, hi, hi - lo, float(np.max(grad)))


def resample(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Interpolate ``f`` at unit vectors ``points`` of shape (..., n+1)."""
    grid = f.grid
    pts = np.asarray(points, dtype=float)
    if grid.n == 1:
        ang = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2.0 * np.pi)
        c = ang / grid.h_theta
        i0 = np.floor(c).astype(int)
        frac = c - i0
        size = grid.theta.size
        return (1.0 - frac) * f.values[i0 % size] + frac * f.values[(i0 + 1) % size]

    theta = np.arccos(np.clip(pts[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2.0 * np.pi)
    padded = _pad_poles(f.values)
    r = theta / grid.h_theta - 0.5
    j0 = np.clip(np.floor(r).astype(int), -1, grid.theta.size - 1)
    fr = r - j0
    c = phi / grid.h_phi
    k0 = np.floor(c).astype(int)
    fc = c - k0
    n_phi = grid.phi.size
    k0 %= n_phi
    k1 = (k0 + 1) % n_phi
    top = (1.0 - fc) * padded[j0 + 1, k0] + fc * padded[j0 + 1, k1]
    bottom = (1.0 - fc) * padded[j0 + 2, k0] + fc * padded[j0 + 2, k1]
    return (1.0 - fr) * top + fr * bottom


def antipodal(f: ScalarField) -> ScalarField:
    """The field x -> w(-x)."""
    grid = f.grid
    if grid.n == 2:
        return f.with_values(np.roll(f.values[::-1], -(grid.phi.size // 2), axis=1))
    size = grid.theta.size
    if size % 2 == 0:
        return f.with_values(np.roll(f.values, -size // 2))
    return f.with_values(resample(f, -grid.points))


def constant_field(grid: SphereGrid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def node_points(grid: SphereGrid) -> np.ndarray:
    """Unit vectors of the nodes, shape (..., n+1)."""
    return grid.points.copy()


def tangent_frame(grid: SphereGrid) -> np.ndarray:
    """Orthonormal frame (e_theta[, e_phi]) in ambient coordinates, shape (..., n, n+1)."""
    return grid.frame.copy()
