"""
Support-function and radial-function representations of hypersurfaces.

Support shapes live on the grid of outer normals x, radial shapes on the grid of
directions xi. Integrals over xi of a convex body are pulled back to the x-grid
through the Jacobian of the reverse radial Gauss map.
"""

from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from curvflow import config
from curvflow.models.grid import ScalarField, SphereGrid
from curvflow.models.shape import RadialShape, ShapeState, SupportShape
from curvflow.services.spherical_domain import differentiate
from curvflow.utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


def sym_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of symmetric 1x1 or 2x2 matrices stacked along the leading axes."""
    if m.shape[-1] == 1:
        return m[..., 0, :].copy()
    a, b, c = m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return np.stack([mean - rad, mean + rad], axis=-1)


def _det(m: np.ndarray) -> np.ndarray:
    if m.shape[-1] == 1:
        return m[..., 0, 0].copy()
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _positive_values(grid: SphereGrid, values, name: str) -> ScalarField:
    field = ScalarField(grid, values)
    bad = np.flatnonzero(field.values.ravel() <= 0)
    if bad.size:
        raise ShapeError(f"nonpositive {name} at node {int(bad[0])}", node=int(bad[0]))
    return field


def make_support(grid: SphereGrid, u_values) -> SupportShape:
    u = _positive_values(grid, u_values, "support function")
    d = differentiate(u)
    eye = np.eye(grid.n)
    h = d.hessian + u.values[..., None, None] * eye
    rho = np.sqrt(u.values ** 2 + np.sum(d.gradient ** 2, axis=-1))
    return SupportShape(u, d.gradient, d.hessian, h, sym_eigenvalues(h), rho, _det(h))


def make_radial(grid: SphereGrid, rho_values) -> RadialShape:
    rho = _positive_values(grid, rho_values, "radial function")
    gamma = np.log(rho.values)
    d = differentiate(ScalarField(grid, gamma))
    g, s = d.gradient, d.hessian
    omega = np.sqrt(1.0 + np.sum(g ** 2, axis=-1))

    # (I - g g^T / omega^2)^{1/2} = I - g g^T / (omega (omega + 1))
    eye = np.eye(grid.n)
    outer = g[..., :, None] * g[..., None, :]
    root = eye - outer / (omega * (omega + 1.0))[..., None, None]
    w = (eye - root @ s @ root) / (rho.values * omega)[..., None, None]
    w = 0.5 * (w + np.swapaxes(w, -1, -2))
    return RadialShape(rho, gamma, g, s, omega, w, sym_eigenvalues(w))


def rho_on_normals(s: SupportShape) -> ScalarField:
    return ScalarField(s.grid, s.rho)


def support_points(s: SupportShape) -> np.ndarray:
    """X = Du + u x in ambient coordinates."""
    grid = s.grid
    tangent = np.einsum("...i,...ij->...j", s.du, grid.frame)
    return s.values[..., None] * grid.points + tangent


def normals(r: RadialShape) -> np.ndarray:
    """Outer unit normals (xi - D gamma) / omega."""
    grid = r.grid
    tangent = np.einsum("...i,...ij->...j", r.dgamma, grid.frame)
    return (grid.points - tangent) / r.omega[..., None]


def polar_support(r: RadialShape) -> ScalarField:
    return ScalarField(r.grid, 1.0 / r.values)


def jacobian_reverse_gauss(s: SupportShape) -> ScalarField:
    """|Jac A*| = u / (rho^{n+1} K) = u det(h) / rho^{n+1} on the x-grid."""
    bad = np.flatnonzero(s.det_h.ravel() <= 0)
    if bad.size:
        raise ShapeError(f"Gauss curvature not positive at node {int(bad[0])}", node=int(bad[0]))
    return ScalarField(s.grid, s.values * s.det_h / s.rho ** (s.grid.n + 1))


# --- Radial to support conversion ---

def _neighbour_indices(grid: SphereGrid) -> Tuple[np.ndarray, ...]:
    """Flat indices of the (minus, plus) neighbours along each grid axis, poles continued."""
    if grid.n == 1:
        idx = np.arange(grid.size)
        return np.roll(idx, 1), np.roll(idx, -1)
    n_theta, n_phi = grid.shape
    half = n_phi // 2
    j, k = np.indices(grid.shape)

    def flat(jj, kk):
        outside = (jj < 0) | (jj >= n_theta)
        kk = np.where(outside, kk + half, kk) % n_phi
        jj = np.clip(jj, 0, n_theta - 1)
        return (jj * n_phi + kk).ravel()

    return flat(j - 1, k), flat(j + 1, k), flat(j, k - 1), flat(j, k + 1)


def _peak_correction(f_minus, f0, f_plus):
    curv = 2.0 * f0 - f_minus - f_plus
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (f_plus - f_minus) ** 2 / (8.0 * curv)
    return np.where(curv > 0, corr, 0.0)


def support_from_radial(r: RadialShape) -> SupportShape:
    """
    u(x) = max over nodes xi of rho(xi) <x, xi>, refined by a quadratic fit around the
    discrete maximizer along each grid axis.
    """
    grid = r.grid
    if np.min(r.curvatures) <= 0:
        node = int(np.argmin(np.min(r.curvatures, axis=-1)))
        raise ShapeError(f"non-convex input: curvature {float(np.min(r.curvatures)):.3g} at node {node}", node=node)

    dim = grid.n + 1
    ys = (r.values[..., None] * grid.points).reshape(-1, dim)
    xs = grid.points.reshape(-1, dim)
    pairs = _neighbour_indices(grid)
    u = np.empty(len(xs))
    for start in range(0, len(xs), config.SUPPORT_MAX_CHUNK):
        block = xs[start:start + config.SUPPORT_MAX_CHUNK] @ ys.T
        rows = np.arange(block.shape[0])
        best = np.argmax(block, axis=1)
        f0 = block[rows, best]
        value = f0.copy()
        for minus, plus in zip(pairs[::2], pairs[1::2]):
            value += _peak_correction(block[rows, minus[best]], f0, block[rows, plus[best]])
        u[start:start + len(rows)] = value

    s = make_support(grid, u.reshape(grid.shape))
    if not s.is_convex:
        node = int(np.argmin(s.radii.min(axis=-1)))
        raise ShapeError(f"non-convex input: principal radius {float(s.radii.min()):.3g} at node {node}", node=node)
    return s


# --- Closed-form bodies ---

def _axes(grid: SphereGrid, axes: Sequence[float]) -> np.ndarray:
    a = np.asarray(list(axes)[: grid.n + 1], dtype=float)
    if a.size != grid.n + 1 or np.any(a <= 0):
        raise ConfigError(f"ellipsoid needs {grid.n + 1} positive semi-axes, got {list(axes)}")
    return a


def _center(grid: SphereGrid, center: Optional[Sequence[float]]) -> np.ndarray:
    if center is None:
        return np.zeros(grid.n + 1)
    return np.asarray(list(center)[: grid.n + 1], dtype=float)


def ball_support(grid: SphereGrid, radius: float, center: Optional[Sequence[float]] = None) -> SupportShape:
    v = _center(grid, center)
    return make_support(grid, radius + grid.points @ v)


def ball_radial(grid: SphereGrid, radius: float, center: Optional[Sequence[float]] = None) -> RadialShape:
    v = _center(grid, center)
    if np.linalg.norm(v) >= radius:
        raise ShapeError("ball does not contain the origin")
    t = grid.points @ v
    return make_radial(grid, t + np.sqrt(t ** 2 + radius ** 2 - v @ v))


def ellipsoid_support(grid: SphereGrid, axes: Sequence[float]) -> SupportShape:
    a = _axes(grid, axes)
    return make_support(grid, np.sqrt(np.sum((a * grid.points) ** 2, axis=-1)))


def ellipsoid_radial(grid: SphereGrid, axes: Sequence[float]) -> RadialShape:
    a = _axes(grid, axes)
    return make_radial(grid, np.sum((grid.points / a) ** 2, axis=-1) ** -0.5)


def radial_perturbation(grid: SphereGrid, r: float, amplitude: float,
                        direction: Optional[Sequence[float]] = None, mode: Optional[int] = None) -> RadialShape:
    """rho = r (1 + eps <xi, e>) or r (1 + eps P_l(cos theta)); on S^1 the zonal mode is cos(l theta)."""
    if (direction is None) == (mode is None):
        raise ConfigError("radial_perturbation needs exactly one of 'direction' or 'mode'")
    if direction is not None:
        e = np.asarray(list(direction)[: grid.n + 1], dtype=float)
        if e.size != grid.n + 1 or not np.linalg.norm(e) > 0:
            raise ConfigError(f"direction must have {grid.n + 1} components, got {list(direction)}")
        profile = grid.points @ (e / np.linalg.norm(e))
    elif grid.n == 1:
        profile = np.cos(mode * grid.theta)
    else:
        coeffs = np.zeros(mode + 1)
        coeffs[mode] = 1.0
        profile = legendre.legval(grid.points[..., 2], coeffs)
    return make_radial(grid, r * (1.0 + amplitude * profile))


def shape_from_description(grid: SphereGrid, description: Dict[str, Any], representation: str) -> ShapeState:
    kind = description.get("kind")
    if kind == "sphere":
        r = float(description.get("r", 1.0))
        return ball_support(grid, r) if representation == "support" else ball_radial(grid, r)
    if kind == "ellipsoid":
        axes = description["axes"]
        return ellipsoid_support(grid, axes) if representation == "support" else ellipsoid_radial(grid, axes)
    if kind == "radial_perturbation":
        radial = radial_perturbation(
            grid,
            float(description.get("r", 1.0)),
            float(description["amplitude"]),
            direction=description.get("direction"),
            mode=description.get("mode"),
        )
        return support_from_radial(radial) if representation == "support" else radial
    raise ConfigError(f"unknown initial shape kind {kind!r}")


# --- Geometric identities used as diagnostics ---

def induced_gradient_defect(r: RadialShape) -> float:
    """sup | g^{ij} rho_i rho_j - (1 - 1/omega^2) | with g the induced metric."""
    d_rho = differentiate(r.rho).gradient
    proj = np.sum(r.dgamma * d_rho, axis=-1)
    lhs = (np.sum(d_rho ** 2, axis=-1) - proj ** 2 / r.omega ** 2) / r.values ** 2
    return float(np.max(np.abs(lhs - (1.0 - 1.0 / r.omega ** 2))))


def support_point_inequalities(s: SupportShape) -> Tuple[float, float]:
    """
    Worst relative violations of u(x) >= <x, x_max> u(x_max) and of
    <X, x_min> <= u(x_min) over the support points X.
    """
    grid = s.grid
    u = s.values.ravel()
    x = grid.points.reshape(-1, grid.n + 1)
    i_max, i_min = int(np.argmax(u)), int(np.argmin(u))
    first = np.max(x @ x[i_max] * u[i_max] - u)
    pts = support_points(s).reshape(-1, grid.n + 1)
    second = np.max(pts @ x[i_min] - u[i_min])
    scale = float(u[i_max])
    return max(float(first), 0.0) / scale, max(float(second), 0.0) / scale


def polar_product_defect(r: RadialShape) -> float:
    """sup | u^{n+2}(A xi) u*^{n+2}(xi) / (K K*) - 1 | for a convex radial shape and its polar body."""
    n = r.grid.n
    polar = make_support(r.grid, polar_support(r).values)
    lhs = (r.support_values / r.values) ** (n + 2) * polar.det_h / r.gauss_curvature
    return float(np.max(np.abs(lhs - 1.0)))
