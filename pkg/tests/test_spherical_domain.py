import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from curvflow.models.grid import ScalarField
from curvflow.services.spherical_domain import (
    antipodal,
    build_grid,
    constant_field,
    differentiate,
    field_stats,
    integrate,
    integrate_values,
    node_points,
    resample,
    tangent_frame,
)
from curvflow.utils.errors import GridError


@pytest.mark.parametrize("args", [(1, 8), (2, 4, 16), (2, 8, 8), (2, 8, 17), (3, 16)])
def test_build_grid_rejects_small_or_odd(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_grid_weights_sum_to_area(circle, sphere):
    assert_allclose(circle.weights.sum(), 2 * math.pi, rtol=1e-14)
    assert_allclose(sphere.weights.sum(), 4 * math.pi, rtol=1e-14)
    assert sphere.shape == (8, 16)
    assert sphere.h_min == pytest.approx(min(sphere.h_theta, math.sin(sphere.theta[0]) * sphere.h_phi))


def test_frame_is_orthonormal_and_tangent(sphere):
    x = node_points(sphere)
    frame = tangent_frame(sphere)
    assert_allclose(np.linalg.norm(x, axis=-1), 1.0, rtol=1e-14)
    gram = np.einsum("...ik,...jk->...ij", frame, frame)
    assert_allclose(gram, np.broadcast_to(np.eye(2), gram.shape), atol=1e-14)
    assert_allclose(np.einsum("...ik,...k->...i", frame, x), 0.0, atol=1e-14)


def test_first_harmonics_are_differentiated_exactly(circle, sphere):
    # for w = <x, e> the frame gradient is the projection of e and D^2 w = -w I
    w1 = ScalarField(circle, np.cos(circle.theta))
    d1 = differentiate(w1)
    assert_allclose(d1.gradient[:, 0], -np.sin(circle.theta), atol=1e-13)
    assert_allclose(d1.hessian[:, 0, 0], -w1.values, atol=1e-13)

    e = np.array([0.3, -0.5, 0.8])
    w2 = ScalarField(sphere, sphere.points @ e)
    d2 = differentiate(w2)
    expected = np.einsum("...ij,j->...i", sphere.frame, e)
    assert_allclose(d2.gradient, expected, atol=1e-12)
    assert_allclose(d2.hessian + w2.values[..., None, None] * np.eye(2), 0.0, atol=1e-11)


def test_second_harmonic_is_second_order():
    # x_3^2 - 1/3 is a degree-2 harmonic: its Laplacian is -6 w
    errors = []
    for grid in (build_grid(2, 16), build_grid(2, 32)):
        w = grid.points[..., 2] ** 2 - 1.0 / 3.0
        d = differentiate(ScalarField(grid, w))
        lap = d.hessian[..., 0, 0] + d.hessian[..., 1, 1]
        errors.append(np.max(np.abs(lap + 6.0 * w)))
    assert errors[1] < errors[0] / 3.0


def test_mixed_second_harmonic_is_second_order():
    # w = <x, A x> = x_1 x_2: D^2 w = 2 e_i A e_j - 2 w I in the frame
    a = np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    errors = []
    for grid in (build_grid(2, 16), build_grid(2, 32)):
        w = grid.points[..., 0] * grid.points[..., 1]
        d = differentiate(ScalarField(grid, w))
        exact = 2.0 * np.einsum("...ik,kl,...jl->...ij", grid.frame, a, grid.frame)
        exact -= 2.0 * w[..., None, None] * np.eye(2)
        errors.append(np.max(np.abs(d.hessian - exact)))
    assert errors[1] <= 3.0 * (math.pi / 32) ** 2
    assert errors[1] < errors[0] / 3.5


def test_constant_field_has_no_derivatives(sphere):
    d = differentiate(constant_field(sphere, 2.5))
    assert np.all(d.gradient == 0.0)
    assert np.all(d.hessian == 0.0)


def test_quadrature(circle, fine_sphere):
    assert_allclose(integrate_values(circle, np.cos(circle.theta) ** 2), math.pi, rtol=1e-13)
    assert integrate(constant_field(fine_sphere, 1.0)) == pytest.approx(4 * math.pi, rel=1e-14)
    value = integrate_values(fine_sphere, fine_sphere.points[..., 2] ** 2)
    assert value == pytest.approx(4 * math.pi / 3, rel=fine_sphere.h_theta ** 2)


def test_integrate_is_reproducible(fine_sphere):
    values = np.random.default_rng(0).uniform(size=fine_sphere.shape)
    f = ScalarField(fine_sphere, values)
    assert integrate(f) == integrate(f)


def test_field_stats(circle):
    stats = field_stats(ScalarField(circle, 2.0 + np.cos(circle.theta)))
    assert stats.min == pytest.approx(1.0, abs=1e-2)
    assert stats.max == pytest.approx(3.0)
    assert stats.osc == pytest.approx(stats.max - stats.min)
    assert stats.max_gradient_norm == pytest.approx(1.0, abs=1e-12)


def test_antipodal(circle, sphere):
    for grid in (circle, sphere):
        e = np.eye(grid.n + 1)[0] + 0.5 * np.eye(grid.n + 1)[-1]
        f = ScalarField(grid, 2.0 + grid.points @ e)
        assert_allclose(antipodal(f).values, 2.0 - grid.points @ e, atol=1e-14)


def test_resample_reproduces_nodes_and_linear_data(circle, sphere):
    f = ScalarField(circle, np.sin(circle.theta))
    assert_allclose(resample(f, circle.points), f.values, atol=1e-14)
    g = ScalarField(sphere, 1.0 + sphere.points[..., 0])
    assert_allclose(resample(g, sphere.points), g.values, atol=1e-13)


def test_field_rejects_bad_values(circle):
    with pytest.raises(GridError):
        ScalarField(circle, np.ones(5))
    values = np.ones(circle.shape)
    values[3] = np.nan
    with pytest.raises(GridError):
        ScalarField(circle, values)
