import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from curvflow.models.curvature import CurvatureSpec
from curvflow.services import oracle_service
from curvflow.services.curvature_service import (
    assumption_audit,
    check_cone,
    cone_margin,
    elementary,
    eta_for,
    eta_kappa,
    eta_lambda,
    f_grad,
    f_value,
    sigma_k,
    sigma_k_grad,
    speed,
    speed_grad,
)
from curvflow.utils.errors import ConeError, CurvatureSpecError

SPECS = [
    CurvatureSpec("sigma_k_root", 3, k=2),
    CurvatureSpec("sigma_k_root", 2, k=2, beta=2.0, argument="principal_radii"),
    CurvatureSpec("quotient", 3, k=1, l=3),
    CurvatureSpec("quotient", 2, k=0, l=1),
    CurvatureSpec("power_mean", 2, m=-2.0, beta=0.5),
]


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_sigma_k_matches_bruteforce(n):
    rng = np.random.default_rng(n)
    for v in rng.uniform(-2.0, 2.0, size=(50, n)):
        for k in range(n + 1):
            ref = oracle_service.sigma_k_bruteforce(v, k)
            scale = oracle_service.sigma_k_bruteforce(np.abs(v), k)
            assert abs(sigma_k(v, k) - ref) <= 1e-12 * scale


def test_sigma_k_matches_newton_identities():
    v = [0.5, 1.5, -0.25, 2.0]
    for k in range(5):
        assert sigma_k(v, k) == pytest.approx(oracle_service.sigma_k_newton(v, k), rel=1e-12, abs=1e-12)


def test_sigma_k_edge_cases():
    assert sigma_k([1.0, 2.0, 3.0], 0) == 1.0
    assert sigma_k([1.0, 2.0, 3.0], 3) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        sigma_k([1.0, 2.0], 3)
    # batched input keeps the leading shape
    batch = np.ones((4, 5, 2))
    assert elementary(batch, 2)[2].shape == (4, 5)


def test_sigma_k_grad_is_sigma_without_entry():
    v = np.array([1.0, 2.0, 3.0])
    assert_allclose(sigma_k_grad(v, 2), [5.0, 4.0, 3.0])
    assert_allclose(sigma_k_grad(v, 1), [1.0, 1.0, 1.0])


def test_cone_margin_and_check():
    spec = CurvatureSpec("sigma_k_root", 3, k=2)
    inside = np.array([2.0, 2.0, -0.5])  # sigma_1 = 3.5, sigma_2 = 4 - 1 - 1 = 2
    assert cone_margin(spec, inside) > 0
    check_cone(spec, inside)
    with pytest.raises(ConeError) as info:
        check_cone(spec, np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0]]))
    assert info.value.node == 1
    positive = CurvatureSpec("power_mean", 2, m=-1.0)
    assert cone_margin(positive, [0.5, -0.1]) < 0


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.n}")
def test_f_is_normalized_and_homogeneous(spec):
    ones = np.ones(spec.n)
    if spec.kind == "sigma_k_root":
        assert f_value(spec, ones) == pytest.approx(math.comb(spec.n, spec.k) ** (1.0 / spec.k))
    v = np.array([0.7, 1.3, 2.1])[: spec.n]
    assert f_value(spec, 2.5 * v) == pytest.approx(2.5 * f_value(spec, v), rel=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.n}")
def test_f_grad_matches_finite_differences(spec):
    rng = np.random.default_rng(7)
    for v in rng.uniform(0.5, 2.0, size=(10, spec.n)):
        fd = oracle_service.fd_gradient(lambda x: float(f_value(spec, x)), v)
        assert_allclose(f_grad(spec, v), fd, atol=1e-7)
        # Euler relation for a 1-homogeneous function
        assert np.dot(v, f_grad(spec, v)) == pytest.approx(f_value(spec, v), rel=1e-10)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-{s.n}")
def test_speed_grad_matches_finite_differences(spec):
    v = np.array([0.9, 1.4, 1.1])[: spec.n]
    fd = oracle_service.fd_gradient(lambda x: float(speed(spec, x)), v)
    assert_allclose(speed_grad(spec, v), fd, atol=1e-7)


def test_speed_conventions():
    kappa = CurvatureSpec("sigma_k_root", 2, k=1, beta=1.0)
    radii = CurvatureSpec("sigma_k_root", 2, k=2, beta=2.0, argument="principal_radii")
    # sphere of radius 2: kappa = 1/2, lambda = 2
    assert speed(kappa, [0.5, 0.5]) == pytest.approx(1.0)
    assert speed(radii, [2.0, 2.0]) == pytest.approx(4.0)


def test_eta_constants():
    assert eta_lambda(2, 1, 1.0) == pytest.approx(2.0)
    assert eta_lambda(3, 2, 2.0) == pytest.approx(3.0)
    for n, k, beta in itertools.product((1, 2, 3), (1, 2, 3), (0.5, 1.0, 2.0)):
        if k > n:
            continue
        spec = CurvatureSpec("sigma_k_root", n, k=k, beta=beta, argument="principal_radii")
        assert eta_for(spec) == pytest.approx(eta_lambda(n, k, beta))
    kappa = CurvatureSpec("sigma_k_root", 2, k=1)
    assert eta_kappa(kappa) == pytest.approx(0.5)
    assert eta_for(kappa) == pytest.approx(0.5)
    with pytest.raises(CurvatureSpecError):
        eta_lambda(2, 3, 1.0)
    with pytest.raises(CurvatureSpecError):
        eta_kappa(CurvatureSpec("sigma_k_root", 2, k=1, argument="principal_radii"))


@pytest.mark.parametrize("data", [
    {"kind": "sigma_k_root", "k": 3},
    {"kind": "quotient", "k": 2, "l": 2},
    {"kind": "power_mean", "m": 0.5},
    {"kind": "power_mean"},
    {"kind": "sigma_k_root", "k": 1, "beta": 0.0},
    {"kind": "sigma_k_root", "k": 1, "argument": "normals"},
    {"kind": "harmonic"},
    {"kind": "sigma_k_root", "k": 1, "colour": "red"},
])
def test_curvature_spec_rejects(data):
    with pytest.raises(CurvatureSpecError):
        CurvatureSpec.from_dict(data, 2)


def test_curvature_spec_round_trip():
    spec = CurvatureSpec("quotient", 3, beta=1.5, argument="principal_radii", k=1, l=3)
    assert CurvatureSpec.from_dict(spec.to_dict(), 3) == spec


@pytest.mark.parametrize("spec", [
    CurvatureSpec("sigma_k_root", 2, k=2),
    CurvatureSpec("sigma_k_root", 3, k=2),
    CurvatureSpec("quotient", 2, k=1, l=2),
    CurvatureSpec("power_mean", 2, m=-1.0),
], ids=lambda s: f"{s.kind}-{s.n}")
def test_assumption_audit_passes_for_admissible_specs(spec):
    report = assumption_audit(spec, samples=200, seed=0)
    assert report.passed, report.failures
    assert report.max_homogeneity_error <= 1e-10
    assert report.min_gradient > 0
    report.raise_for_failure()


def test_assumption_audit_needs_enough_samples():
    with pytest.raises(CurvatureSpecError):
        assumption_audit(CurvatureSpec("sigma_k_root", 2, k=1), samples=10)
