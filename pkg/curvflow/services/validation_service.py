"""
Built-in numerical checks behind ``curvflow validate``.

Each check is a plain function returning ``(passed, detail)``. ``quick`` runs the
S^1 and pointwise checks, ``full`` adds the S^2 ones. Checks run on a thread pool
and are reported in declaration order.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from curvflow import config
from curvflow.models.curvature import CurvatureSpec
from curvflow.models.flow import FlowConfig
from curvflow.models.grid import ScalarField, SphereGrid
from curvflow.models.problem import ProblemSpec
from curvflow.services import oracle_service
from curvflow.services.curvature_service import (
    assumption_audit,
    elementary,
    f_grad,
    f_value,
    sigma_k_grad,
)
from curvflow.services.flow_service import run
from curvflow.services.functional_service import J_pq, U_p, V_q, exponents_from
from curvflow.services.minkowski_service import residual
from curvflow.services.shape_service import (
    ball_radial,
    ball_support,
    ellipsoid_radial,
    ellipsoid_support,
    jacobian_reverse_gauss,
    make_support,
    polar_support,
    support_from_radial,
)
from curvflow.services.spherical_domain import build_grid, differentiate, integrate_values

logger = logging.getLogger(__name__)

LEVELS = ("quick", "full")

Check = Callable[[], Tuple[bool, str]]


@dataclass(frozen=True)
class CheckResult:
    name: str
    level: str
    passed: bool
    detail: str
    seconds: float


def _audit_specs(n: int = 2) -> List[CurvatureSpec]:
    return [
        CurvatureSpec("sigma_k_root", n, k=n),
        CurvatureSpec("quotient", n, k=1, l=n),
        CurvatureSpec("power_mean", n, m=-1.0),
    ]


# --- Pointwise checks ---

def check_sigma_k_bruteforce() -> Tuple[bool, str]:
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in range(2, 6):
        tuples = rng.uniform(-2.0, 2.0, size=(2500, n))
        fast = elementary(tuples, n)
        scale = elementary(np.abs(tuples), n)
        for i, v in enumerate(tuples):
            for k in range(1, n + 1):
                ref = oracle_service.sigma_k_bruteforce(v, k)
                worst = max(worst, abs(fast[k][i] - ref) / scale[k][i])
    return worst <= 1e-12, f"max rel err {worst:.2e} over 10^4 tuples"


def check_f_grad() -> Tuple[bool, str]:
    rng = np.random.default_rng(2)
    worst = 0.0
    for spec in _audit_specs():
        for v in rng.uniform(0.5, 2.0, size=(20, spec.n)):
            fd = oracle_service.fd_gradient(lambda x: float(f_value(spec, x)), v)
            exact = f_grad(spec, v)
            worst = max(worst, float(np.max(np.abs(fd - exact))) / max(1.0, float(np.max(np.abs(exact)))))
    return worst <= 1e-7, f"max err {worst:.2e}"


def check_euler_relations() -> Tuple[bool, str]:
    """sum v_i df/dv_i = f for the 1-homogeneous f, and k sigma_k for sigma_k."""
    rng = np.random.default_rng(3)
    v = rng.uniform(0.3, 3.0, size=(200, 2))
    worst = 0.0
    for spec in _audit_specs():
        f = np.asarray(f_value(spec, v))
        euler = np.sum(v * f_grad(spec, v), axis=-1)
        worst = max(worst, float(np.max(np.abs(euler - f) / f)))
    v3 = rng.uniform(0.3, 3.0, size=(200, 3))
    for k in (1, 2, 3):
        s = elementary(v3, k)[k]
        euler = np.sum(v3 * sigma_k_grad(v3, k), axis=-1)
        worst = max(worst, float(np.max(np.abs(euler - k * s) / (k * s))))
    return worst <= 1e-10, f"max rel err {worst:.2e}"


def check_assumption_audit() -> Tuple[bool, str]:
    reports = [assumption_audit(spec, seed=0) for spec in _audit_specs()]
    failed = [r.spec.kind for r in reports if not r.passed]
    worst = max(r.max_homogeneity_error for r in reports)
    return not failed, f"failed: {failed}" if failed else f"3 kinds, homogeneity err {worst:.2e}"


# --- Grid checks ---

def _sphere_flow(variant: str, n: int, n_theta: int, curvature: CurvatureSpec, alpha: float, delta: float,
                 t_end: float, max_steps: int):
    cfg = FlowConfig(variant=variant, alpha=alpha, delta=delta, curvature=curvature,
                     n_theta=n_theta, n_phi=2 * n_theta if n == 2 else None, t_end=t_end,
                     stop_osc_tol=0.0, max_steps=max_steps, prescale=False)
    grid = build_grid(n, n_theta, cfg.n_phi)
    initial = ball_radial(grid, 1.0) if cfg.is_radial else ball_support(grid, 1.0)
    return run(cfg, initial)


def check_s1_spherical_exactness() -> Tuple[bool, str]:
    # rho' = 1 on the unit circle: Theta(1, 0.5) = 1.5
    spec = CurvatureSpec("sigma_k_root", 1, k=1)
    result = _sphere_flow("radial_original", 1, 64, spec, -1.0, 0.0, 0.5, 100_000)
    theta = oracle_service.spherical_theta(1.0, 0.5, -1.0, 0.0, 1.0, 1.0)
    err = max(abs(result.final.max_rho - theta), abs(result.final.min_rho - theta)) / theta
    return err <= 1e-6 and result.t == 0.5, f"rel err {err:.2e} vs Theta={theta:.6g}"


def _fixed_points(n: int, n_theta: int) -> Tuple[bool, str]:
    cases = [
        ("radial_normalized", CurvatureSpec("sigma_k_root", n, k=n), -1.0),
        ("support_normalized_sigma_k", CurvatureSpec("sigma_k_root", n, argument="principal_radii", k=n), -1.0),
        ("support_normalized_gauss", CurvatureSpec("sigma_k_root", n, argument="principal_radii", k=n), 0.0),
    ]
    worst = 0.0
    for variant, spec, alpha in cases:
        result = _sphere_flow(variant, n, n_theta, spec, alpha, 0.0, 1e9, 1000)
        last = result.final
        worst = max(worst, abs(last.max_rho - 1.0), abs(last.min_rho - 1.0))
    return worst <= 1e-6, f"max drift {worst:.2e} over 1000 steps"


def check_s1_fixed_points() -> Tuple[bool, str]:
    return _fixed_points(1, 64)


def check_s1_quadrature() -> Tuple[bool, str]:
    grid = build_grid(1, 64)
    theta = grid.theta
    err = max(
        abs(integrate_values(grid, np.ones_like(theta)) - 2.0 * math.pi) / (2.0 * math.pi),
        abs(integrate_values(grid, np.cos(theta) ** 2) - math.pi) / math.pi,
        abs(integrate_values(grid, np.cos(3.0 * theta) * np.sin(theta))),
    )
    return err <= 1e-12, f"max err {err:.2e}"


def check_s2_spherical_exactness() -> Tuple[bool, str]:
    """
    alpha+delta+beta = 1: Theta(1, 0.5) = e^{0.5}. The step is tied to h_min^2, so the
    error has to drop at least fourfold from 8x16 to 16x32.
    """
    spec = CurvatureSpec("sigma_k_root", 2, k=2)
    theta = oracle_service.spherical_theta(1.0, 0.5, 0.0, 0.0, 1.0, 1.0)
    errors = []
    for n_theta in (8, 16):
        result = _sphere_flow("radial_original", 2, n_theta, spec, 0.0, 0.0, 0.5, 200_000)
        if result.t != 0.5:
            return False, f"stopped at t={result.t:.6g} on {n_theta}x{2 * n_theta}"
        errors.append(max(abs(result.final.max_rho - theta), abs(result.final.min_rho - theta)) / theta)
    ratio = errors[0] / errors[1] if errors[1] > 0 else math.inf
    passed = errors[1] <= 1e-6 and ratio >= 3.5
    return passed, f"rel err {errors[1]:.2e} at 16x32 vs Theta={theta:.6g}, refinement ratio {ratio:.2f}"


def check_s2_fixed_points() -> Tuple[bool, str]:
    return _fixed_points(2, 8)


def check_s2_quadrature() -> Tuple[bool, str]:
    """int x_3^2 = 4 pi / 3; the midpoint rule in theta is second order."""
    errors = []
    for n_theta in (32, 64):
        grid = build_grid(2, n_theta)
        value = integrate_values(grid, grid.points[..., 2] ** 2)
        errors.append(abs(value - 4.0 * math.pi / 3.0) / (4.0 * math.pi / 3.0))
    ratio = errors[0] / errors[1] if errors[1] > 0 else math.inf
    passed = errors[1] <= (math.pi / 64) ** 2 and ratio >= 3.5
    return passed, f"rel err {errors[1]:.2e} at 64x128, refinement ratio {ratio:.2f}"


# --- Derivative checks ---

def _label(grid: SphereGrid) -> str:
    if grid.n == 1:
        return f"{grid.theta.size} nodes"
    return f"{grid.theta.size}x{grid.phi.size}"


# w = x_1 x_2, a degree-2 harmonic with mixed angular derivatives
_X1X2 = np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])


def _quadratic_form_error(grid: SphereGrid, a: np.ndarray) -> float:
    """
    Max frame error of the gradient and Hessian of w = <x, A x>. The exact values
    are 2 A x projected on the frame and 2 e_i A e_j - 2 w delta_ij.
    """
    a = a[: grid.n + 1, : grid.n + 1]
    x, frame = grid.points, grid.frame
    w = np.einsum("...i,ij,...j->...", x, a, x)
    d = differentiate(ScalarField(grid, w))
    grad = 2.0 * np.einsum("...ik,kl,...l->...i", frame, a, x)
    hess = 2.0 * np.einsum("...ik,kl,...jl->...ij", frame, a, frame) - 2.0 * w[..., None, None] * np.eye(grid.n)
    return max(float(np.max(np.abs(d.gradient - grad))), float(np.max(np.abs(d.hessian - hess))))


def _hessian_order(grids: Tuple[SphereGrid, SphereGrid]) -> Tuple[bool, str]:
    coarse, fine = (_quadratic_form_error(g, _X1X2) for g in grids)
    ratio = coarse / fine if fine > 0 else math.inf
    passed = fine <= 3.0 * grids[1].h_theta ** 2 and ratio >= 3.5
    return passed, f"max err {fine:.2e} on {_label(grids[1])}, refinement ratio {ratio:.2f}"


def check_s1_hessian_order() -> Tuple[bool, str]:
    return _hessian_order((build_grid(1, 32), build_grid(1, 64)))


def check_s2_hessian_order() -> Tuple[bool, str]:
    return _hessian_order((build_grid(2, 16), build_grid(2, 32)))


def check_s2_first_harmonic_frame() -> Tuple[bool, str]:
    """For w = <x, e>: gradient = frame projection of e, D^2 w = -w I."""
    grid = build_grid(2, 16)
    e = np.array([0.3, -0.5, 0.8])
    w = grid.points @ e
    d = differentiate(ScalarField(grid, w))
    err = max(
        float(np.max(np.abs(d.gradient - grid.frame @ e))),
        float(np.max(np.abs(d.hessian + w[..., None, None] * np.eye(2)))),
    )
    return err <= 1e-10, f"max err {err:.2e} on {_label(grid)}"


# --- Shape checks ---

def _shape_round_trips(grid: SphereGrid, jacobian_grid: SphereGrid, axes: List[float],
                       tol: float) -> Tuple[bool, str]:
    a = np.asarray(axes[: grid.n + 1])
    r = ellipsoid_radial(grid, a)
    exact = ellipsoid_support(grid, a)
    recovered = float(np.max(np.abs(support_from_radial(r).values - exact.values)) / np.max(exact.values))
    # the polar of an ellipsoid with axes a has axes 1/a
    polar = max(
        float(np.max(np.abs(polar_support(r).values / ellipsoid_support(grid, 1.0 / a).values - 1.0))),
        float(np.max(np.abs(ellipsoid_radial(grid, 1.0 / a).values * exact.values - 1.0))),
    )
    # int J dx = |S^n| and V_q agrees between the two parametrizations
    s = ellipsoid_support(jacobian_grid, a)
    area = integrate_values(jacobian_grid, np.ones(jacobian_grid.shape))
    jacobian = abs(integrate_values(jacobian_grid, jacobian_reverse_gauss(s).values) / area - 1.0)
    v_ref = V_q(ellipsoid_radial(jacobian_grid, a), 2.0)
    change = abs(V_q(s, 2.0) / v_ref - 1.0)
    passed = recovered <= tol and polar <= 1e-12 and jacobian <= tol and change <= tol
    return passed, (f"support_from_radial {recovered:.2e}, polar {polar:.2e}, "
                    f"int J {jacobian:.2e}, V_2 {change:.2e}")


def check_s1_shape_round_trips() -> Tuple[bool, str]:
    grid = build_grid(1, 128)
    return _shape_round_trips(grid, grid, [1.0, 1.5], 1e-3)


def check_s2_shape_round_trips() -> Tuple[bool, str]:
    return _shape_round_trips(build_grid(2, 16), build_grid(2, 32), [1.0, 1.0, 1.3], 1e-2)


# --- Functional and residual checks ---

def _functional_scaling(grid: SphereGrid, axes: List[float]) -> Tuple[bool, str]:
    """U_p(cK) = c^p U_p(K), V_q(cK) = c^q V_q(K), U_0(cK) = U_0(K) + log c."""
    c = 1.7
    s = ellipsoid_support(grid, axes[: grid.n + 1])
    cs = make_support(grid, c * s.values)
    psi = 1.0 + 0.2 * grid.points[..., -1] ** 2
    worst = 0.0
    for p in (2.0, -1.5):
        worst = max(worst, abs(U_p(cs, psi, p, 1.0) / (c ** p * U_p(s, psi, p, 1.0)) - 1.0))
    worst = max(worst, abs(U_p(cs, psi, 0.0, 1.0) - U_p(s, psi, 0.0, 1.0) - math.log(c)))
    for q in (3.0, 0.5):
        worst = max(worst, abs(V_q(cs, q) / (c ** q * V_q(s, q)) - 1.0))
    # p = q makes J homogeneous too
    beta = float(grid.n)
    ex = exponents_from(0.0 if grid.n == 1 else -1.0, 0.0, beta, grid.n)
    u, v = U_p(s, psi, ex.p, beta), V_q(s, ex.q)
    worst = max(worst, abs(J_pq(cs, psi, ex, beta) - c ** ex.p * (u - v)) / (c ** ex.p * (abs(u) + abs(v))))
    return worst <= 1e-10, f"max rel err {worst:.2e} under x{c}"


def check_s1_functional_scaling() -> Tuple[bool, str]:
    return _functional_scaling(build_grid(1, 64), [1.0, 1.3])


def check_s2_functional_scaling() -> Tuple[bool, str]:
    return _functional_scaling(build_grid(2, 8), [1.0, 1.1, 1.3])


def _ball_residuals(grid: SphereGrid, cases) -> Tuple[bool, str]:
    worst = 0.0
    for data, radius in cases:
        prob = ProblemSpec.from_dict(data, grid.n)
        worst = max(worst, residual(ball_support(grid, radius), prob)[1])
    return worst <= 1e-12, f"max rel residual {worst:.2e} over {len(cases)} equations"


def check_s1_ball_residuals() -> Tuple[bool, str]:
    return _ball_residuals(build_grid(1, 64), [
        ({"equation": "lp_dual_minkowski", "p": 2.0, "q": 2.0}, 1.7),
        ({"equation": "lp_dual_minkowski", "p": 3.0, "q": 2.0}, 1.0),
        ({"equation": "soliton", "k": 1, "alpha": -1.0, "delta": 0.0}, 1.0),
    ])


def check_s2_ball_residuals() -> Tuple[bool, str]:
    return _ball_residuals(build_grid(2, 8), [
        ({"equation": "lp_minkowski", "p": 5.0}, 1.0),
        ({"equation": "lp_dual_minkowski", "p": 2.0, "q": 2.0}, 1.7),
        ({"equation": "soliton", "k": 1, "alpha": -1.0, "delta": 0.0}, 1.0),
    ])


# (name, level, check)
CHECKS: List[Tuple[str, str, Check]] = [
    ("sigma_k_bruteforce", "quick", check_sigma_k_bruteforce),
    ("f_grad_finite_differences", "quick", check_f_grad),
    ("euler_relations", "quick", check_euler_relations),
    ("assumption_audit", "quick", check_assumption_audit),
    ("s1_spherical_exactness", "quick", check_s1_spherical_exactness),
    ("s1_fixed_points", "quick", check_s1_fixed_points),
    ("s1_quadrature", "quick", check_s1_quadrature),
    ("s1_hessian_order", "quick", check_s1_hessian_order),
    ("s1_shape_round_trips", "quick", check_s1_shape_round_trips),
    ("s1_functional_scaling", "quick", check_s1_functional_scaling),
    ("s1_ball_residuals", "quick", check_s1_ball_residuals),
    ("s2_spherical_exactness", "full", check_s2_spherical_exactness),
    ("s2_fixed_points", "full", check_s2_fixed_points),
    ("s2_quadrature", "full", check_s2_quadrature),
    ("s2_hessian_order", "full", check_s2_hessian_order),
    ("s2_first_harmonic_frame", "full", check_s2_first_harmonic_frame),
    ("s2_shape_round_trips", "full", check_s2_shape_round_trips),
    ("s2_functional_scaling", "full", check_s2_functional_scaling),
    ("s2_ball_residuals", "full", check_s2_ball_residuals),
]


def _run_one(name: str, level: str, check: Check) -> CheckResult:
    started = time.perf_counter()
    try:
        passed, detail = check()
    except Exception as e:
        logger.exception("check %s raised", name)
        passed, detail = False, f"{type(e).__name__}: {e}"
    return CheckResult(name, level, bool(passed), detail, time.perf_counter() - started)


def run_checks(level: str) -> List[CheckResult]:
    if level not in LEVELS:
        raise ValueError(f"unknown validation level {level!r}; expected one of {LEVELS}")
    selected = [c for c in CHECKS if level == "full" or c[1] == "quick"]
    with ThreadPoolExecutor(max_workers=config.THREADS) as executor:
        futures = [executor.submit(_run_one, *c) for c in selected]
        results = [f.result() for f in futures]
    logger.info("validate %s: %d/%d passed", level, sum(r.passed for r in results), len(results))
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max([len(r.name) for r in results] + [5])
    lines = [f"{'check':<{width}}  level  result  seconds  detail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<{width}}  {r.level:<5}  {status:<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
