"""
Stationary Minkowski-type equations and the flows that solve them.

sigma_k equations (lp_cm, lp_dual_cm, soliton) are driven to a limit by the sigma_k
normalized flow; Gauss curvature equations (lp_minkowski, lp_dual_minkowski) by the
phi-normalized Gauss flow, whose limit solves the equation up to the constant c0.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from curvflow import config
from curvflow.models.curvature import CurvatureSpec
from curvflow.models.flow import FlowConfig, FlowResult, FlowState, PsiSpec
from curvflow.models.grid import ScalarField, SphereGrid
from curvflow.models.problem import Exponents, ProblemSpec
from curvflow.models.shape import SupportShape
from curvflow.services import flow_service
from curvflow.services.curvature_service import eta_lambda, sigma_k
from curvflow.services.functional_service import (
    alpha_delta_for_sigma_k,
    alpha_delta_from,
    dual_exponent,
    exponents_for_sigma_k,
)
from curvflow.services.shape_service import make_support, sym_eigenvalues
from curvflow.services.spherical_domain import antipodal, differentiate, integrate_values
from curvflow.utils.errors import ConfigError, NumericalError, RegimeError, ShapeError

logger = logging.getLogger(__name__)

SIGMA_K_EQUATIONS = ("lp_cm", "lp_dual_cm", "soliton")


def problem_exponents(prob: ProblemSpec) -> Exponents:
    if prob.equation in SIGMA_K_EQUATIONS:
        alpha, delta = alpha_delta_for_sigma_k(prob.p, prob.q, prob.beta, prob.k)
        return exponents_for_sigma_k(alpha, delta, prob.beta, prob.k, prob.n)
    alpha, delta = alpha_delta_from(prob.p, prob.q, prob.beta, prob.n)
    return Exponents(prob.p, prob.q, dual_exponent(prob.q, prob.n), alpha, delta, prob.beta, prob.n)


# --- Residuals ---

def _require_convex(shape: SupportShape):
    if not shape.is_convex:
        node = int(np.argmin(shape.radii.min(axis=-1)))
        raise ShapeError(f"residual needs a convex shape; principal radius {float(shape.radii.min()):.3g} "
                         f"at node {node}", node=node)


def residual(shape: SupportShape, prob: ProblemSpec, c0: float = 1.0) -> Tuple[ScalarField, float]:
    """Pointwise LHS - RHS and sup |LHS - RHS| / RHS, with psi replaced by c0 psi."""
    _require_convex(shape)
    if not c0 > 0:
        raise ConfigError(f"c0 must be positive, got {c0}")
    grid = shape.grid
    psi = prob.psi.values(grid)
    u, rho = shape.values, shape.rho
    if prob.equation == "soliton":
        ex = problem_exponents(prob)
        lhs = psi * u ** (ex.alpha - 1.0) * rho ** ex.delta * sigma_k(shape.radii, prob.k) ** (prob.beta / prob.k)
        rhs = np.full(grid.shape, c0 * eta_lambda(prob.n, prob.k, prob.beta))
    else:
        lhs = sigma_k(shape.radii, prob.k)
        rhs = c0 * rho ** (prob.k + 1 - prob.q) * u ** (prob.p - 1.0) * psi
    if np.min(rhs) <= 0:
        raise ShapeError("right-hand side is not positive")
    diff = lhs - rhs
    return ScalarField(grid, diff), float(np.max(np.abs(diff) / rhs))


def soliton_residual(shape: SupportShape, psi: np.ndarray, alpha: float, delta: float, beta: float,
                     k: int, eta: float) -> float:
    _require_convex(shape)
    q = psi * shape.values ** (alpha - 1.0) * shape.rho ** delta * sigma_k(shape.radii, k) ** (beta / k)
    return float(np.max(np.abs(q - eta)) / eta)


# --- psi admissibility ---

@dataclass(frozen=True)
class PsiCheckReport:
    sign: int
    exponent: float
    min_eigenvalue: float
    max_eigenvalue: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"sign": self.sign, "exponent": self.exponent, "min_eigenvalue": self.min_eigenvalue,
                "max_eigenvalue": self.max_eigenvalue, "passed": self.passed}


def check_psi_condition(psi: PsiSpec, grid: SphereGrid, alpha: float, beta: float, sign: int = 1) -> PsiCheckReport:
    """Definiteness of D^2 w + w I for w = psi^{1/(1+beta-alpha)}: positive for sign=+1, negative for -1."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if 1.0 + beta - alpha == 0:
        raise ConfigError("psi condition is singular at alpha = 1 + beta")
    exponent = 1.0 / (1.0 + beta - alpha)
    w = ScalarField(grid, psi.values(grid) ** exponent)
    d = differentiate(w)
    eig = sym_eigenvalues(d.hessian + w.values[..., None, None] * np.eye(grid.n))
    lo, hi = float(np.min(eig)), float(np.max(eig))
    passed = lo > 0 if sign > 0 else hi < 0
    return PsiCheckReport(sign, exponent, lo, hi, passed)


# --- Regime selection ---

@dataclass(frozen=True)
class Regime:
    name: str
    variant: str
    alpha: float
    delta: float
    beta: float
    k: int
    psi: PsiSpec
    subsequential: bool = False
    psi_check: Optional[PsiCheckReport] = None


def _sigma_k_regime(prob: ProblemSpec, grid: SphereGrid) -> Regime:
    alpha, delta = alpha_delta_for_sigma_k(prob.p, prob.q, prob.beta, prob.k)
    beta, k, n = prob.beta, prob.k, prob.n
    s = alpha + delta + beta
    if abs(s - 1.0) <= 1e-12:
        raise RegimeError(f"alpha+delta+beta = 1 (alpha={alpha:.6g}, delta={delta:.6g}): no soliton can be "
                          "reached by the normalized sigma_k flow in the scale-invariant case")
    if s > 1:
        raise RegimeError(f"the sigma_k normalized flow needs alpha+delta+beta < 1, got {s:.6g}")
    eta = eta_lambda(n, k, beta)
    if prob.equation == "soliton":
        psi = prob.psi
    else:
        # psi_flow u^{alpha-1} rho^delta sigma_k^{beta/k} = eta  <=>  sigma_k = rho^.. u^.. psi_problem
        psi = prob.psi.transformed(eta, -beta / k)
    if k == n:
        return Regime("gauss_curvature_subcritical", "support_normalized_sigma_k", alpha, delta, beta, k, psi)
    if alpha <= 0:
        report = check_psi_condition(psi, grid, alpha, beta, sign=1)
        if report.passed:
            return Regime("sigma_k_nonpositive_alpha", "support_normalized_sigma_k", alpha, delta, beta, k, psi,
                          psi_check=report)
        raise RegimeError(
            f"k < n with alpha={alpha:.6g} <= 0 needs D^2 w + w I positive definite for "
            f"w = psi^{report.exponent:.6g}; min eigenvalue {report.min_eigenvalue:.3g}"
        )
    if alpha > 1 + beta:
        report = check_psi_condition(psi, grid, alpha, beta, sign=-1)
        if report.passed:
            return Regime("sigma_k_large_alpha", "support_normalized_sigma_k", alpha, delta, beta, k, psi,
                          psi_check=report)
        raise RegimeError(
            f"k < n with alpha={alpha:.6g} > 1+beta needs D^2 w + w I negative definite for "
            f"w = psi^{report.exponent:.6g}; max eigenvalue {report.max_eigenvalue:.3g}"
        )
    raise RegimeError(f"k < n needs alpha <= 0 or alpha > 1+beta, got alpha={alpha:.6g}")


def psi_is_even(psi: PsiSpec, grid: SphereGrid) -> bool:
    """psi(-x) == psi(x) at every node, to roundoff."""
    points = grid.points
    return bool(np.allclose(psi.at(-points), psi.at(points), rtol=1e-12, atol=0.0))


def _gauss_regime(prob: ProblemSpec, grid: SphereGrid) -> Regime:
    p, q, beta, n = prob.p, prob.q, prob.beta, prob.n
    alpha, delta = alpha_delta_from(p, q, beta, n)
    psi = prob.psi.transformed(1.0, -beta / n)

    def regime(name: str, subsequential: bool = False) -> Regime:
        return Regime(name, "support_normalized_gauss", alpha, delta, beta, n, psi, subsequential)

    if p > q:
        return regime("gauss_p_above_q")
    if p == q:
        if p == 0:
            raise RegimeError("p = q = 0 is the Alexandrov problem, which needs measure conditions on psi")
        return regime("gauss_p_equals_q")
    if not psi_is_even(prob.psi, grid):
        raise RegimeError(f"p={p:.6g} < q={q:.6g} needs an even psi")
    if p >= 0:
        return regime("gauss_even_nonnegative_p", subsequential=True)
    if q <= 0:
        return regime("gauss_even_nonpositive_q", subsequential=True)
    q_star = dual_exponent(q, n)
    if q_star is not None and -q_star < p < 0:
        return regime("gauss_even_small_negative_p", subsequential=True)
    raise RegimeError(f"p={p:.6g} < q={q:.6g} with q > 0 needs -q* < p < 0 (q*={q_star})")


def select_regime(prob: ProblemSpec, grid: SphereGrid) -> Regime:
    if prob.equation in SIGMA_K_EQUATIONS:
        return _sigma_k_regime(prob, grid)
    return _gauss_regime(prob, grid)


# --- Solver ---

@dataclass(eq=False)
class SolveResult:
    problem: ProblemSpec
    regime: Regime
    shape: SupportShape
    residual: float
    c0: float
    steps: int
    converged: bool
    wall_time: float
    flow: FlowResult = field(repr=False)

    def to_report(self) -> Dict[str, Any]:
        ex = problem_exponents(self.problem)
        u = self.shape.values
        return {
            "equation": self.problem.equation,
            "regime": self.regime.name,
            "subsequential": self.regime.subsequential,
            "flow_variant": self.regime.variant,
            "exponents": {**ex.to_dict(), "k": self.problem.k},
            "psi_check": self.regime.psi_check.to_dict() if self.regime.psi_check else None,
            "residual": self.residual,
            "c0": self.c0,
            "converged": self.converged,
            "iterations": self.steps,
            "wall_time": self.wall_time,
            "osc_u_over_mean": float((np.max(u) - np.min(u)) / np.mean(u)),
            "problem": self.problem.to_dict(),
        }


def _flow_config(regime: Regime, grid: SphereGrid, max_steps: int, dt_safety: float, t_end: float) -> FlowConfig:
    curvature = CurvatureSpec("sigma_k_root", grid.n, regime.beta, "principal_radii", k=regime.k)
    return FlowConfig(
        variant=regime.variant,
        alpha=regime.alpha,
        delta=regime.delta,
        curvature=curvature,
        psi=regime.psi,
        n_theta=grid.shape[0],
        n_phi=grid.shape[1] if grid.n == 2 else None,
        dt_safety=dt_safety,
        t_end=t_end,
        stop_osc_tol=0.0,
        stop_residual_tol=0.0,
        max_steps=max_steps,
    )


def symmetrize(shape: SupportShape) -> SupportShape:
    """u(x) <- (u(x) + u(-x)) / 2."""
    return make_support(shape.grid, 0.5 * (shape.values + antipodal(shape.u).values))


def solve(prob: ProblemSpec, initial: SupportShape,
          residual_tol: float = config.DEFAULT_SOLVE_RESIDUAL_TOL,
          max_steps: int = config.DEFAULT_MAX_STEPS,
          dt_safety: float = config.DEFAULT_DT_SAFETY,
          t_end: float = 1e6) -> SolveResult:
    grid = initial.grid
    if grid.n != prob.n:
        raise ConfigError(f"initial shape lives on S^{grid.n} but the problem has n={prob.n}")
    regime = select_regime(prob, grid)
    logger.info("%s: regime %s via %s (alpha=%.6g, delta=%.6g)", prob.equation, regime.name, regime.variant,
                regime.alpha, regime.delta)
    cfg = _flow_config(regime, grid, max_steps, dt_safety, t_end)
    gauss = regime.variant == "support_normalized_gauss"
    if regime.subsequential:
        initial = symmetrize(initial)

    def c0_of(state_phi: float) -> float:
        return state_phi ** (-prob.n / prob.beta) if gauss else 1.0

    def stop_when(state: FlowState) -> bool:
        if state.step % config.RESIDUAL_CHECK_STRIDE:
            return False
        try:
            return residual(state.shape, prob, c0_of(state.phi))[1] <= residual_tol
        except ShapeError:
            return False

    started = time.perf_counter()
    result = flow_service.run(cfg, initial, stop_when=stop_when)
    wall = time.perf_counter() - started

    shape = result.shape
    c0 = c0_of(result.phi) if gauss else eta_lambda(prob.n, prob.k, prob.beta)
    scale_c0 = c0_of(result.phi)
    if gauss and prob.p != prob.q:
        # det h scales like lambda^n, the right-hand side like lambda^{n+p-q}
        shape = make_support(grid, scale_c0 ** (1.0 / (prob.p - prob.q)) * shape.values)
        scale_c0 = 1.0
    _, final_residual = residual(shape, prob, scale_c0)
    converged = result.verdict == "converged" and final_residual <= residual_tol
    if not converged and not regime.subsequential:
        raise NumericalError(
            f"{prob.equation} did not reach residual {residual_tol:g} within {result.steps} steps "
            f"(verdict {result.verdict}, residual {final_residual:.3g})"
        )
    logger.info("%s solved in %d steps: residual %.3g, c0 %.6g", prob.equation, result.steps, final_residual, c0)
    return SolveResult(prob, regime, shape, final_residual, c0, result.steps, converged, wall, result)


def _volume_normalized(shape: SupportShape, q: float) -> np.ndarray:
    """u divided by the q-mean of rho over d xi."""
    grid = shape.grid
    jac = shape.values * shape.det_h / shape.rho ** (grid.n + 1)
    if q == 0:
        scale = math.exp(integrate_values(grid, jac * np.log(shape.rho)) / grid.area)
    else:
        scale = (integrate_values(grid, jac * shape.rho ** q) / grid.area) ** (1.0 / q)
    return shape.values / scale


def uniqueness_gap(prob: ProblemSpec, first: SupportShape, second: SupportShape, **solve_kwargs) -> float:
    """Sup distance between the limits reached from two starts (after volume normalization when p = q)."""
    a = solve(prob, first, **solve_kwargs).shape
    b = solve(prob, second, **solve_kwargs).shape
    if prob.p == prob.q:
        return float(np.max(np.abs(_volume_normalized(a, prob.q) - _volume_normalized(b, prob.q))))
    return float(np.max(np.abs(a.values - b.values)))
