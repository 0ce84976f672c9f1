"""
Explicit time stepping of the expanding flows and their normalizations.

Radial variants evolve rho on the xi-grid, support variants evolve u on the x-grid.
Every step is one RK2 midpoint update under a parabolic CFL bound; the run loop
records one FlowRecord per accepted step and decides the verdict.
"""

from __future__ import annotations

import functools
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from curvflow import config
from curvflow.models.flow import FlowConfig, FlowRecord, FlowResult, FlowState
from curvflow.models.grid import ScalarField
from curvflow.models.shape import RadialShape, ShapeState, SupportShape
from curvflow.services import oracle_service
from curvflow.services.curvature_service import cone_margin, eta_for, eta_lambda, speed, speed_grad
from curvflow.services.functional_service import U_p, V_q, exponents_from
from curvflow.services.shape_service import make_radial, make_support
from curvflow.services.spherical_domain import integrate_values
from curvflow.utils.errors import ConeError, ConfigError, GridError, NumericalError, ScheduleError, ShapeError

logger = logging.getLogger(__name__)

VERDICTS = ("converged", "blown_up", "t_end", "max_steps")


@functools.lru_cache(maxsize=None)
def flow_eta(cfg: FlowConfig) -> float:
    if cfg.variant == "support_normalized_gauss":
        return eta_lambda(cfg.n, cfg.n, cfg.beta)
    return eta_for(cfg.curvature)


def check_conventions(cfg: FlowConfig) -> bool:
    """False (with a warning) when the curvature argument is not the native one of the variant."""
    native = cfg.curvature.on_radii == (not cfg.is_radial)
    if not native:
        logger.warning(
            "%s evaluates f on %s; eta is taken from that convention (%.6g)",
            cfg.variant, cfg.curvature.argument, flow_eta(cfg),
        )
    return native


def _arguments(shape: ShapeState, cfg: FlowConfig) -> np.ndarray:
    """Principal curvatures or radii, whichever the curvature spec takes."""
    if isinstance(shape, RadialShape):
        native, native_is_radii = shape.curvatures, False
    else:
        native, native_is_radii = shape.radii, True
    if cfg.curvature.on_radii == native_is_radii:
        return native
    flat = native.reshape(-1, cfg.n)
    bad = np.flatnonzero(np.min(flat, axis=-1) <= 0)
    if bad.size:
        node = int(bad[0])
        raise ConeError(f"cannot invert {flat[node].tolist()} for {cfg.curvature.argument}", node=node,
                        values=flat[node])
    return 1.0 / native


def _require_convex(shape: SupportShape):
    if not shape.is_convex:
        node = int(np.argmin(shape.radii.min(axis=-1)))
        raise ShapeError(f"convexity lost: principal radius {float(shape.radii.min()):.3g} at node {node}",
                         node=node)


def _gauss_speed(shape: SupportShape, cfg: FlowConfig) -> np.ndarray:
    # K^{-beta/n} = det(h)^{beta/n}
    return shape.det_h ** (cfg.beta / cfg.n)


# --- Right-hand sides ---

def rhs_radial_original(shape: RadialShape, cfg: FlowConfig) -> ScalarField:
    u = shape.support_values
    s = speed(cfg.curvature, _arguments(shape, cfg))
    return ScalarField(shape.grid, u ** cfg.alpha * shape.values ** cfg.delta * s * shape.omega)


def rhs_radial_normalized(shape: RadialShape, cfg: FlowConfig) -> ScalarField:
    u = shape.support_values
    s = speed(cfg.curvature, _arguments(shape, cfg))
    eta = flow_eta(cfg)
    return ScalarField(shape.grid, (u ** cfg.alpha * shape.values ** cfg.delta * s - eta * u) * shape.omega)


def rhs_radial_gamma(shape: RadialShape, cfg: FlowConfig) -> ScalarField:
    """The same flow written for gamma = log rho."""
    rhs = rhs_radial_normalized(shape, cfg) if not cfg.is_original else rhs_radial_original(shape, cfg)
    return ScalarField(shape.grid, rhs.values / shape.values)


def rhs_support(shape: SupportShape, cfg: FlowConfig, phi_now: float = 1.0) -> ScalarField:
    _require_convex(shape)
    grid = shape.grid
    psi = cfg.psi.values(grid)
    u = shape.values
    if cfg.variant == "support_normalized_gauss":
        drive = phi_now * psi * u ** cfg.alpha * shape.rho ** cfg.delta * _gauss_speed(shape, cfg)
        return ScalarField(grid, drive - u)
    drive = psi * u ** cfg.alpha * shape.rho ** cfg.delta * speed(cfg.curvature, _arguments(shape, cfg))
    if cfg.variant == "support_normalized_sigma_k":
        drive = drive - flow_eta(cfg) * u
    return ScalarField(grid, drive)


def phi_integral(shape: SupportShape, cfg: FlowConfig) -> float:
    """
    phi = int rho^q d xi / int psi u^alpha rho^{delta + n delta/beta} K^{-beta/n - 1} dx.

    The xi-integral is pulled back through |Jac A*| = u det(h) / rho^{n+1}.
    """
    n = shape.grid.n
    if cfg.curvature.k != n:
        raise ConfigError(f"phi_integral needs k = n, got k={cfg.curvature.k}")
    bad = np.flatnonzero(shape.det_h.ravel() <= 0)
    if bad.size:
        raise ShapeError(f"Gauss curvature not positive at node {int(bad[0])}", node=int(bad[0]))
    alpha, delta, beta = cfg.alpha, cfg.delta, cfg.beta
    q = n + 1 + n * delta / beta
    u, rho, det_h = shape.values, shape.rho, shape.det_h
    num = integrate_values(shape.grid, u * rho ** (q - n - 1) * det_h)
    den = integrate_values(
        shape.grid,
        cfg.psi.values(shape.grid) * u ** alpha * rho ** (delta + n * delta / beta) * det_h ** (beta / n + 1.0),
    )
    return num / den


# --- Schedules ---

def blowup_time(rho0: float, alpha: float, delta: float, beta: float, eta: float) -> float:
    return oracle_service.spherical_Tstar(rho0, alpha, delta, beta, eta)


def phi_schedule(t: float, alpha: float, delta: float, beta: float, eta: float, rho0: float = 1.0) -> float:
    if t < 0:
        raise ScheduleError(f"t must be nonnegative, got {t}")
    if oracle_service.is_scale_invariant(alpha, delta, beta):
        return math.exp(eta * t)
    s = alpha + delta + beta
    if s < 1:
        return (1.0 + (1.0 - s) * eta * t) ** (1.0 / (1.0 - s))
    t_star = blowup_time(rho0, alpha, delta, beta, eta)
    if t >= t_star:
        raise ScheduleError(f"t={t} is not before the blow-up time {t_star}")
    return ((s - 1.0) * eta * (t_star - t)) ** (1.0 / (1.0 - s))


def tau_of_t(t: float, alpha: float, delta: float, beta: float, eta: float,
             t_star: Optional[float] = None) -> float:
    if t < 0:
        raise ScheduleError(f"t must be nonnegative, got {t}")
    if oracle_service.is_scale_invariant(alpha, delta, beta):
        return t
    s = alpha + delta + beta
    if s < 1:
        return math.log((1.0 - s) * eta * t + 1.0) / ((1.0 - s) * eta)
    if t_star is None:
        raise ScheduleError("the blow-up branch of tau needs T*")
    if t >= t_star:
        raise ScheduleError(f"t={t} is not before T*={t_star}")
    return math.log((t_star - t) / t_star) / ((1.0 - s) * eta)


def tau_from_means(v_now: float, v_start: float, q: float) -> float:
    """Time change of the Gauss-curvature normalization, 1/q log of the ratio of rho^q means."""
    if q == 0:
        return v_now - v_start
    return math.log(v_now / v_start) / q


# --- Stepping ---

def parabolic_coefficient(shape: ShapeState, cfg: FlowConfig, phi_now: float = 1.0) -> float:
    """Largest diffusion coefficient of the linearized flow, in frame units."""
    args = _arguments(shape, cfg)
    grad = np.abs(speed_grad(cfg.curvature, args))
    if isinstance(shape, RadialShape):
        # d/d kappa; chain rule when f eats radii 1/kappa
        if cfg.curvature.on_radii:
            grad = grad * args ** 2
        weight = shape.support_values ** cfg.alpha * shape.values ** (cfg.delta - 2.0)
    else:
        if not cfg.curvature.on_radii:
            grad = grad * args ** 2
        weight = cfg.psi.values(shape.grid) * shape.values ** cfg.alpha * shape.rho ** cfg.delta
        if cfg.variant == "support_normalized_gauss":
            weight = weight * phi_now
    coefficient = float(np.max(weight * np.max(grad, axis=-1)))
    if not math.isfinite(coefficient) or coefficient <= 0:
        raise NumericalError(f"parabolic coefficient is {coefficient}")
    return coefficient


def _rebuild(shape: ShapeState, values: np.ndarray) -> ShapeState:
    if isinstance(shape, RadialShape):
        return make_radial(shape.grid, values)
    return make_support(shape.grid, values)


def _rhs_values(shape: ShapeState, cfg: FlowConfig, phi_now: float) -> np.ndarray:
    if cfg.variant == "radial_original":
        return rhs_radial_original(shape, cfg).values
    if cfg.variant == "radial_normalized":
        return rhs_radial_normalized(shape, cfg).values
    return rhs_support(shape, cfg, phi_now).values


def _phi_now(shape: ShapeState, cfg: FlowConfig) -> float:
    if cfg.variant == "support_normalized_gauss":
        return phi_integral(shape, cfg)
    return 1.0


def advance(state: FlowState, cfg: FlowConfig) -> FlowState:
    shape = state.shape
    grid = shape.grid
    step = state.step + 1
    try:
        phi0 = _phi_now(shape, cfg)
        dt = cfg.dt_safety * grid.h_min ** 2 / (grid.n * parabolic_coefficient(shape, cfg, phi0))
        remaining = cfg.t_end - state.t
        clamped = 0 < remaining <= dt
        if clamped:
            dt = remaining
        if dt < config.DT_UNDERFLOW_RATIO * max(1.0, abs(state.t)):
            raise NumericalError(f"time step underflow (dt={dt:.3g} at t={state.t:.6g})")

        k1 = _rhs_values(shape, cfg, phi0)
        mid = _rebuild(shape, shape.values + 0.5 * dt * k1)
        k2 = _rhs_values(mid, cfg, _phi_now(mid, cfg))
        new = _rebuild(shape, shape.values + dt * k2)
        phi_new = _phi_now(new, cfg)
    except (ShapeError, GridError) as exc:
        raise NumericalError(str(exc), step=step, node=getattr(exc, "node", None)) from exc
    except NumericalError as exc:
        if exc.step is not None:
            raise
        raise NumericalError(str(exc), step=step, node=exc.node) from exc

    t = cfg.t_end if clamped else state.t + dt
    return FlowState(new, t, step, dt, phi_new)


# --- Diagnostics ---

def barrier_quantity(shape: ShapeState, cfg: FlowConfig, phi_now: float = 1.0) -> np.ndarray:
    """Q = psi u^{alpha-1} rho^delta S, the speed divided by u (times phi for the Gauss variant)."""
    if isinstance(shape, RadialShape):
        u, rho = shape.support_values, shape.values
        return u ** (cfg.alpha - 1.0) * rho ** cfg.delta * speed(cfg.curvature, _arguments(shape, cfg))
    psi = cfg.psi.values(shape.grid)
    u, rho = shape.values, shape.rho
    if cfg.variant == "support_normalized_gauss":
        return phi_now * psi * u ** (cfg.alpha - 1.0) * rho ** cfg.delta * _gauss_speed(shape, cfg)
    return psi * u ** (cfg.alpha - 1.0) * rho ** cfg.delta * speed(cfg.curvature, _arguments(shape, cfg))


def soliton_residual(shape: ShapeState, cfg: FlowConfig, phi_now: float = 1.0) -> float:
    q = barrier_quantity(shape, cfg, phi_now)
    target = 1.0 if cfg.variant == "support_normalized_gauss" else flow_eta(cfg)
    return float(np.max(np.abs(q / target - 1.0)))


def _min_lambda(shape: ShapeState, cfg: FlowConfig) -> float:
    if isinstance(shape, SupportShape):
        return float(np.min(shape.radii))
    try:
        args = _arguments(shape, cfg)
    except ConeError:
        return float(np.min(shape.curvatures))
    return float(np.min(cone_margin(cfg.curvature, args)))


def _max_grad_gamma(shape: ShapeState) -> float:
    if isinstance(shape, RadialShape):
        return float(np.max(np.sqrt(shape.omega ** 2 - 1.0)))
    # D gamma = D u / u on the normal grid
    return float(np.max(np.linalg.norm(shape.du, axis=-1) / shape.values))


def flow_record(state: FlowState, cfg: FlowConfig, tau: float, phi: float) -> FlowRecord:
    shape = state.shape
    if isinstance(shape, SupportShape):
        _require_convex(shape)
        rho = shape.rho
    else:
        rho = shape.values
    exponents = exponents_from(cfg.alpha, cfg.delta, cfg.beta, cfg.n)
    psi = cfg.psi.values(shape.grid)
    q = barrier_quantity(shape, cfg, state.phi)
    u_p = U_p(shape, psi, exponents.p, cfg.beta)
    v_q = V_q(shape, exponents.q)
    return FlowRecord(
        step=state.step,
        t=state.t,
        tau=tau,
        dt=state.dt,
        min_rho=float(np.min(rho)),
        max_rho=float(np.max(rho)),
        osc_rho=float(np.max(rho) - np.min(rho)),
        max_grad_gamma=_max_grad_gamma(shape),
        min_lambda=_min_lambda(shape, cfg),
        eta=flow_eta(cfg),
        phi=phi,
        q_min=float(np.min(q)),
        q_max=float(np.max(q)),
        u_p=u_p,
        v_q=v_q,
        j_pq=u_p - v_q,
        residual=soliton_residual(shape, cfg, state.phi),
    )


class HistoryBuffer:
    """Keeps every stride-th record; halves itself and doubles the stride when full."""

    def __init__(self, max_rows: int = config.HISTORY_MAX_ROWS):
        if max_rows < 2:
            raise ValueError("history needs room for at least 2 rows")
        self.max_rows = max_rows
        self.stride = 1
        self.rows: List[FlowRecord] = []
        self._seen = 0
        self._last: Optional[FlowRecord] = None

    def append(self, record: FlowRecord):
        if self._seen % self.stride == 0:
            self.rows.append(record)
            # one slot stays free for the final record
            if len(self.rows) > self.max_rows - 1:
                self.rows = self.rows[::2]
                self.stride *= 2
        self._seen += 1
        self._last = record

    def finish(self) -> List[FlowRecord]:
        rows = list(self.rows)
        if self._last is not None and (not rows or rows[-1] is not self._last):
            rows.append(self._last)
        return rows


# --- Post-processing ---

def prescale(shape: SupportShape, cfg: FlowConfig) -> Tuple[SupportShape, float]:
    """Dilate u so that min Q >= PRESCALE_MARGIN * eta before the sigma_k normalized flow."""
    s = cfg.exponent_sum
    if s >= 1 or oracle_service.is_scale_invariant(cfg.alpha, cfg.delta, cfg.beta):
        logger.warning("prescale skipped: alpha+delta+beta=%.6g is not below 1", s)
        return shape, 1.0
    eta = flow_eta(cfg)
    q_min = float(np.min(barrier_quantity(shape, cfg)))
    target = config.PRESCALE_MARGIN * eta * (1.0 + 1e-9)
    if q_min >= target:
        return shape, 1.0
    # Q scales like c^{s-1} under u -> c u
    factor = (target / q_min) ** (1.0 / (s - 1.0))
    logger.info("prescale: min Q %.6g below %.6g, dilating by %.6g", q_min, target, factor)
    return make_support(shape.grid, factor * shape.values), factor


def fit_blowup_time(times: Sequence[float], rho_min: Sequence[float], exponent_sum: float) -> float:
    """Zero of the least-squares line through (t, rho_min^{1-s})."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(rho_min, dtype=float) ** (1.0 - exponent_sum)
    if t.size < 3:
        raise NumericalError(f"blow-up fit needs at least 3 samples, got {t.size}")
    slope, intercept = np.polyfit(t, y, 1)
    if not slope < 0:
        raise NumericalError(f"blow-up fit has nonnegative slope {slope:.3g}")
    return float(-intercept / slope)


def rescaled_deviation(rho: np.ndarray, t: float, t_star: float, exponent_sum: float, eta: float) -> dict:
    """rho (((s-1) eta (T* - t))^{1/(s-1)}) against the unit sphere."""
    if t >= t_star:
        raise ScheduleError(f"t={t} is not before the fitted T*={t_star}")
    scaled = np.asarray(rho) * ((exponent_sum - 1.0) * eta * (t_star - t)) ** (1.0 / (exponent_sum - 1.0))
    return {
        "osc": float(np.max(scaled) - np.min(scaled)),
        "max_abs_dev": float(np.max(np.abs(scaled - 1.0))),
    }


def exponential_rate(history: Sequence[FlowRecord]) -> Optional[Tuple[float, float]]:
    """Slope and R^2 of log max|D gamma|^2 against t over the final half of the run."""
    rows = list(history)[len(history) // 2:]
    t = np.array([r.t for r in rows])
    g = np.array([r.max_grad_gamma for r in rows])
    keep = g > 0
    if np.count_nonzero(keep) < 3:
        return None
    t, y = t[keep], np.log(g[keep] ** 2)
    slope, intercept = np.polyfit(t, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * t + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def _rho(shape: ShapeState) -> np.ndarray:
    return shape.rho if isinstance(shape, SupportShape) else shape.values


def _validate_initial(cfg: FlowConfig, initial: ShapeState):
    if initial.representation != cfg.representation:
        raise ConfigError(f"{cfg.variant} needs a {cfg.representation} shape, got {initial.representation}")
    if initial.grid.n != cfg.n:
        raise ConfigError(f"shape lives on S^{initial.grid.n} but the curvature spec has n={cfg.n}")
    if isinstance(initial, SupportShape) and not initial.is_convex:
        raise ConfigError("support variants require convex initial data")


def run(cfg: FlowConfig, initial: ShapeState,
        stop_when: Optional[Callable[[FlowState], bool]] = None,
        on_step: Optional[Callable[[FlowState, FlowRecord], None]] = None) -> FlowResult:
    _validate_initial(cfg, initial)
    check_conventions(cfg)
    alpha, delta, beta = cfg.alpha, cfg.delta, cfg.beta
    s = cfg.exponent_sum
    eta = flow_eta(cfg)

    shape, factor = initial, 1.0
    if cfg.variant == "support_normalized_sigma_k" and cfg.prescale:
        shape, factor = prescale(initial, cfg)

    rho0 = _rho(shape)
    rho0_max = float(np.max(rho0))
    blowup_mode = cfg.is_original and s > 1 and not oracle_service.is_scale_invariant(alpha, delta, beta)
    barrier_t_star = blowup_time(float(np.min(rho0)), alpha, delta, beta, eta) if blowup_mode else None
    fit_lo, fit_hi = (w * rho0_max for w in config.BLOWUP_FIT_WINDOW)
    fit_t: List[float] = []
    fit_rho: List[float] = []

    def schedule(t: float) -> Tuple[float, float]:
        if not cfg.is_original:
            return t, 1.0
        if blowup_mode:
            # the barrier sphere through min rho(0) stays inside the flow
            t_safe = min(t, barrier_t_star * (1.0 - 1e-12))
            return (tau_of_t(t_safe, alpha, delta, beta, eta, barrier_t_star),
                    phi_schedule(t_safe, alpha, delta, beta, eta, float(np.min(rho0))))
        return tau_of_t(t, alpha, delta, beta, eta), phi_schedule(t, alpha, delta, beta, eta)

    def converged(record: FlowRecord) -> bool:
        if blowup_mode:
            return False
        if cfg.stop_osc_tol > 0:
            osc = record.osc_rho / record.phi if cfg.is_original else record.osc_rho
            if osc < cfg.stop_osc_tol:
                return True
        return cfg.stop_residual_tol > 0 and not cfg.is_original and record.residual < cfg.stop_residual_tol

    history = HistoryBuffer()
    try:
        state = FlowState(shape, 0.0, 0, 0.0, _phi_now(shape, cfg))
        record = flow_record(state, cfg, *schedule(0.0))
    except (ShapeError, ConeError) as exc:
        raise ConfigError(f"initial shape rejected: {exc}") from exc
    history.append(record)
    if on_step is not None:
        on_step(state, record)

    verdict = "converged" if converged(record) else None
    while verdict is None:
        if state.step >= cfg.max_steps:
            verdict = "max_steps"
            break
        if state.t >= cfg.t_end:
            verdict = "t_end"
            break
        try:
            state = advance(state, cfg)
            try:
                record = flow_record(state, cfg, *schedule(state.t))
            except (ShapeError, ConeError) as exc:
                raise NumericalError(str(exc), step=state.step, node=exc.node) from exc
        except NumericalError as exc:
            exc.history = history.finish()
            logger.error("%s aborted: %s", cfg.variant, exc)
            raise
        history.append(record)
        if on_step is not None:
            on_step(state, record)

        if blowup_mode:
            if fit_lo <= record.min_rho <= fit_hi:
                fit_t.append(record.t)
                fit_rho.append(record.min_rho)
            if record.min_rho > config.BLOWUP_FACTOR * rho0_max:
                verdict = "blown_up"
        elif converged(record) or (stop_when is not None and stop_when(state)):
            verdict = "converged"

    rows = history.finish()
    result = FlowResult(shape=state.shape, history=rows, verdict=verdict, steps=state.step, t=state.t,
                        phi=state.phi, prescale=factor)
    if verdict == "blown_up":
        t_star = fit_blowup_time(fit_t, fit_rho, s)
        result.t_star = t_star
        result.history = [_refit_row(row, t_star, alpha, delta, beta, eta) for row in rows]
        result.rescaled = rescaled_deviation(_rho(state.shape), state.t, t_star, s, eta)
    elif not cfg.is_original:
        result.exponential_rate = exponential_rate(rows)
    logger.info("%s finished: %s after %d steps at t=%.6g", cfg.variant, verdict, state.step, state.t)
    return result


def _refit_row(row: FlowRecord, t_star: float, alpha: float, delta: float, beta: float, eta: float) -> FlowRecord:
    """Replace the barrier schedule by the one of the fitted T*."""
    if row.t >= t_star:
        return row
    s = alpha + delta + beta
    phi = ((s - 1.0) * eta * (t_star - row.t)) ** (1.0 / (1.0 - s))
    values = {name: getattr(row, name) for name in row.__dataclass_fields__}
    values.update(tau=tau_of_t(row.t, alpha, delta, beta, eta, t_star), phi=phi)
    return FlowRecord(**values)
