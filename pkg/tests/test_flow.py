import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from curvflow import config
from curvflow.models.curvature import CurvatureSpec
from curvflow.models.flow import HISTORY_FIELDS, FlowConfig, FlowRecord, FlowState
from curvflow.models.run_config import load_run_config
from curvflow.services import flow_service
from curvflow.services.flow_service import (
    HistoryBuffer,
    advance,
    barrier_quantity,
    blowup_time,
    check_conventions,
    exponential_rate,
    fit_blowup_time,
    phi_integral,
    phi_schedule,
    prescale,
    rescaled_deviation,
    rhs_radial_gamma,
    rhs_radial_original,
    rhs_support,
    run,
    tau_from_means,
    tau_of_t,
)
from curvflow.services.functional_service import V_q
from curvflow.services.shape_service import (
    ball_radial,
    ball_support,
    ellipsoid_support,
    radial_perturbation,
    shape_from_description,
)
from curvflow.services.spherical_domain import build_grid
from curvflow.utils.errors import ConfigError, NumericalError, ScheduleError

KAPPA_1 = CurvatureSpec("sigma_k_root", 1, k=1)
RADII_1 = CurvatureSpec("sigma_k_root", 1, k=1, argument="principal_radii")


def _record(step, t=0.0, max_grad_gamma=0.0):
    values = {name: 0.0 for name in HISTORY_FIELDS}
    values.update(step=step, t=t, max_grad_gamma=max_grad_gamma)
    return FlowRecord(**values)


# --- Schedules ---

def test_phi_schedule_branches():
    assert phi_schedule(0.5, 0.0, 0.0, 1.0, 1.0) == pytest.approx(math.exp(0.5))
    assert phi_schedule(0.5, -1.0, 0.0, 1.0, 1.0) == pytest.approx(1.5)
    # rho' = rho^2 from the unit sphere
    assert phi_schedule(0.5, 0.0, 0.0, 2.0, 1.0) == pytest.approx(2.0)
    assert phi_schedule(0.0, 0.3, 0.1, 1.7, 0.8, rho0=2.0) == pytest.approx(2.0)
    with pytest.raises(ScheduleError):
        phi_schedule(1.0, 0.0, 0.0, 2.0, 1.0)
    with pytest.raises(ScheduleError):
        phi_schedule(-0.1, 0.0, 0.0, 1.0, 1.0)


def test_tau_of_t():
    assert tau_of_t(0.7, 0.2, -0.2, 1.0, 1.0) == pytest.approx(0.7)
    assert tau_of_t(1.0, -1.0, 0.0, 1.0, 1.0) == pytest.approx(math.log(2.0))
    assert tau_of_t(0.5, 0.0, 0.0, 2.0, 1.0, t_star=1.0) == pytest.approx(math.log(2.0))
    with pytest.raises(ScheduleError):
        tau_of_t(0.5, 0.0, 0.0, 2.0, 1.0)
    with pytest.raises(ScheduleError):
        tau_of_t(1.5, 0.0, 0.0, 2.0, 1.0, t_star=1.0)


def test_tau_from_means():
    assert tau_from_means(4.0, 1.0, 2.0) == pytest.approx(math.log(2.0))
    assert tau_from_means(0.3, 0.1, 0.0) == pytest.approx(0.2)


def test_blowup_time():
    assert blowup_time(1.0, 0.0, 0.0, 2.0, 1.0) == pytest.approx(1.0)
    assert blowup_time(2.0, 0.0, 0.0, 2.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ScheduleError):
        blowup_time(1.0, 0.0, 0.0, 1.0, 1.0)


# --- Right-hand sides ---

def test_rhs_on_balls(circle):
    cfg = FlowConfig("radial_original", -1.0, 0.0, KAPPA_1)
    ball = ball_radial(circle, 2.0)
    # u^{-1} kappa^{-1} = 1 on every circle
    assert_allclose(rhs_radial_original(ball, cfg).values, 1.0)
    assert_allclose(rhs_radial_gamma(ball, cfg).values, 0.5)

    support = FlowConfig("support_original", 0.0, 0.0, CurvatureSpec("sigma_k_root", 1, k=1, beta=2.0,
                                                                     argument="principal_radii"))
    assert_allclose(rhs_support(ball_support(circle, 1.5), support).values, 1.5 ** 2)


def test_phi_integral_makes_balls_stationary(circle):
    cfg = FlowConfig("support_normalized_gauss", -1.0, 0.0, RADII_1)
    ball = ball_support(circle, 1.5)
    # r^{1 - alpha - delta - beta}
    phi = phi_integral(ball, cfg)
    assert phi == pytest.approx(1.5)
    assert_allclose(rhs_support(ball, cfg, phi).values, 0.0, atol=1e-12)


def test_phi_integral_needs_k_equal_n(sphere):
    cfg = FlowConfig("support_normalized_sigma_k", -1.0, 0.0,
                     CurvatureSpec("sigma_k_root", 2, k=1, argument="principal_radii"))
    with pytest.raises(ConfigError):
        phi_integral(ball_support(sphere, 1.0), cfg)


def test_check_conventions():
    assert check_conventions(FlowConfig("support_original", 0.0, 0.0, RADII_1))
    assert check_conventions(FlowConfig("radial_original", 0.0, 0.0, KAPPA_1))
    assert not check_conventions(FlowConfig("radial_original", 0.0, 0.0, RADII_1))


# --- Stepping ---

def test_advance_keeps_a_circle_round(circle):
    cfg = FlowConfig("radial_original", -1.0, 0.0, KAPPA_1, t_end=10.0)
    state = advance(FlowState(ball_radial(circle, 1.0)), cfg)
    assert state.step == 1
    assert state.dt == pytest.approx(0.2 * circle.h_min ** 2)
    assert_allclose(state.shape.values, 1.0 + state.dt, rtol=1e-14)


def test_advance_clamps_to_t_end(circle):
    cfg = FlowConfig("radial_original", -1.0, 0.0, KAPPA_1, t_end=1e-4)
    state = advance(FlowState(ball_radial(circle, 1.0)), cfg)
    assert state.t == 1e-4
    assert state.dt == pytest.approx(1e-4)


def test_history_buffer_thins_by_stride():
    buffer = HistoryBuffer(max_rows=5)
    for step in range(20):
        buffer.append(_record(step))
    rows = buffer.finish()
    steps = [r.step for r in rows]
    assert len(rows) <= 5
    assert steps[0] == 0 and steps[-1] == 19
    assert steps == sorted(steps)
    with pytest.raises(ValueError):
        HistoryBuffer(max_rows=1)


def test_prescale_lifts_the_barrier(circle):
    cfg = FlowConfig("support_normalized_sigma_k", -1.0, 0.0, RADII_1)
    shape, factor = prescale(ball_support(circle, 1.0), cfg)
    assert factor < 1.0
    assert np.min(barrier_quantity(shape, cfg)) >= 1.05
    # scale-invariant exponents are left alone
    _, one = prescale(ball_support(circle, 1.0), FlowConfig("support_normalized_sigma_k", 0.0, 0.0, RADII_1))
    assert one == 1.0


# --- Post-processing ---

def test_fit_blowup_time():
    t = np.array([0.0, 0.2, 0.4, 0.6])
    assert fit_blowup_time(t, 1.0 / (1.0 - t), 2.0) == pytest.approx(1.0)
    with pytest.raises(NumericalError):
        fit_blowup_time(t[:2], 1.0 / (1.0 - t[:2]), 2.0)
    with pytest.raises(NumericalError):
        fit_blowup_time(t, 1.0 + t, 0.0)


def test_rescaled_deviation():
    rho = np.full(8, 2.0)
    dev = rescaled_deviation(rho, 0.5, 1.0, 2.0, 1.0)
    assert dev["osc"] == 0.0
    assert dev["max_abs_dev"] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ScheduleError):
        rescaled_deviation(rho, 1.0, 1.0, 2.0, 1.0)


def test_exponential_rate():
    history = [_record(i, t=0.1 * i, max_grad_gamma=math.exp(-0.1 * i)) for i in range(40)]
    slope, r2 = exponential_rate(history)
    assert slope == pytest.approx(-2.0)
    assert r2 == pytest.approx(1.0)
    assert exponential_rate([_record(i) for i in range(10)]) is None


# --- Runs ---

def test_run_rejects_mismatched_initial_data(circle, sphere):
    cfg = FlowConfig("support_original", 0.0, 0.0, RADII_1)
    with pytest.raises(ConfigError):
        run(cfg, ball_radial(circle, 1.0))
    with pytest.raises(ConfigError):
        run(cfg, ball_support(sphere, 1.0))


def test_circle_follows_the_spherical_solution(circle):
    cfg = FlowConfig("radial_original", -1.0, 0.0, KAPPA_1, t_end=0.5, stop_osc_tol=0.0)
    seen = []
    result = run(cfg, ball_radial(circle, 1.0), on_step=lambda state, record: seen.append(record.step))
    assert result.verdict == "t_end"
    assert result.t == 0.5
    assert result.final.min_rho == pytest.approx(1.5, rel=1e-12)
    assert result.final.phi == pytest.approx(1.5)
    assert seen == list(range(result.steps + 1))


def test_sphere_follows_the_spherical_solution(sphere):
    cfg = FlowConfig("radial_original", 0.0, 0.0, CurvatureSpec("sigma_k_root", 2, k=2),
                     n_theta=8, n_phi=16, t_end=0.5, stop_osc_tol=0.0)
    result = run(cfg, ball_radial(sphere, 1.0))
    assert result.final.min_rho == pytest.approx(math.exp(0.5), rel=1e-5)
    assert result.final.osc_rho == pytest.approx(0.0, abs=1e-12)


def test_round_data_is_converged_at_step_zero(circle):
    cfg = FlowConfig("radial_normalized", -1.0, 0.0, KAPPA_1, t_end=10.0)
    result = run(cfg, ball_radial(circle, 1.0))
    assert result.verdict == "converged"
    assert result.steps == 0
    assert len(result.history) == 1


def test_max_steps_verdict(circle):
    cfg = FlowConfig("radial_normalized", -1.0, 0.0, KAPPA_1, t_end=10.0, max_steps=3)
    result = run(cfg, radial_perturbation(circle, 1.0, 0.05, mode=2))
    assert result.verdict == "max_steps"
    assert result.steps == 3


def test_underflow_aborts_with_partial_history(circle, monkeypatch):
    monkeypatch.setattr(flow_service, "parabolic_coefficient", lambda *args, **kwargs: 1e30)
    cfg = FlowConfig("radial_original", -1.0, 0.0, KAPPA_1, t_end=1.0)
    with pytest.raises(NumericalError) as info:
        run(cfg, ball_radial(circle, 1.0))
    assert info.value.step == 1
    assert len(info.value.history) == 1


def test_circle_blows_up_at_the_spherical_time(circle):
    cfg = FlowConfig("support_original", 0.0, 0.0,
                     CurvatureSpec("sigma_k_root", 1, k=1, beta=2.0, argument="principal_radii"), t_end=2.0)
    result = run(cfg, ball_support(circle, 1.0))
    assert result.verdict == "blown_up"
    assert result.t_star == pytest.approx(1.0, abs=0.02)
    assert result.final.min_rho > 1e3
    assert result.rescaled["osc"] < 1e-9


def test_perturbed_circle_converges_exponentially(circle):
    cfg = FlowConfig("radial_normalized", -1.0, 0.0, KAPPA_1, t_end=50.0, stop_osc_tol=1e-3)
    result = run(cfg, radial_perturbation(circle, 1.0, 0.1, direction=[1.0, 0.0]))
    assert result.verdict == "converged"
    assert result.final.osc_rho < 1e-3
    assert result.final.min_rho == pytest.approx(1.0, abs=0.05)
    slope, _ = result.exponential_rate
    assert slope < 0


def test_sigma_k_normalized_ellipse_converges(circle):
    cfg = FlowConfig("support_normalized_sigma_k", -1.0, 0.0, RADII_1, t_end=50.0, stop_osc_tol=1e-3)
    result = run(cfg, ellipsoid_support(circle, [1.0, 1.3]))
    assert result.prescale < 1.0
    assert result.verdict == "converged"
    assert result.final.q_max <= result.history[0].q_max
    assert result.final.residual < result.history[0].residual


def test_gauss_normalized_ellipse_keeps_V_q(circle):
    cfg = FlowConfig("support_normalized_gauss", -1.0, 0.0, RADII_1, t_end=50.0, stop_osc_tol=1e-3)
    initial = ellipsoid_support(circle, [1.0, 1.3])
    result = run(cfg, initial)
    assert result.verdict == "converged"
    first, last = result.history[0], result.final
    assert abs(last.v_q - first.v_q) <= 1e-2 * abs(first.v_q)
    assert last.j_pq <= first.j_pq
    assert first.v_q == pytest.approx(V_q(initial, 2.0))


def _config_run(name, n_theta=8, **overrides):
    run_cfg = load_run_config(config.CONFIGS_DIR / f"{name}.json", "flow")
    cfg = dataclasses.replace(run_cfg.flow, n_theta=n_theta, n_phi=2 * n_theta, **overrides)
    grid = build_grid(cfg.n, cfg.n_theta, cfg.n_phi)
    initial = shape_from_description(grid, run_cfg.initial_shape, cfg.representation)
    records = []
    result = run(cfg, initial, on_step=lambda state, record: records.append(record))
    return result, records


@pytest.mark.slow
def test_perturbed_sphere_converges_exponentially():
    result, _ = _config_run("radial_normalized_convergence")
    assert result.verdict == "converged"
    assert result.final.osc_rho < 1e-3
    slope, r2 = result.exponential_rate
    assert slope < 0
    assert r2 >= 0.99


@pytest.mark.slow
def test_ellipsoid_blows_up_while_rounding():
    result, records = _config_run("ellipsoid_blowup")
    assert result.verdict == "blown_up"
    assert result.t < result.t_star
    assert result.t == pytest.approx(result.t_star, rel=1e-2)
    ratios = [r.osc_rho / r.min_rho for r in records]
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))


@pytest.mark.slow
def test_gauss_flow_entropy_barrier_and_volume_at_every_step():
    result, records = _config_run("gauss_entropy", t_end=3.0)
    assert len(records) == result.steps + 1
    v0 = records[0].v_q
    for prev, cur in zip(records, records[1:]):
        assert cur.j_pq <= prev.j_pq + 1e-8 * (1.0 + abs(prev.j_pq))
        tol = 1e-6 * cur.eta
        assert max(cur.q_max, cur.eta) <= max(prev.q_max, prev.eta) + tol
        assert min(cur.q_min, cur.eta) >= min(prev.q_min, prev.eta) - tol
        assert abs(cur.v_q - v0) <= 1e-3 * abs(v0)


@pytest.mark.slow
def test_gauss_flow_volume_drift_shrinks_under_refinement():
    drifts = []
    for n_theta in (8, 16):
        _, records = _config_run("gauss_entropy", n_theta=n_theta, t_end=0.2)
        v0 = records[0].v_q
        drifts.append(max(abs(r.v_q - v0) for r in records) / abs(v0))
    assert drifts[0] <= 1e-3
    assert drifts[1] <= drifts[0]
