import numpy as np
import pytest

from curvflow.services import spherical_domain, validation_service
from curvflow.services.validation_service import (
    CheckResult,
    check_euler_relations,
    check_s1_ball_residuals,
    check_s1_functional_scaling,
    check_s1_hessian_order,
    check_s1_quadrature,
    check_s1_shape_round_trips,
    check_s1_spherical_exactness,
    check_s2_ball_residuals,
    check_s2_first_harmonic_frame,
    check_s2_functional_scaling,
    check_s2_hessian_order,
    check_sigma_k_bruteforce,
    format_table,
    run_checks,
)


def _boom():
    raise RuntimeError("boom")


def test_run_checks_keeps_order_and_reports_exceptions(monkeypatch):
    monkeypatch.setattr(validation_service, "CHECKS", [
        ("first", "quick", lambda: (True, "ok")),
        ("broken", "quick", _boom),
        ("sphere_only", "full", lambda: (True, "ok")),
    ])
    quick = run_checks("quick")
    assert [r.name for r in quick] == ["first", "broken"]
    assert quick[1].passed is False
    assert quick[1].detail == "RuntimeError: boom"
    assert [r.name for r in run_checks("full")] == ["first", "broken", "sphere_only"]
    with pytest.raises(ValueError):
        run_checks("thorough")


def test_format_table():
    table = format_table([
        CheckResult("sigma_k_bruteforce", "quick", True, "max rel err 1e-16", 0.5),
        CheckResult("s2_quadrature", "full", False, "ratio 2.0", 1.25),
    ])
    lines = table.splitlines()
    assert lines[0].split() == ["check", "level", "result", "seconds", "detail"]
    assert "PASS" in lines[1] and "FAIL" in lines[2]
    assert lines[2].rstrip().endswith("ratio 2.0")


@pytest.mark.parametrize("check", [
    check_sigma_k_bruteforce,
    check_euler_relations,
    check_s1_quadrature,
    check_s1_spherical_exactness,
    check_s1_hessian_order,
    check_s1_shape_round_trips,
    check_s1_functional_scaling,
    check_s1_ball_residuals,
])
def test_quick_checks_pass(check):
    passed, detail = check()
    assert passed, detail


@pytest.mark.slow
def test_full_validation_passes():
    failed = [r for r in run_checks("full") if not r.passed]
    assert not failed, format_table(failed)


@pytest.mark.parametrize("check", [
    check_s2_hessian_order,
    check_s2_first_harmonic_frame,
    check_s2_functional_scaling,
    check_s2_ball_residuals,
])
def test_cheap_sphere_checks_pass(check):
    passed, detail = check()
    assert passed, detail


def test_sphere_checks_catch_a_broken_hessian_stencil(monkeypatch):
    partials = spherical_domain._partials

    def broken(grid, values):
        out = partials(grid, values)
        if grid.n == 1:
            return out
        w_t, w_p, w_tt, w_tp, w_pp = out
        return w_t, w_p, w_tt, np.zeros_like(w_tp), 2.0 * w_pp

    monkeypatch.setattr(spherical_domain, "_partials", broken)
    assert not check_s2_hessian_order()[0]
    assert not check_s2_first_harmonic_frame()[0]
