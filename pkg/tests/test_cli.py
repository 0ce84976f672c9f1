import json

import pytest

from curvflow.main import main
from curvflow.services import flow_service, validation_service
from curvflow.utils.data import load_data, load_history_csv

CIRCLE_FLOW = {
    "n": 1,
    "n_theta": 32,
    "variant": "radial_original",
    "alpha": -1.0,
    "delta": 0.0,
    "curvature": {"kind": "sigma_k_root", "k": 1},
    "initial_shape": {"kind": "sphere"},
    "t_end": 0.1,
    "stop_osc_tol": 0.0,
    "snapshot_stride": 5,
}


def _write(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def test_oracle(capsys):
    assert main(["oracle", "1", "0.5", "-1", "0", "1", "1"]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == "theta" and float(out[1]) == pytest.approx(1.5)
    assert main(["oracle", "1", "0.5", "0", "0", "2", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0].split()[1]) == pytest.approx(2.0)
    assert float(lines[1].split()[1]) == pytest.approx(1.0)


def test_oracle_past_blowup_is_a_config_error(capsys):
    assert main(["oracle", "1", "1.5", "0", "0", "2", "1"]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_flow_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["flow", _write(tmp_path, "circle.json", {**CIRCLE_FLOW, "output_dir": str(out)})])
    assert code == 0
    summary = load_data(out / "summary.json")
    assert summary["verdict"] == "t_end"
    assert summary["t"] == 0.1
    assert summary["config"]["random_seed"] == 0
    assert summary["audit"]["samples"] > 0
    history = load_history_csv(out / "history.csv")
    assert history[-1].min_rho == pytest.approx(1.1)
    assert (out / "final_shape.csv").is_file() and (out / "final_shape.json").is_file()
    assert (out / "snapshots" / "step_0000000.csv").is_file()
    assert (out / "snapshots" / "step_0000005.csv").is_file()
    assert "radial_original: t_end" in capsys.readouterr().out


def test_flow_default_output_dir(tmp_path, output_dir):
    assert main(["flow", _write(tmp_path, "circle.json", {**CIRCLE_FLOW, "snapshot_stride": 0})]) == 0
    assert (output_dir / "circle" / "summary.json").is_file()


def test_numerical_failure_keeps_partial_output(tmp_path, monkeypatch):
    monkeypatch.setattr(flow_service, "parabolic_coefficient", lambda *args, **kwargs: 1e30)
    out = tmp_path / "run"
    code = main(["flow", _write(tmp_path, "circle.json", {**CIRCLE_FLOW, "output_dir": str(out)})])
    assert code == 4
    summary = load_data(out / "summary.json")
    assert summary["verdict"] == "failed"
    assert summary["step"] == 1
    assert len(load_history_csv(out / "history.csv")) == 1


@pytest.mark.parametrize("document", [
    {**CIRCLE_FLOW, "colour": "red"},
    {**CIRCLE_FLOW, "initial_shape": {"kind": "radial_perturbation", "amplitude": 0.1}},
    {**CIRCLE_FLOW, "n_theta": 8},
])
def test_flow_config_errors(tmp_path, document, capsys):
    assert main(["flow", _write(tmp_path, "bad.json", document)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["flow", str(tmp_path / "nowhere.json")]) == 2


def test_solve(tmp_path, capsys):
    out = tmp_path / "solve"
    document = {
        "n": 1,
        "n_theta": 32,
        "problem": {"equation": "lp_dual_minkowski", "p": 3.0, "q": 2.0},
        "initial_shape": {"kind": "sphere"},
        "output_dir": str(out),
    }
    assert main(["solve", _write(tmp_path, "solve.json", document)]) == 0
    report = load_data(out / "solve_report.json")
    assert report["regime"] == "gauss_p_above_q"
    assert report["converged"] is True
    assert (out / "final_shape.csv").is_file()
    assert "regime gauss_p_above_q" in capsys.readouterr().out


def test_solve_out_of_regime(tmp_path, capsys):
    document = {
        "n": 1,
        "n_theta": 32,
        "problem": {"equation": "lp_dual_minkowski", "p": 0.0, "q": 0.0},
        "initial_shape": {"kind": "sphere"},
        "output_dir": str(tmp_path / "solve"),
    }
    assert main(["solve", _write(tmp_path, "solve.json", document)]) == 3
    assert "Alexandrov" in capsys.readouterr().err


def test_validate_exit_codes(monkeypatch, capsys):
    monkeypatch.setattr(validation_service, "CHECKS", [("always", "quick", lambda: (True, "fine"))])
    assert main(["validate", "quick"]) == 0
    assert "1/1 checks passed" in capsys.readouterr().out
    monkeypatch.setattr(validation_service, "CHECKS", [
        ("always", "quick", lambda: (True, "fine")),
        ("never", "quick", lambda: (False, "off by one")),
    ])
    assert main(["validate", "quick"]) == 4
    assert "1/2 checks passed" in capsys.readouterr().out


def test_unknown_validate_level():
    with pytest.raises(SystemExit):
        main(["validate", "thorough"])
