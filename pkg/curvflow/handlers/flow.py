import logging
from pathlib import Path
from typing import Any, Dict, Optional

from curvflow.models.flow import FlowConfig, FlowRecord, FlowResult, FlowState
from curvflow.models.run_config import RunConfig, load_run_config
from curvflow.services.curvature_service import AuditReport, assumption_audit
from curvflow.services.flow_service import run
from curvflow.services.shape_service import shape_from_description
from curvflow.services.spherical_domain import build_grid
from curvflow.utils.data import save_data, save_history_csv, save_snapshot
from curvflow.utils.errors import EXIT_OK, NumericalError

logger = logging.getLogger(__name__)


def rescaled_oscillation(result: FlowResult, cfg: FlowConfig) -> float:
    """osc of the rescaled radial function at the end of the run."""
    if result.rescaled is not None:
        return result.rescaled["osc"]
    last = result.final
    if cfg.is_original:
        return last.osc_rho / last.phi
    return last.osc_rho


def flow_summary(result: FlowResult, run_cfg: RunConfig, audit: Optional[AuditReport] = None) -> Dict[str, Any]:
    cfg = run_cfg.flow
    last = result.final
    rate = result.exponential_rate
    return {
        "audit": None if audit is None else {"passed": audit.passed, "samples": audit.samples,
                                             "failures": [prop for prop, _ in audit.failures]},
        "verdict": result.verdict,
        "steps": result.steps,
        "t": result.t,
        "final_osc_rho_tilde": rescaled_oscillation(result, cfg),
        "final_residual": last.residual,
        "final_min_rho": last.min_rho,
        "final_max_rho": last.max_rho,
        "exponential_rate": None if rate is None else {"slope": rate[0], "r2": rate[1]},
        "t_star": result.t_star,
        "rescaled": result.rescaled,
        "prescale": result.prescale,
        "history_rows": len(result.history),
        "config": run_cfg.resolved,
    }


def cmd_flow(config_path: Path) -> int:
    run_cfg = load_run_config(config_path, "flow")
    cfg = run_cfg.flow
    grid = build_grid(cfg.n, cfg.n_theta, cfg.n_phi)
    initial = shape_from_description(grid, run_cfg.initial_shape, cfg.representation)
    out = run_cfg.output_dir
    stride = run_cfg.snapshot_stride

    def on_step(state: FlowState, record: FlowRecord):
        if stride and state.step % stride == 0:
            save_snapshot(state.shape, out / "snapshots" / f"step_{state.step:07d}.csv", t=state.t)

    audit = assumption_audit(cfg.curvature, seed=run_cfg.options["random_seed"])
    if not audit.passed:
        logger.warning("curvature spec %s fails the assumption audit: %s", cfg.curvature.to_dict(),
                       sorted({prop for prop, _ in audit.failures}))

    logger.info("flow %s on %s, output in %s", cfg.variant, grid.describe(), out)
    try:
        result = run(cfg, initial, on_step=on_step)
    except NumericalError as e:
        save_history_csv(e.history, out / "history.csv")
        save_data(out / "summary.json", {"verdict": "failed", "error": str(e), "step": e.step, "node": e.node,
                                         "config": run_cfg.resolved})
        raise

    save_history_csv(result.history, out / "history.csv")
    save_snapshot(result.shape, out / "final_shape.csv", t=result.t)
    summary = flow_summary(result, run_cfg, audit)
    save_data(out / "summary.json", summary)
    print(f"{cfg.variant}: {result.verdict} after {result.steps} steps, t={result.t:.6g}, "
          f"osc rho~={summary['final_osc_rho_tilde']:.3g}")
    return EXIT_OK


def register_handlers(subparsers):
    parser = subparsers.add_parser("flow", help="run a curvature flow from a JSON config")
    parser.add_argument("config", type=Path)
    parser.set_defaults(handler=lambda args: cmd_flow(args.config))
