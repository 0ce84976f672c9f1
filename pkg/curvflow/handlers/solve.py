import logging
from pathlib import Path

from curvflow.models.run_config import load_run_config
from curvflow.services.minkowski_service import solve
from curvflow.services.shape_service import shape_from_description
from curvflow.services.spherical_domain import build_grid
from curvflow.utils.data import save_data, save_snapshot
from curvflow.utils.errors import EXIT_OK

logger = logging.getLogger(__name__)


def cmd_solve(config_path: Path) -> int:
    run_cfg = load_run_config(config_path, "solve")
    n_theta, n_phi = run_cfg.grid_size
    grid = build_grid(run_cfg.n, n_theta, n_phi)
    initial = shape_from_description(grid, run_cfg.initial_shape, "support")
    out = run_cfg.output_dir

    result = solve(run_cfg.problem, initial, **run_cfg.options)
    report = result.to_report()
    report["config"] = run_cfg.resolved
    save_data(out / "solve_report.json", report)
    save_snapshot(result.shape, out / "final_shape.csv", extra={"c0": result.c0})
    flag = " (subsequential)" if result.regime.subsequential else ""
    print(f"{run_cfg.problem.equation}: regime {result.regime.name}{flag}, residual {result.residual:.3g}, "
          f"c0={result.c0:.6g}, {result.steps} steps")
    return EXIT_OK


def register_handlers(subparsers):
    parser = subparsers.add_parser("solve", help="solve a Minkowski-type equation by a normalized flow")
    parser.add_argument("config", type=Path)
    parser.set_defaults(handler=lambda args: cmd_solve(args.config))
