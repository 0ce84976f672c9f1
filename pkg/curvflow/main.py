import argparse
import logging
import sys

import jsonschema

from curvflow import config
from curvflow.handlers.flow import register_handlers as register_flow_handlers
from curvflow.handlers.oracle import register_handlers as register_oracle_handlers
from curvflow.handlers.solve import register_handlers as register_solve_handlers
from curvflow.handlers.validate import register_handlers as register_validate_handlers
from curvflow.utils.errors import EXIT_CONFIG, CurvflowError
from curvflow.utils.logging import log_exception, setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvflow",
        description="Anisotropic expanding curvature flows and Minkowski-type problems on S^1 and S^2.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_flow_handlers(subparsers)
    register_solve_handlers(subparsers)
    register_oracle_handlers(subparsers)
    register_validate_handlers(subparsers)
    return parser


def main(argv=None) -> int:
    setup_logging(config.LOG_LEVEL)
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CurvflowError as e:
        log_exception(e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except jsonschema.SchemaError as e:
        log_exception(e)
        print(f"error: broken config schema: {e.message}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
