from curvflow.services.validation_service import LEVELS, format_table, run_checks
from curvflow.utils.errors import EXIT_NUMERICAL, EXIT_OK


def cmd_validate(level: str) -> int:
    results = run_checks(level)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def register_handlers(subparsers):
    parser = subparsers.add_parser("validate", help="run the built-in numerical checks")
    parser.add_argument("level", choices=LEVELS)
    parser.set_defaults(handler=lambda args: cmd_validate(args.level))
