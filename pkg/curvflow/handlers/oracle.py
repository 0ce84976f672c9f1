from curvflow.services import oracle_service
from curvflow.utils.errors import EXIT_OK


def cmd_oracle(r: float, t: float, alpha: float, delta: float, beta: float, eta: float) -> int:
    """Print Theta(r, t) and, when the sphere blows up, T*."""
    theta = oracle_service.spherical_theta(r, t, alpha, delta, beta, eta)
    print(f"theta {theta:.17g}")
    s = oracle_service.exponent_sum(alpha, delta, beta)
    if s > 1 and not oracle_service.is_scale_invariant(alpha, delta, beta):
        print(f"t_star {oracle_service.spherical_Tstar(r, alpha, delta, beta, eta):.17g}")
    return EXIT_OK


def register_handlers(subparsers):
    parser = subparsers.add_parser("oracle", help="closed-form radius of an expanding sphere")
    for name in ("r", "t", "alpha", "delta", "beta", "eta"):
        parser.add_argument(name, type=float)
    parser.set_defaults(handler=lambda args: cmd_oracle(args.r, args.t, args.alpha, args.delta, args.beta, args.eta))
