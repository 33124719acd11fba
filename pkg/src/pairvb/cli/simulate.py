import argparse
from pathlib import Path

from pairvb.cli.common import add_logging_args, log_resolved, run_command
from pairvb.engines.simulator import (
    sample_ground_truth,
    simulate,
    write_simulated_stream,
)
from pairvb.engines.truth_io import write_ground_truth
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Simulate a pair stream from the select-then-censor model"
    )

    parser.add_argument("--users", type=int, default=200, help="I (default: 200)")
    parser.add_argument("--items", type=int, default=100, help="J (default: 100)")
    parser.add_argument("--k", type=int, default=2, help="Latent dimensionality (default: 2)")
    parser.add_argument(
        "--observed",
        type=int,
        default=20_000,
        help="Number of observed pairs to produce (default: 20000)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument(
        "--alpha",
        type=float,
        default=1.0,
        help="Dirichlet concentration of user selection weights (default: 1.0)",
    )
    parser.add_argument(
        "--beta",
        type=float,
        default=1.0,
        help="Dirichlet concentration of item selection weights (default: 1.0)",
    )
    parser.add_argument(
        "--max-draws",
        type=int,
        default=None,
        help="Abort after this many draws (default: max(1e8, 1000 * observed))",
    )
    parser.add_argument(
        "--output",
        type=Path,
        required=True,
        help="Pair stream to write, one observation per line in draw order",
    )
    parser.add_argument(
        "--truth",
        type=Path,
        default=None,
        help="Optional HDF5 ground-truth sidecar",
    )

    add_logging_args(parser)
    return parser.parse_args(argv)


def _run(args) -> None:
    log_resolved(
        "Simulation",
        {
            "users": args.users,
            "items": args.items,
            "k": args.k,
            "observed": args.observed,
            "seed": args.seed,
            "alpha": args.alpha,
            "beta": args.beta,
            "max_draws": args.max_draws,
            "output": args.output,
            "truth": args.truth,
        },
    )

    truth = sample_ground_truth(
        args.users, args.items, args.k, args.seed, alpha=args.alpha, beta=args.beta
    )
    result = simulate(truth, args.observed, args.seed + 1, max_draws=args.max_draws)

    write_simulated_stream(args.output, result)
    log.info(
        "Wrote %d pairs to %s | rejected=%d | empirical r=%.4f",
        result.accepted,
        args.output,
        result.rejected,
        result.rejected / result.accepted,
    )

    if args.truth is not None:
        write_ground_truth(
            args.truth,
            truth,
            meta={"seed": args.seed, **result.describe()},
        )


def main(argv=None) -> int:
    return run_command(_run, parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
