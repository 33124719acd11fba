import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from pairvb.cli.common import add_logging_args, log_resolved, run_command
from pairvb.core.errors import ContractViolation
from pairvb.engines.checkpoint import load_checkpoint
from pairvb.engines.evaluation import predict_conditional
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Top-N items for a user from a trained checkpoint"
    )

    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--user", type=str, required=True, help="External user key")
    parser.add_argument("--top", type=int, default=10, help="Number of items (default: 10)")
    parser.add_argument(
        "--output",
        type=Path,
        default=None,
        help="TSV to write (default: stdout)",
    )

    add_logging_args(parser)
    return parser.parse_args(argv)


def _run(args) -> None:
    log_resolved(
        "Prediction",
        {
            "checkpoint": args.checkpoint,
            "user": args.user,
            "top": args.top,
            "output": args.output,
        },
    )
    if args.top < 1:
        raise ContractViolation(f"--top must be >= 1, got {args.top}")

    state, users, items = load_checkpoint(args.checkpoint)
    if args.user not in users:
        raise ContractViolation(f"unknown user key {args.user!r}")

    p = predict_conditional(users.index(args.user), state)
    # stable sort keeps index order among ties
    order = np.argsort(-p, kind="stable")[: args.top]

    table = pd.DataFrame(
        {"item": [items.key(int(j)) for j in order], "probability": p[order]}
    )

    if args.output is None:
        table.to_csv(sys.stdout, sep="\t", index=False, float_format="%.10g")
    else:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(args.output, sep="\t", index=False, float_format="%.10g")
        log.info("Predictions written to %s", args.output)


def main(argv=None) -> int:
    return run_command(_run, parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
