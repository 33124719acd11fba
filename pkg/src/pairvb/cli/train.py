import argparse
from pathlib import Path

import pandas as pd

from pairvb.cli.common import (
    add_logging_args,
    add_model_args,
    add_run_args,
    log_resolved,
    resolve_config,
    run_command,
)
from pairvb.core.data import read_pair_stream
from pairvb.core.training import TrainingRunner
from pairvb.core.model import init_state
from pairvb.engines.checkpoint import save_checkpoint
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Train a censored paired-symbol model on a pair stream"
    )

    parser.add_argument(
        "--input",
        type=Path,
        required=True,
        help="Pair stream: user<TAB>item[<TAB>count] per line",
    )
    parser.add_argument(
        "--checkpoint",
        type=Path,
        required=True,
        help="Checkpoint file to write",
    )
    parser.add_argument(
        "--history",
        type=Path,
        default=None,
        help="Optional TSV with ELBO and phase timings per sweep",
    )

    add_model_args(parser)
    add_run_args(parser)
    add_logging_args(parser)
    return parser.parse_args(argv)


def _run(args) -> None:
    hyper, config = resolve_config(args)
    log_resolved(
        "Training",
        {
            "input": args.input,
            "checkpoint": args.checkpoint,
            **hyper.describe(),
            **config.describe(),
        },
    )

    counts, users, items = read_pair_stream(args.input)
    state = init_state(counts, hyper, config.seed)
    log.info("Data: %s | D'=%d", counts.describe(), state.n_censored)

    runner = TrainingRunner(config)
    state = runner.run(state)

    save_checkpoint(state, users, items, args.checkpoint)

    if args.history is not None:
        args.history.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame([r.describe() for r in runner.history]).to_csv(
            args.history, sep="\t", index=False
        )
        log.info("Sweep history written to %s", args.history)


def main(argv=None) -> int:
    return run_command(_run, parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
