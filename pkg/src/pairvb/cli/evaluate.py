import argparse
from pathlib import Path

import numpy as np

from pairvb.cli.common import (
    add_logging_args,
    add_model_args,
    add_run_args,
    log_resolved,
    resolve_config,
    run_command,
)
from pairvb.core.data import IdMap, PairCounts, parse_pair_lines, read_pair_stream, write_pair_stream
from pairvb.core.errors import ContractViolation
from pairvb.core.training import run_ratio_sweep, train
from pairvb.engines.checkpoint import load_checkpoint
from pairvb.engines.evaluation import (
    evaluate_popularity,
    evaluate_state,
    heldout_split,
    write_report,
)
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description="Held-out rank evaluation, faceted by user activity"
    )

    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--input",
        type=Path,
        help="Pair stream to split, train on and evaluate",
    )
    source.add_argument(
        "--checkpoint",
        type=Path,
        help="Trained checkpoint to evaluate against --holdout",
    )

    parser.add_argument(
        "--holdout",
        type=Path,
        default=None,
        help="user<TAB>item lines held out from the checkpoint's training data",
    )
    parser.add_argument(
        "--ratios",
        type=float,
        nargs="+",
        default=None,
        help="Train one model per censoring ratio r (with --input)",
    )
    parser.add_argument(
        "--write-split",
        type=Path,
        default=None,
        help="Directory for train.tsv and holdout.tsv of the split (with --input)",
    )
    parser.add_argument(
        "--report",
        type=Path,
        required=True,
        help="TSV report to write",
    )

    add_model_args(parser)
    add_run_args(parser)
    add_logging_args(parser)
    return parser.parse_args(argv)


def _read_holdout(path: Path, users: IdMap, items: IdMap) -> dict[int, int]:
    heldout: dict[int, int] = {}
    skipped = 0
    with path.open("r", encoding="utf-8") as f:
        for record in parse_pair_lines(f):
            user, item = record[0], record[1]
            # users or items seen only in the holdout never reached the model
            if user not in users or item not in items:
                skipped += 1
                continue
            heldout[users.index(user)] = items.index(item)

    if skipped:
        log.warning("Skipped %d holdout pairs unknown to the checkpoint", skipped)
    return heldout


def _write_split(
    directory: Path,
    train_counts: PairCounts,
    heldout: dict[int, int],
    users: IdMap,
    items: IdMap,
) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_pair_stream(directory / "train.tsv", train_counts, users, items)

    with (directory / "holdout.tsv").open("w", encoding="utf-8") as f:
        f.write("# user\titem\n")
        for i in sorted(heldout):
            f.write(f"{users.key(i)}\t{items.key(heldout[i])}\n")

    log.info("Split written to %s", directory)


def _evaluate_checkpoint(args) -> list:
    if args.holdout is None:
        raise ContractViolation("--checkpoint needs --holdout")

    state, users, items = load_checkpoint(args.checkpoint)
    heldout = _read_holdout(args.holdout, users, items)

    # activity counts the held-out observation too
    activity = state.counts.user_totals.copy()
    np.add.at(activity, list(heldout), 1)

    return [
        evaluate_state(state, state.counts, heldout, activity),
        evaluate_popularity(state.counts, heldout, activity),
    ]


def _evaluate_input(args, hyper, config) -> list:
    counts, users, items = read_pair_stream(args.input)

    if args.ratios:
        return run_ratio_sweep(counts, args.ratios, hyper, config)

    train_counts, heldout = heldout_split(counts, config.seed)
    if args.write_split is not None:
        _write_split(args.write_split, train_counts, heldout, users, items)

    state, _ = train(train_counts, hyper, config)
    activity = counts.user_totals
    return [
        evaluate_state(state, train_counts, heldout, activity),
        evaluate_popularity(train_counts, heldout, activity),
    ]


def _run(args) -> None:
    hyper, config = resolve_config(args)
    log_resolved(
        "Evaluation",
        {
            "input": args.input,
            "checkpoint": args.checkpoint,
            "holdout": args.holdout,
            "ratios": args.ratios,
            "report": args.report,
            **hyper.describe(),
            **config.describe(),
        },
    )

    if args.checkpoint is not None:
        reports = _evaluate_checkpoint(args)
    else:
        reports = _evaluate_input(args, hyper, config)

    for report in reports:
        log.info("%s", " | ".join(f"{k}={v}" for k, v in report.describe().items()))

    write_report(args.report, reports)


def main(argv=None) -> int:
    return run_command(_run, parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(main())
