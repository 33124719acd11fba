from __future__ import annotations

from typing import Iterable

from pairvb.core.data import PairCounts
from pairvb.core.model import Hyperparams
from pairvb.engines.evaluation import (
    EvalReport,
    evaluate_popularity,
    evaluate_state,
    heldout_split,
)
from pairvb.utils.logging import get_logger

from .runner import train
from .train_config import TrainConfig

log = get_logger(__name__)


def ratio_section(ratio: float) -> str:
    return f"r={ratio:g}"


def run_ratio_sweep(
    counts: PairCounts,
    ratios: Iterable[float],
    hyper: Hyperparams,
    config: TrainConfig,
    split_seed: int | None = None,
) -> list[EvalReport]:
    """
    One trained model per censoring ratio r on a shared held-out split,
    followed by the popularity baseline. Sections are named ``r=<value>``.
    """
    split_seed = config.seed if split_seed is None else split_seed
    train_counts, heldout = heldout_split(counts, split_seed)
    activity = counts.user_totals

    reports = []
    for ratio in ratios:
        log.info("--- Ratio sweep: r=%g ---", ratio)
        state, _ = train(train_counts, hyper.replace(ratio=ratio), config)
        reports.append(
            evaluate_state(state, train_counts, heldout, activity, ratio_section(ratio))
        )

    reports.append(evaluate_popularity(train_counts, heldout, activity))
    return reports
