"""
Prediction and held-out ranking.

A scorer maps a user index to a score for every item. The rank of a
held-out item is the fraction of the user's unobserved items it strictly
beats; ties count against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
import pandas as pd

from pairvb.core.data import PairCounts
from pairvb.core.errors import ContractViolation
from pairvb.core.model import ModelState
from pairvb.engines.bounds import energy_moment_arrays, energy_moments, mackay_probability
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

Scorer = Callable[[int], np.ndarray]

DECILES = np.linspace(0.1, 0.9, 9)


# =============================================================================
# Prediction
# =============================================================================

def score(i: int, j: int, state: ModelState) -> float:
    """sigma(x_ij) E[psi_j]."""
    moments = energy_moments(i, j, state)
    return float(
        mackay_probability(moments.mean, moments.variance) * state.dir_psi.mean()[j]
    )


def acceptance_probabilities(i: int, state: ModelState) -> np.ndarray:
    """sigma(x_ij) for every item j."""
    u, v = state.users, state.items
    mean, _, variance = energy_moment_arrays(
        u.mu[i], u.var_at(i), u.bias_mean[i], u.bias_var_at(i),
        v.mu, v.var, v.bias_mean, v.bias_var,
    )
    return mackay_probability(mean, variance)


def score_items(i: int, state: ModelState) -> np.ndarray:
    return acceptance_probabilities(i, state) * state.dir_psi.mean()


def predict_conditional(i: int, state: ModelState) -> np.ndarray:
    """p(j | i) over all items."""
    scores = score_items(i, state)
    return scores / scores.sum()


def model_scorer(state: ModelState) -> Scorer:
    return lambda i: score_items(i, state)


def popularity_scorer(counts: PairCounts) -> Scorer:
    """f_ij = c_j for every user."""
    popularity = counts.item_totals.astype(np.float64)
    return lambda i: popularity


# =============================================================================
# Held-out protocol
# =============================================================================

def heldout_split(counts: PairCounts, seed: int) -> tuple[PairCounts, dict[int, int]]:
    """
    Hold out one uniformly chosen observation per user.

    The occurrence is drawn over the user's c_i observations, so items
    seen more often are held out proportionally more often. The whole
    pair then leaves the training row, because a held-out item must lie
    outside G(i) to be ranked. Decrementing c_ij by one would leave a
    repeated pair in G(i). D therefore drops by the held-out pairs'
    counts, which equals the number of evaluated users only when every
    held-out pair was seen once.
    """
    rng = np.random.default_rng(seed)
    matrix = counts.matrix.copy()
    heldout: dict[int, int] = {}

    for i in range(counts.n_users):
        lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
        row_counts = matrix.data[lo:hi]
        total = int(row_counts.sum())
        if total == 0:
            continue

        pick = int(rng.integers(total))
        offset = int(np.searchsorted(np.cumsum(row_counts), pick, side="right"))
        heldout[i] = int(matrix.indices[lo + offset])
        matrix.data[lo + offset] = 0

    matrix.eliminate_zeros()
    coo = matrix.tocoo()
    train = PairCounts.from_triples(coo.row, coo.col, coo.data, counts.matrix.shape)

    log.info(
        "Held out %d pairs, %d observations remain for training",
        len(heldout),
        train.total,
    )
    return train, heldout


def heldout_rank(i: int, j_star: int, scorer: Scorer, train: PairCounts) -> float:
    observed, _ = train.row(i)
    if j_star in set(observed.tolist()):
        raise ContractViolation(f"held-out item {j_star} is in the training row of {i}")

    scores = np.asarray(scorer(i), dtype=np.float64)
    candidates = np.ones(train.n_items, dtype=bool)
    candidates[observed] = False

    return float(np.sum(scores[j_star] > scores[candidates]) / candidates.sum())


# =============================================================================
# Report
# =============================================================================

@dataclass(frozen=True)
class UserRank:
    user: int
    item: int
    rank: float
    activity: int
    sigma: float = float("nan")


def activity_bucket(c: int) -> int:
    """ceil(log2 c): 1 -> 0, 2 -> 1, 3-4 -> 2, 5-8 -> 3, ..."""
    if c < 1:
        raise ValueError(f"activity must be >= 1, got {c}")
    return int(c - 1).bit_length()


def bucket_label(bucket: int) -> str:
    if bucket == 0:
        return "1"
    if bucket == 1:
        return "2"
    return f"{2 ** (bucket - 1) + 1}-{2 ** bucket}"


@dataclass(eq=False)
class EvalReport:
    section: str
    per_user: list[UserRank]
    facets: pd.DataFrame = field(repr=False)
    overall: float

    def describe(self) -> dict:
        return {
            "section": self.section,
            "users": len(self.per_user),
            "mean_rank": self.overall,
        }

    def to_frame(self) -> pd.DataFrame:
        return self.facets.assign(section=self.section)[
            ["section", *self.facets.columns]
        ]


def rank_users(
    scorer: Scorer,
    train: PairCounts,
    heldout: Mapping[int, int],
    activity: np.ndarray,
    sigma: Callable[[int, int], float] | None = None,
) -> list[UserRank]:
    """Held-out rank of every user in ``heldout``, in user order."""
    out = []
    for i in sorted(heldout):
        j = heldout[i]
        out.append(
            UserRank(
                user=i,
                item=j,
                rank=heldout_rank(i, j, scorer, train),
                activity=int(activity[i]),
                sigma=float("nan") if sigma is None else float(sigma(i, j)),
            )
        )
    return out


def model_sigma(state: ModelState) -> Callable[[int, int], float]:
    def sigma(i: int, j: int) -> float:
        m = energy_moments(i, j, state)
        return float(mackay_probability(m.mean, m.variance))

    return sigma


def build_report(ranks: Iterable[UserRank], section: str = "model") -> EvalReport:
    ranks = list(ranks)
    if not ranks:
        raise ContractViolation("empty holdout: no users to evaluate")

    frame = pd.DataFrame(
        {
            "bucket": [activity_bucket(r.activity) for r in ranks],
            "rank": [r.rank for r in ranks],
            "sigma": [r.sigma for r in ranks],
        }
    )

    rows = []
    for bucket, group in frame.groupby("bucket", sort=True):
        row = {
            "bucket": bucket_label(int(bucket)),
            "n": int(len(group)),
            "mean_rank": float(group["rank"].mean()),
            "mean_sigma": float(group["sigma"].mean()),
        }
        quantiles = np.quantile(group["sigma"].to_numpy(), DECILES)
        for q, value in zip(DECILES, quantiles):
            row[f"sigma_q{int(round(q * 100)):02d}"] = float(value)
        rows.append(row)

    return EvalReport(
        section=section,
        per_user=ranks,
        facets=pd.DataFrame(rows),
        overall=float(frame["rank"].mean()),
    )


def write_report(path, reports: Iterable[EvalReport]) -> Path:
    """All sections in one TSV, one facet block per section."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    table = pd.concat([r.to_frame() for r in reports], ignore_index=True)
    table.to_csv(path, sep="\t", index=False, float_format="%.6g")

    log.info("Report written to %s", path)
    return path


def read_report(path) -> pd.DataFrame:
    return pd.read_csv(Path(path), sep="\t", dtype={"bucket": str})


def evaluate_state(
    state: ModelState,
    train: PairCounts,
    heldout: Mapping[int, int],
    activity: np.ndarray,
    section: str = "model",
) -> EvalReport:
    ranks = rank_users(
        model_scorer(state), train, heldout, activity, sigma=model_sigma(state)
    )
    report = build_report(ranks, section)
    log.info("Section %s: mean rank %.6f over %d users", section, report.overall, len(ranks))
    return report


def evaluate_popularity(
    train: PairCounts,
    heldout: Mapping[int, int],
    activity: np.ndarray,
) -> EvalReport:
    ranks = rank_users(popularity_scorer(train), train, heldout, activity)
    report = build_report(ranks, "popularity")
    log.info("Section popularity: mean rank %.6f", report.overall)
    return report
