"""
Negative-background caches.

Weighted rollups of one side's factors. The item background (weights t)
feeds every user update; the user background (weights s) feeds every item
update. Together they replace the O(IJ) sums over censored pairs.
"""

from __future__ import annotations

from concurrent.futures import Executor, as_completed
from dataclasses import dataclass
from typing import Literal

import numpy as np

from pairvb.core.model import EntityFactors, ModelState
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class BackgroundCache:
    """
    P        = sum_n w_n E[x_n x_n^T]
    m_dagger = sum_n w_n E[b_n] E[x_n]
    m_ddagger= sum_n w_n E[x_n]
    nu       = sum_n w_n E[b_n]
    kappa    = sum_n w_n E[b_n^2]
    """

    P: np.ndarray
    m_dagger: np.ndarray
    m_ddagger: np.ndarray
    nu: float
    kappa: float
    side: Literal["item", "user"]

    def __add__(self, other: BackgroundCache) -> BackgroundCache:
        return BackgroundCache(
            P=self.P + other.P,
            m_dagger=self.m_dagger + other.m_dagger,
            m_ddagger=self.m_ddagger + other.m_ddagger,
            nu=self.nu + other.nu,
            kappa=self.kappa + other.kappa,
            side=self.side,
        )


def _partial_cache(
    factors: EntityFactors,
    weights: np.ndarray,
    lo: int,
    hi: int,
    side: str,
) -> BackgroundCache:
    w = weights[lo:hi]
    mu = factors.mu[lo:hi]
    var = factors.var_at(slice(lo, hi))
    bm = factors.bias_mean[lo:hi]
    b2 = factors.bias_second_at(slice(lo, hi))

    P = (mu.T * w) @ mu
    P[np.diag_indices_from(P)] += w @ var
    P = 0.5 * (P + P.T)

    return BackgroundCache(
        P=P,
        m_dagger=(w * bm) @ mu,
        m_ddagger=w @ mu,
        nu=float(w @ bm),
        kappa=float(w @ b2),
        side=side,
    )


def _build(
    factors: EntityFactors,
    weights: np.ndarray,
    side: str,
    executor: Executor | None,
    partitions: int,
    deterministic: bool,
) -> BackgroundCache:
    n = factors.size

    if executor is None or partitions <= 1 or n < 2 * partitions:
        return _partial_cache(factors, weights, 0, n, side)

    bounds = np.linspace(0, n, partitions + 1).astype(int)
    futures = [
        executor.submit(_partial_cache, factors, weights, lo, hi, side)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]

    # fixed partition order keeps the floating-point sum reproducible
    ordered = futures if deterministic else as_completed(futures)
    cache = None
    for future in ordered:
        part = future.result()
        cache = part if cache is None else cache + part
    return cache


def build_item_background(
    state: ModelState,
    executor: Executor | None = None,
    partitions: int = 1,
    deterministic: bool = True,
) -> BackgroundCache:
    """Item background, weighted by t."""
    return _build(
        state.items, state.cat.t, "item", executor, partitions, deterministic
    )


def build_user_background(
    state: ModelState,
    executor: Executor | None = None,
    partitions: int = 1,
    deterministic: bool = True,
) -> BackgroundCache:
    """User background, weighted by s."""
    return _build(
        state.users, state.cat.s, "user", executor, partitions, deterministic
    )


def build_background(state: ModelState, side: str, **kwargs) -> BackgroundCache:
    """Background of the *other* side, as seen by updates on ``side``."""
    if side == "user":
        return build_item_background(state, **kwargs)
    return build_user_background(state, **kwargs)


def full_second_moment(
    user_cache: BackgroundCache, item_cache: BackgroundCache
) -> float:
    """sum_ij s_i t_j E[a_ij^2] from the two background caches."""
    return float(
        np.sum(user_cache.P * item_cache.P)  # tr(P_user P_item), both symmetric
        + 2.0 * user_cache.m_ddagger @ item_cache.m_dagger
        + 2.0 * user_cache.m_dagger @ item_cache.m_ddagger
        + 2.0 * user_cache.nu * item_cache.nu
        + user_cache.kappa
        + item_cache.kappa
    )
