from __future__ import annotations

import time
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import contextmanager
from typing import Iterator

import numpy as np

from pairvb.core.model import ModelState, TiedCategorical
from pairvb.engines.caches import build_item_background, build_user_background
from pairvb.engines.elbo import ElboBreakdown, compute_elbo
from pairvb.engines.updates import (
    update_bias,
    update_traits,
    update_categorical_s,
    update_categorical_t,
    update_dirichlet,
    update_shared_xi,
)
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

PHASES = (
    "dirichlet",
    "item_background",
    "s",
    "users",
    "user_background",
    "xi_star",
    "t",
    "items",
)


@contextmanager
def _timed(timings: dict[str, float], phase: str) -> Iterator[None]:
    t0 = time.perf_counter()
    yield
    timings[phase] = time.perf_counter() - t0
    log.debug("Phase %s took %.4f s", phase, timings[phase])


class SweepEngine:
    """
    Runs full coordinate-ascent sweeps over a ModelState in place.

    Phase A work (cache builds) is split into partitions reduced in fixed
    order when ``deterministic`` is set; phase B (per-entity bias and trait
    updates) writes disjoint rows and fans out over ``threads`` workers.
    """

    def __init__(self, threads: int = 1, deterministic: bool = True):
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")

        self._threads = threads
        self._deterministic = deterministic
        self._executor: Executor | None = None

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def __enter__(self) -> SweepEngine:
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def open(self) -> None:
        if self._threads > 1 and self._executor is None:
            self._executor = ThreadPoolExecutor(
                max_workers=self._threads, thread_name_prefix="pairvb"
            )

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    @property
    def _cache_kw(self) -> dict:
        return dict(
            executor=self._executor,
            partitions=self._threads,
            deterministic=self._deterministic,
        )

    def elbo(self, state: ModelState) -> ElboBreakdown:
        """The bound, with cache builds partitioned like the sweep's."""
        return compute_elbo(state, **self._cache_kw)

    def run(self, state: ModelState) -> dict[str, float]:
        """One sweep, mutating ``state``. Returns wall time per phase."""
        timings: dict[str, float] = {}
        cache_kw = self._cache_kw

        with _timed(timings, "dirichlet"):
            state.dir_pi, state.dir_psi = update_dirichlet(state)

        with _timed(timings, "item_background"):
            item_cache = build_item_background(state, **cache_kw)

        with _timed(timings, "s"):
            s = update_categorical_s(state, item_cache)
            state.cat = TiedCategorical(s, state.cat.t)

        with _timed(timings, "users"):
            self._update_side(state, item_cache, "user")

        with _timed(timings, "user_background"):
            user_cache = build_user_background(state, **cache_kw)

        with _timed(timings, "xi_star"):
            state.xi_star = update_shared_xi(state, user_cache, item_cache)

        with _timed(timings, "t"):
            t = update_categorical_t(state, user_cache)
            state.cat = TiedCategorical(state.cat.s, t)

        with _timed(timings, "items"):
            self._update_side(state, user_cache, "item")

        return timings

    # ------------------------------------------------------------------
    # Phase B
    # ------------------------------------------------------------------

    def _update_side(self, state: ModelState, cache, side: str) -> None:
        n = state.view(side).own.size

        if self._executor is None or n < 2 * self._threads:
            _update_range(state, cache, side, 0, n)
            return

        bounds = np.linspace(0, n, 4 * self._threads + 1).astype(int)
        futures = [
            self._executor.submit(_update_range, state, cache, side, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for future in futures:
            future.result()


def _update_range(state: ModelState, cache, side: str, lo: int, hi: int) -> None:
    own = state.view(side).own
    for idx in range(lo, hi):
        # bias first; the trait update reads the fresh bias mean
        own.set_bias(idx, update_bias(idx, state, cache, side))
        own.set_trait(idx, update_traits(idx, state, cache, side))


def sweep(
    state: ModelState,
    threads: int = 1,
    deterministic: bool = True,
) -> ModelState:
    """One full sweep on a copy of ``state``."""
    out = state.copy()
    with SweepEngine(threads=threads, deterministic=deterministic) as engine:
        engine.run(out)
    return out
