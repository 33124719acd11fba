from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from pairvb.core.data import PairCounts
from pairvb.core.model import Hyperparams, ModelState, init_state
from pairvb.engines.sweep import SweepEngine
from pairvb.utils.logging import get_logger

from .status import TrainingStatus
from .train_config import TrainConfig

log = get_logger(__name__)


@dataclass(frozen=True)
class SweepRecord:
    index: int
    elbo: float
    elapsed_s: float
    phases: dict[str, float] = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "sweep": self.index,
            "elbo": self.elbo,
            "elapsed_s": self.elapsed_s,
            **{f"t_{k}": v for k, v in self.phases.items()},
        }


class TrainingRunner:
    """
    Runs sweeps until the sweep budget is spent or the relative ELBO
    change drops below ``config.tol``.
    """

    def __init__(
        self,
        config: TrainConfig,
        on_sweep: Callable[[SweepRecord], None] | None = None,
    ):
        self.config = config
        self.on_sweep = on_sweep
        self.history: list[SweepRecord] = []
        self.status = TrainingStatus.IDLE
        self._abort = False

    def abort(self) -> None:
        """
        Request cooperative abortion after the current sweep.
        """
        self._abort = True

    def _set_status(self, status: TrainingStatus) -> None:
        if self.status == status:
            return
        log.debug("Training status: %s -> %s", self.status, status)
        self.status = status

    def run(self, state: ModelState) -> ModelState:
        """Train ``state`` in place and return it."""
        cfg = self.config
        n_sweeps = cfg.resolve_sweeps(state.hyper.sweeps)

        self.history = []
        self._abort = False
        self._set_status(TrainingStatus.RUNNING)
        log.info("=== Training started: %d sweeps ===", n_sweeps)

        with SweepEngine(threads=cfg.threads, deterministic=cfg.deterministic) as engine:
            previous = engine.elbo(state).total
            log.info("Initial ELBO %.10g", previous)

            for index in range(1, n_sweeps + 1):
                if self._abort:
                    self._set_status(TrainingStatus.ABORTED)
                    log.warning("Training aborted before sweep %d", index)
                    return state

                t0 = time.perf_counter()
                phases = engine.run(state)
                elbo = engine.elbo(state).total
                record = SweepRecord(
                    index=index,
                    elbo=elbo,
                    elapsed_s=time.perf_counter() - t0,
                    phases=phases,
                )
                self.history.append(record)

                log.info(
                    "Sweep %d | ELBO %.10g | %.3f s (users %.3f s, items %.3f s)",
                    index,
                    elbo,
                    record.elapsed_s,
                    phases.get("users", 0.0),
                    phases.get("items", 0.0),
                )
                if self.on_sweep is not None:
                    self.on_sweep(record)

                change = abs(elbo - previous) / max(abs(previous), 1e-300)
                previous = elbo
                if cfg.tol > 0 and change < cfg.tol:
                    log.warning(
                        "Relative ELBO change %.3e below tol %.3e after sweep %d",
                        change,
                        cfg.tol,
                        index,
                    )
                    self._set_status(TrainingStatus.CONVERGED)
                    break
            else:
                self._set_status(TrainingStatus.FINISHED)

        log.info("=== Training finished (%s) ===", self.status.name)
        return state


def train(
    counts: PairCounts,
    hyper: Hyperparams,
    config: TrainConfig,
    on_sweep: Callable[[SweepRecord], None] | None = None,
) -> tuple[ModelState, list[SweepRecord]]:
    """Initialize from ``config.seed`` and train."""
    runner = TrainingRunner(config, on_sweep=on_sweep)
    state = runner.run(init_state(counts, hyper, config.seed))
    return state, runner.history
