from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainConfig:
    """
    Definition of a training run.

    Holds run-level options only; model hyperparameters live in
    Hyperparams. ``sweeps=None`` defers to ``Hyperparams.sweeps``.
    """

    sweeps: int | None = None
    tol: float = 0.0
    seed: int = 0
    threads: int = 1
    deterministic: bool = True

    def __post_init__(self):
        if self.sweeps is not None and self.sweeps < 0:
            raise ValueError(f"sweeps must be >= 0, got {self.sweeps}")

        if not self.tol >= 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")

        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def resolve_sweeps(self, default: int) -> int:
        return default if self.sweeps is None else self.sweeps

    def describe(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "tol": self.tol,
            "seed": self.seed,
            "threads": self.threads,
            "deterministic": self.deterministic,
        }
