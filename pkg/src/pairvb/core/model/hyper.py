from __future__ import annotations

from dataclasses import dataclass, asdict, fields
from typing import Any, Mapping

from pairvb.core.errors import ConfigError


HYPER_DEFAULTS: dict[str, Any] = {
    "k": 20,
    "ratio": 1.0,
    "tau_u": 1.0,
    "tau_v": 1.0,
    "tau_b": 1.0,
    "alpha0": 1.0,
    "beta0": 1.0,
    "sweeps": 50,
    "init_std": 0.1,
    "bulk_trait_update": True,
    "fixed_energy_categorical": False,
}


@dataclass(frozen=True)
class Hyperparams:
    """
    Model hyperparameters.

    ``ratio`` is r in D' = r * D; the censored stream length itself is
    derived from the data by :meth:`n_censored`.
    """

    k: int = HYPER_DEFAULTS["k"]
    ratio: float = HYPER_DEFAULTS["ratio"]
    tau_u: float = HYPER_DEFAULTS["tau_u"]
    tau_v: float = HYPER_DEFAULTS["tau_v"]
    tau_b: float = HYPER_DEFAULTS["tau_b"]
    alpha0: float = HYPER_DEFAULTS["alpha0"]
    beta0: float = HYPER_DEFAULTS["beta0"]
    sweeps: int = HYPER_DEFAULTS["sweeps"]
    init_std: float = HYPER_DEFAULTS["init_std"]
    bulk_trait_update: bool = HYPER_DEFAULTS["bulk_trait_update"]
    fixed_energy_categorical: bool = HYPER_DEFAULTS["fixed_energy_categorical"]

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")

        if not self.ratio >= 0:
            raise ValueError(f"ratio must be nonnegative, got {self.ratio}")

        for name in ("tau_u", "tau_v", "tau_b", "alpha0", "beta0"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")

        if int(self.sweeps) != self.sweeps or self.sweeps < 0:
            raise ValueError(f"sweeps must be >= 0, got {self.sweeps}")

        if not self.init_std >= 0:
            raise ValueError(f"init_std must be >= 0, got {self.init_std}")

    def n_censored(self, total: int) -> int:
        """D' = round(r * D), halves rounded up."""
        return int(self.ratio * total + 0.5)

    def describe(self) -> dict[str, Any]:
        return asdict(self)

    def replace(self, **changes: Any) -> Hyperparams:
        return Hyperparams.from_dict({**self.describe(), **changes})

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> Hyperparams:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(
                f"Unknown hyperparameter(s): {', '.join(sorted(unknown))}"
            )
        try:
            return cls(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
