from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from pairvb.core.errors import SimulationBudgetError
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Parameters of the generative process."""

    U: np.ndarray           # (I, K)
    V: np.ndarray           # (J, K)
    user_bias: np.ndarray   # (I,)
    item_bias: np.ndarray   # (J,)
    pi: np.ndarray          # (I,) selection weights of users
    psi: np.ndarray         # (J,) selection weights of items

    def __post_init__(self):
        for name in ("U", "V", "user_bias", "item_bias", "pi", "psi"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.float64)
            )

        I, K = self.U.shape
        J = self.V.shape[0]

        if self.V.shape != (J, K):
            raise ValueError("U and V must share the latent dimension")
        if self.user_bias.shape != (I,) or self.pi.shape != (I,):
            raise ValueError("user arrays must have I entries")
        if self.item_bias.shape != (J,) or self.psi.shape != (J,):
            raise ValueError("item arrays must have J entries")

        for name in ("pi", "psi"):
            p = getattr(self, name)
            if np.any(p < 0) or abs(p.sum() - 1.0) > _SIMPLEX_TOL:
                raise ValueError(f"{name} must lie on the simplex")

    @property
    def n_users(self) -> int:
        return self.U.shape[0]

    @property
    def n_items(self) -> int:
        return self.V.shape[0]

    @property
    def k(self) -> int:
        return self.U.shape[1]

    def energy(self, i, j) -> np.ndarray:
        """a_ij = u_i^T v_j + b_i + b_j, vectorized over index arrays."""
        return (
            np.sum(self.U[i] * self.V[j], axis=-1)
            + self.user_bias[i]
            + self.item_bias[j]
        )


def sample_ground_truth(
    n_users: int,
    n_items: int,
    k: int,
    seed: int,
    alpha: float = 1.0,
    beta: float = 1.0,
    tau_u: float = 1.0,
    tau_v: float = 1.0,
    tau_b: float = 1.0,
) -> GroundTruth:
    """Draw a GroundTruth from the model's own priors."""
    rng = np.random.default_rng(seed)
    return GroundTruth(
        U=rng.normal(0.0, 1.0 / np.sqrt(tau_u), size=(n_users, k)),
        V=rng.normal(0.0, 1.0 / np.sqrt(tau_v), size=(n_items, k)),
        user_bias=rng.normal(0.0, 1.0 / np.sqrt(tau_b), size=n_users),
        item_bias=rng.normal(0.0, 1.0 / np.sqrt(tau_b), size=n_items),
        pi=rng.dirichlet(np.full(n_users, alpha)),
        psi=rng.dirichlet(np.full(n_items, beta)),
    )


@dataclass(frozen=True, eq=False)
class SimulationResult:
    users: np.ndarray   # accepted user indices, in draw order
    items: np.ndarray   # accepted item indices, in draw order
    accepted: int
    rejected: int

    def records(self, user_prefix: str = "u", item_prefix: str = "v"):
        """Pair-stream records keyed by ``<prefix><index>``."""
        for i, j in zip(self.users, self.items):
            yield f"{user_prefix}{int(i)}", f"{item_prefix}{int(j)}"

    def describe(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected}


def simulate(
    truth: GroundTruth,
    target_observed: int,
    seed: int,
    max_draws: int | None = None,
    batch_size: int = 65_536,
) -> SimulationResult:
    """
    Select-then-censor: draw i ~ pi and j ~ psi, keep the pair with
    probability sigma(a_ij), until ``target_observed`` pairs are kept.

    ``rejected`` counts the censored draws that preceded the last kept one.
    """
    if target_observed < 1:
        raise ValueError(f"target_observed must be >= 1, got {target_observed}")

    if max_draws is None:
        max_draws = max(100_000_000, 1_000 * target_observed)

    rng = np.random.default_rng(seed)
    users: list[np.ndarray] = []
    items: list[np.ndarray] = []
    accepted = rejected = draws = 0

    while accepted < target_observed:
        if draws >= max_draws:
            raise SimulationBudgetError(
                f"only {accepted} of {target_observed} pairs observed "
                f"after {draws} draws"
            )

        n = min(batch_size, max_draws - draws)
        i = rng.choice(truth.n_users, size=n, p=truth.pi)
        j = rng.choice(truth.n_items, size=n, p=truth.psi)
        keep = rng.random(n) < expit(truth.energy(i, j))

        need = target_observed - accepted
        hits = np.flatnonzero(keep)
        if hits.size >= need:
            last = hits[need - 1]
            hits = hits[:need]
            rejected += int(last + 1 - need)
            draws += int(last + 1)
        else:
            rejected += int(n - hits.size)
            draws += n

        users.append(i[hits])
        items.append(j[hits])
        accepted += int(hits.size)

    log.info(
        "Simulated %d observed pairs with %d censored draws", accepted, rejected
    )
    return SimulationResult(
        users=np.concatenate(users),
        items=np.concatenate(items),
        accepted=accepted,
        rejected=rejected,
    )


def write_simulated_stream(path, result: SimulationResult) -> None:
    """One line per observed pair, in draw order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf-8") as f:
        f.write("# user\titem\n")
        for user, item in result.records():
            f.write(f"{user}\t{item}\n")
