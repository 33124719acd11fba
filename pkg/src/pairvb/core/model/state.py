from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.special import digamma

from pairvb.core.data import PairCounts
from pairvb.core.model.hyper import Hyperparams
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

Side = Literal["user", "item"]

SIMPLEX_TOL = 1e-12


# =============================================================================
# Factors
# =============================================================================

@dataclass(frozen=True, eq=False)
class GaussianTraitFactor:
    """Fully factorized q(u_i): independent N(mu_k, 1/prec_k) per dimension."""

    mu: np.ndarray
    prec: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        prec = np.asarray(self.prec, dtype=np.float64)

        if mu.shape != prec.shape or mu.ndim != 1:
            raise ValueError("mu and prec must be K-vectors of equal length")
        if not np.all(prec > 0):
            raise ValueError("Trait precisions must be positive")

        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "prec", prec)

    @property
    def var(self) -> np.ndarray:
        return 1.0 / self.prec

    def second_moment(self) -> np.ndarray:
        """E[u u^T] = mu mu^T + diag(var)."""
        return np.outer(self.mu, self.mu) + np.diag(self.var)


@dataclass(frozen=True)
class BiasFactor:
    mean: float
    prec: float

    def __post_init__(self):
        if not self.prec > 0:
            raise ValueError(f"Bias precision must be positive, got {self.prec}")

    @property
    def var(self) -> float:
        return 1.0 / self.prec

    @property
    def second(self) -> float:
        return self.mean * self.mean + self.var


@dataclass(frozen=True, eq=False)
class DirichletFactor:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("Dirichlet parameters must be a non-empty vector")
        if not np.all(alpha > 0):
            raise ValueError("Dirichlet parameters must be positive")
        object.__setattr__(self, "alpha", alpha)

    def expected_log(self) -> np.ndarray:
        """E[log pi_i] = digamma(alpha_i) - digamma(sum alpha)."""
        return digamma(self.alpha) - digamma(self.alpha.sum())

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()


@dataclass(frozen=True, eq=False)
class TiedCategorical:
    """The shared parameters s and t of all censored-pair factors."""

    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("s", "t"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.ndim != 1 or v.size == 0:
                raise ValueError(f"{name} must be a non-empty vector")
            if np.any(v < 0):
                raise ValueError(f"{name} has negative entries")
            if abs(v.sum() - 1.0) > SIMPLEX_TOL:
                raise ValueError(
                    f"{name} must sum to one, off by {v.sum() - 1.0:.3e}"
                )
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls, n_users: int, n_items: int) -> TiedCategorical:
        return cls(
            s=np.full(n_users, 1.0 / n_users),
            t=np.full(n_items, 1.0 / n_items),
        )


# =============================================================================
# Per-side factor storage
# =============================================================================

@dataclass(eq=False)
class EntityFactors:
    """
    Trait and bias factors of every user (or every item), stored as arrays.

    Row ``i`` of ``mu``/``prec`` and entry ``i`` of the bias arrays form
    the (GaussianTraitFactor, BiasFactor) pair of entity ``i``.
    """

    mu: np.ndarray          # (n, K)
    prec: np.ndarray        # (n, K)
    bias_mean: np.ndarray   # (n,)
    bias_prec: np.ndarray   # (n,)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.prec = np.asarray(self.prec, dtype=np.float64)
        self.bias_mean = np.asarray(self.bias_mean, dtype=np.float64)
        self.bias_prec = np.asarray(self.bias_prec, dtype=np.float64)

        n, k = self.mu.shape
        if self.prec.shape != (n, k):
            raise ValueError("prec must match mu's shape")
        if self.bias_mean.shape != (n,) or self.bias_prec.shape != (n,):
            raise ValueError("bias arrays must have one entry per entity")

    @classmethod
    def from_prior(
        cls,
        n: int,
        k: int,
        tau: float,
        tau_b: float,
        rng: np.random.Generator,
        init_std: float,
    ) -> EntityFactors:
        return cls(
            mu=rng.normal(0.0, init_std, size=(n, k)),
            prec=np.full((n, k), tau),
            bias_mean=np.zeros(n),
            bias_prec=np.full(n, tau_b),
        )

    @property
    def size(self) -> int:
        return self.mu.shape[0]

    @property
    def var(self) -> np.ndarray:
        return 1.0 / self.prec

    @property
    def bias_var(self) -> np.ndarray:
        return 1.0 / self.bias_prec

    @property
    def bias_second(self) -> np.ndarray:
        return self.bias_mean**2 + self.bias_var

    # Row accessors touch only the requested rows; per-entity updates must
    # not pay for the whole side.

    def var_at(self, idx) -> np.ndarray:
        return 1.0 / self.prec[idx]

    def bias_var_at(self, idx):
        return 1.0 / self.bias_prec[idx]

    def bias_second_at(self, idx):
        return self.bias_mean[idx] ** 2 + 1.0 / self.bias_prec[idx]

    def trait(self, i: int) -> GaussianTraitFactor:
        return GaussianTraitFactor(self.mu[i].copy(), self.prec[i].copy())

    def bias(self, i: int) -> BiasFactor:
        return BiasFactor(float(self.bias_mean[i]), float(self.bias_prec[i]))

    def set_trait(self, i: int, factor: GaussianTraitFactor) -> None:
        self.mu[i] = factor.mu
        self.prec[i] = factor.prec

    def set_bias(self, i: int, factor: BiasFactor) -> None:
        self.bias_mean[i] = factor.mean
        self.bias_prec[i] = factor.prec

    def copy(self) -> EntityFactors:
        return EntityFactors(
            self.mu.copy(),
            self.prec.copy(),
            self.bias_mean.copy(),
            self.bias_prec.copy(),
        )


@dataclass(frozen=True, eq=False)
class SideView:
    """
    One side of the model seen from its own entities.

    The user and item updates mirror each other; every update is written
    once against this view.
    """

    name: str
    own: EntityFactors
    other: EntityFactors
    own_weights: np.ndarray    # s for users, t for items
    other_weights: np.ndarray
    tau: float
    adjacency: Callable[[int], tuple[np.ndarray, np.ndarray]]
    totals: np.ndarray         # c_i or c_j
    dirichlet: DirichletFactor


# =============================================================================
# Model state
# =============================================================================

@dataclass(eq=False)
class ModelState:
    counts: PairCounts
    hyper: Hyperparams
    users: EntityFactors
    items: EntityFactors
    dir_pi: DirichletFactor
    dir_psi: DirichletFactor
    cat: TiedCategorical
    xi_star: float = 1.0
    n_censored: int = field(default=-1)

    def __post_init__(self):
        if self.n_censored < 0:
            self.n_censored = self.hyper.n_censored(self.counts.total)
        self.validate()

    # --------------------------------------------------------------------------
    # Shape helpers
    # --------------------------------------------------------------------------

    @property
    def n_users(self) -> int:
        return self.counts.n_users

    @property
    def n_items(self) -> int:
        return self.counts.n_items

    @property
    def k(self) -> int:
        return self.hyper.k

    def view(self, side: Side) -> SideView:
        if side == "user":
            return SideView(
                name="user",
                own=self.users,
                other=self.items,
                own_weights=self.cat.s,
                other_weights=self.cat.t,
                tau=self.hyper.tau_u,
                adjacency=self.counts.row,
                totals=self.counts.user_totals,
                dirichlet=self.dir_pi,
            )
        if side == "item":
            return SideView(
                name="item",
                own=self.items,
                other=self.users,
                own_weights=self.cat.t,
                other_weights=self.cat.s,
                tau=self.hyper.tau_v,
                adjacency=self.counts.col,
                totals=self.counts.item_totals,
                dirichlet=self.dir_psi,
            )
        raise ValueError(f"Unknown side {side!r}")

    # --------------------------------------------------------------------------
    # Lifecycle
    # --------------------------------------------------------------------------

    def validate(self) -> None:
        I, J, K = self.n_users, self.n_items, self.k

        if self.users.mu.shape != (I, K):
            raise ValueError(f"user factors must be {I}x{K}")
        if self.items.mu.shape != (J, K):
            raise ValueError(f"item factors must be {J}x{K}")
        if self.dir_pi.alpha.shape != (I,) or self.dir_psi.alpha.shape != (J,):
            raise ValueError("Dirichlet sizes do not match the counts")
        if self.cat.s.shape != (I,) or self.cat.t.shape != (J,):
            raise ValueError("Categorical sizes do not match the counts")
        if not self.xi_star >= 0:
            raise ValueError(f"xi_star must be nonnegative, got {self.xi_star}")
        for side in (self.users, self.items):
            if not (np.all(side.prec > 0) and np.all(side.bias_prec > 0)):
                raise ValueError("All precisions must be positive")

    def copy(self) -> ModelState:
        return ModelState(
            counts=self.counts,
            hyper=self.hyper,
            users=self.users.copy(),
            items=self.items.copy(),
            dir_pi=DirichletFactor(self.dir_pi.alpha.copy()),
            dir_psi=DirichletFactor(self.dir_psi.alpha.copy()),
            cat=TiedCategorical(self.cat.s.copy(), self.cat.t.copy()),
            xi_star=self.xi_star,
            n_censored=self.n_censored,
        )

    def describe(self) -> dict:
        return {
            **self.counts.describe(),
            "k": self.k,
            "censored": self.n_censored,
            "xi_star": self.xi_star,
        }


def init_state(counts: PairCounts, hyper: Hyperparams, seed: int) -> ModelState:
    """
    Initial state: xi* = 1, uniform s and t, prior precisions, small random
    trait means, zero bias means and prior Dirichlet parameters.
    """
    rng = np.random.default_rng(seed)
    I, J, K = counts.n_users, counts.n_items, hyper.k

    users = EntityFactors.from_prior(
        I, K, hyper.tau_u, hyper.tau_b, rng, hyper.init_std
    )
    items = EntityFactors.from_prior(
        J, K, hyper.tau_v, hyper.tau_b, rng, hyper.init_std
    )

    state = ModelState(
        counts=counts,
        hyper=hyper,
        users=users,
        items=items,
        dir_pi=DirichletFactor(np.full(I, hyper.alpha0)),
        dir_psi=DirichletFactor(np.full(J, hyper.beta0)),
        cat=TiedCategorical.uniform(I, J),
        xi_star=1.0,
    )
    log.debug("Initialized state: %s", state.describe())
    return state
