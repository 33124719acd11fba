"""
Variational lower bound.

The bound is evaluated as E_q[log p(D, theta)] - E_q[log q(theta)], with
observed pairs at their local optimal xi_ij and every other pair at the
shared xi*. The censored block reuses the cache decomposition of the
categorical updates, so evaluation costs the same as a sweep.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import entr, gammaln, log_expit

from pairvb.core.model import DirichletFactor, EntityFactors, ModelState
from pairvb.engines.caches import build_item_background
from pairvb.engines.updates import expected_omega, graph_moments


@dataclass(frozen=True)
class ElboBreakdown:
    observed_lik: float
    censored_lik: float
    categorical_cross: float
    prior_terms: float
    entropy_terms: float

    @property
    def total(self) -> float:
        return (
            self.observed_lik
            + self.censored_lik
            + self.categorical_cross
            + self.prior_terms
            + self.entropy_terms
        )

    def describe(self) -> dict[str, float]:
        return {**asdict(self), "total": self.total}


# =============================================================================
# Closed-form pieces
# =============================================================================

def _log_beta(alpha: np.ndarray) -> float:
    return float(np.sum(gammaln(alpha)) - gammaln(np.sum(alpha)))


def dirichlet_prior_term(q: DirichletFactor, concentration: float) -> float:
    """E_q[log Dir(pi; concentration)]."""
    n = q.alpha.size
    return float(
        -_log_beta(np.full(n, concentration))
        + (concentration - 1.0) * np.sum(q.expected_log())
    )


def dirichlet_entropy(q: DirichletFactor) -> float:
    return float(_log_beta(q.alpha) - np.sum((q.alpha - 1.0) * q.expected_log()))


def gaussian_prior_term(mean: np.ndarray, prec: np.ndarray, tau: float) -> float:
    """sum of E_q[log N(x; 0, 1/tau)] over independent Gaussian factors."""
    return float(
        np.sum(0.5 * np.log(tau / (2.0 * np.pi)) - 0.5 * tau * (mean**2 + 1.0 / prec))
    )


def gaussian_entropy(prec: np.ndarray) -> float:
    return float(np.sum(0.5 * np.log(2.0 * np.pi * np.e / prec)))


def _side_prior(factors: EntityFactors, tau: float, tau_b: float) -> float:
    return gaussian_prior_term(factors.mu, factors.prec, tau) + gaussian_prior_term(
        factors.bias_mean, factors.bias_prec, tau_b
    )


def _side_entropy(factors: EntityFactors) -> float:
    return gaussian_entropy(factors.prec) + gaussian_entropy(factors.bias_prec)


# =============================================================================
# Bound
# =============================================================================

def compute_elbo(
    state: ModelState,
    executor: Executor | None = None,
    partitions: int = 1,
    deterministic: bool = True,
) -> ElboBreakdown:
    hyper = state.hyper
    d_prime = float(state.n_censored)
    s, t = state.cat.s, state.cat.t

    # --- observed pairs, bound tight at xi_ij ---
    _, _, counts, mean, second = graph_moments(state)
    xi = np.sqrt(second)
    observed = float(counts @ (log_expit(xi) + 0.5 * mean - 0.5 * xi))

    # --- censored stream ---
    item_cache = build_item_background(
        state, executor=executor, partitions=partitions, deterministic=deterministic
    )
    omega = expected_omega(state, item_cache, "user", fixed_energy=False)
    censored = d_prime * float(s @ omega)

    # --- selection pseudo-counts ---
    e_log_pi = state.dir_pi.expected_log()
    e_log_psi = state.dir_psi.expected_log()
    cross = float(
        (state.counts.user_totals + d_prime * s) @ e_log_pi
        + (state.counts.item_totals + d_prime * t) @ e_log_psi
    )

    prior = (
        _side_prior(state.users, hyper.tau_u, hyper.tau_b)
        + _side_prior(state.items, hyper.tau_v, hyper.tau_b)
        + dirichlet_prior_term(state.dir_pi, hyper.alpha0)
        + dirichlet_prior_term(state.dir_psi, hyper.beta0)
    )

    entropy = (
        _side_entropy(state.users)
        + _side_entropy(state.items)
        + dirichlet_entropy(state.dir_pi)
        + dirichlet_entropy(state.dir_psi)
        + d_prime * float(np.sum(entr(s)) + np.sum(entr(t)))
    )

    return ElboBreakdown(
        observed_lik=observed,
        censored_lik=censored,
        categorical_cross=cross,
        prior_terms=prior,
        entropy_terms=entropy,
    )
