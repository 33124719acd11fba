"""
Coordinate-ascent updates.

Every update is a pure function of (entity, state, background cache) and
returns a new factor; the sweep driver decides when to write it back.
Sums run over observed pairs only: censored pairs enter through the
background cache of the other side plus a sparse correction on G(i),
where the local lambda_ij replaces the shared lambda*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import log_expit, softmax

from pairvb.core.errors import DegenerateMassError
from pairvb.core.model import (
    BiasFactor,
    DirichletFactor,
    GaussianTraitFactor,
    ModelState,
    SideView,
)
from pairvb.engines.bounds import energy_moment_arrays, lambda_of
from pairvb.engines.caches import BackgroundCache, full_second_moment
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

_Z_FLOOR = 1e-12
_XI_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class TraitNaturalParams:
    """Precision P_i and mean-times-precision m_i of the full-covariance q~."""

    P: np.ndarray
    m: np.ndarray

    def mean(self) -> np.ndarray:
        try:
            return cho_solve(cho_factor(self.P, lower=True), self.m)
        except LinAlgError as e:
            raise RuntimeError("Trait precision matrix is not positive definite") from e


@dataclass(frozen=True, eq=False)
class _Neighbours:
    """Observed partners of one entity with their energy moments."""

    index: np.ndarray
    count: np.ndarray
    lam: np.ndarray


def _neighbours(idx: int, view: SideView) -> _Neighbours:
    nbrs, counts = view.adjacency(idx)
    own, other = view.own, view.other

    _, second, _ = energy_moment_arrays(
        own.mu[idx], own.var_at(idx), own.bias_mean[idx], own.bias_var_at(idx),
        other.mu[nbrs], other.var_at(nbrs), other.bias_mean[nbrs], other.bias_var_at(nbrs),
    )
    # xi_ij = sqrt(E[a^2]) is computed here and dropped with the result
    lam = lambda_of(np.sqrt(second))
    return _Neighbours(index=nbrs, count=counts.astype(np.float64), lam=np.atleast_1d(lam))


# =============================================================================
# Gaussian trait updates
# =============================================================================

def trait_natural_params(
    idx: int,
    state: ModelState,
    cache: BackgroundCache,
    side: str = "user",
) -> TraitNaturalParams:
    view = state.view(side)
    own, other = view.own, view.other
    d_prime = float(state.n_censored)
    weight = view.own_weights[idx]
    lam_star = lambda_of(state.xi_star)
    K = state.k

    nb = _neighbours(idx, view)
    other_w = view.other_weights[nb.index]
    censored = weight * other_w * d_prime * 2.0 * (nb.lam - lam_star)

    w = nb.count * 2.0 * nb.lam + censored
    mu_o = other.mu[nb.index]
    var_o = other.var_at(nb.index)

    P = weight * d_prime * 2.0 * lam_star * cache.P + (mu_o.T * w) @ mu_o
    P[np.diag_indices(K)] += w @ var_o + view.tau
    P = 0.5 * (P + P.T)

    eb_own = own.bias_mean[idx]
    eb_sum = eb_own + other.bias_mean[nb.index]
    coef = nb.count * (0.5 - 2.0 * nb.lam * eb_sum) - censored * eb_sum

    m = weight * d_prime * (
        (-0.5 - 2.0 * lam_star * eb_own) * cache.m_ddagger
        - 2.0 * lam_star * cache.m_dagger
    ) + coef @ mu_o

    return TraitNaturalParams(P=P, m=m)


def update_traits(
    idx: int, state: ModelState, cache: BackgroundCache, side: str
) -> GaussianTraitFactor:
    params = trait_natural_params(idx, state, cache, side)
    P, m = params.P, params.m
    diag = np.diag(P).copy()

    if state.hyper.bulk_trait_update:
        # KL projection of N(P^-1 m, P^-1) onto a factorized Gaussian
        return GaussianTraitFactor(mu=params.mean(), prec=diag)

    mu = state.view(side).own.mu[idx].copy()
    for k in range(mu.size):
        mu[k] = (m[k] - P[k] @ mu + P[k, k] * mu[k]) / P[k, k]
    return GaussianTraitFactor(mu=mu, prec=diag)


def update_user_traits(
    i: int, state: ModelState, item_cache: BackgroundCache
) -> GaussianTraitFactor:
    return update_traits(i, state, item_cache, "user")


def update_item_traits(
    j: int, state: ModelState, user_cache: BackgroundCache
) -> GaussianTraitFactor:
    return update_traits(j, state, user_cache, "item")


def mean_gradient(
    idx: int,
    state: ModelState,
    cache: BackgroundCache,
    side: str = "user",
) -> np.ndarray:
    """
    Gradient of the bound with respect to the trait mean, m_i - P_i mu_i.

    With biases at zero this is
    1/2 (sum_G c_ij E[v_j] - D' s_i sum_j t_j E[v_j]) - P_i mu_i,
    the bilinear softmax gradient with s_i t_j standing in for the
    softmax weights. It vanishes right after a bulk trait update.
    """
    params = trait_natural_params(idx, state, cache, side)
    return params.m - params.P @ state.view(side).own.mu[idx]


# =============================================================================
# Bias updates
# =============================================================================

def bias_natural_params(
    idx: int,
    state: ModelState,
    cache: BackgroundCache,
    side: str = "user",
) -> tuple[float, float]:
    """(nu, rho): mean-times-precision and precision of q(b)."""
    view = state.view(side)
    own, other = view.own, view.other
    d_prime = float(state.n_censored)
    weight = view.own_weights[idx]
    lam_star = lambda_of(state.xi_star)

    nb = _neighbours(idx, view)
    other_w = view.other_weights[nb.index]
    censored = weight * other_w * d_prime * 2.0 * (nb.lam - lam_star)

    rho = (
        2.0 * lam_star * weight * d_prime
        + np.sum(nb.count * 2.0 * nb.lam + censored)
        + state.hyper.tau_b
    )

    energy = other.mu[nb.index] @ own.mu[idx] + other.bias_mean[nb.index]
    nu = weight * d_prime * (
        -0.5 - 2.0 * lam_star * (cache.nu + own.mu[idx] @ cache.m_ddagger)
    ) + np.sum(nb.count * (0.5 - 2.0 * nb.lam * energy) - censored * energy)

    return float(nu), float(rho)


def update_bias(
    idx: int, state: ModelState, cache: BackgroundCache, side: str
) -> BiasFactor:
    nu, rho = bias_natural_params(idx, state, cache, side)
    return BiasFactor(mean=nu / rho, prec=rho)


def update_user_bias(
    i: int, state: ModelState, item_cache: BackgroundCache
) -> BiasFactor:
    return update_bias(i, state, item_cache, "user")


def update_item_bias(
    j: int, state: ModelState, user_cache: BackgroundCache
) -> BiasFactor:
    return update_bias(j, state, user_cache, "item")


# =============================================================================
# Dirichlet updates
# =============================================================================

def update_dirichlet(state: ModelState) -> tuple[DirichletFactor, DirichletFactor]:
    """alpha_i = alpha0 + c_i + s_i D' and beta_j = beta0 + c_j + t_j D'."""
    d_prime = float(state.n_censored)
    counts = state.counts
    alpha = state.hyper.alpha0 + counts.user_totals + state.cat.s * d_prime
    beta = state.hyper.beta0 + counts.item_totals + state.cat.t * d_prime
    return DirichletFactor(alpha), DirichletFactor(beta)


# =============================================================================
# Categorical updates
# =============================================================================

def graph_moments(state: ModelState) -> tuple[np.ndarray, ...]:
    """(rows, cols, counts, mean, second) of the energy on every pair in G."""
    rows, cols, counts = state.counts.row_triples()
    u, v = state.users, state.items
    mean, second, _ = energy_moment_arrays(
        u.mu[rows], u.var_at(rows), u.bias_mean[rows], u.bias_var_at(rows),
        v.mu[cols], v.var_at(cols), v.bias_mean[cols], v.bias_var_at(cols),
    )
    return rows, cols, counts, mean, second


def expected_omega_background(
    state: ModelState, cache: BackgroundCache, side: str = "user"
) -> np.ndarray:
    """
    sum_j t_j Omega*_ij for every entity on ``side``, from the cache alone.

    Omega* is the expected bounded log(1 - sigma(a_ij)) at the shared xi*.
    """
    own = state.view(side).own
    xi = state.xi_star
    lam = lambda_of(xi)

    mu, var = own.mu, own.var
    bm, b2 = own.bias_mean, own.bias_second

    tr_uu_p = np.einsum("nk,kl,nl->n", mu, cache.P, mu) + var @ np.diag(cache.P)
    mu_mdd = mu @ cache.m_ddagger
    second = (
        tr_uu_p
        + 2.0 * bm * mu_mdd
        + 2.0 * mu @ cache.m_dagger
        + b2
        + 2.0 * bm * cache.nu
        + cache.kappa
    )
    first = mu_mdd + bm + cache.nu

    return -lam * second + log_expit(xi) + lam * xi * xi - 0.5 * xi - 0.5 * first


def expected_omega(
    state: ModelState,
    cache: BackgroundCache,
    side: str = "user",
    fixed_energy: bool = False,
) -> np.ndarray:
    """
    sum_j t_j Omega_ij: the cached background plus the sparse correction
    on observed pairs, which use their own optimal xi_ij.
    """
    view = state.view(side)
    n = view.own.size

    if fixed_energy:
        # zero energy moments: every pair sits at its optimum xi = 0
        return np.full(n, float(log_expit(0.0)))

    total = expected_omega_background(state, cache, side)

    rows, cols, _, mean, second = graph_moments(state)
    own_idx, other_idx = (rows, cols) if side == "user" else (cols, rows)

    xi_star = state.xi_star
    lam_star = lambda_of(xi_star)
    xi = np.sqrt(second)

    omega_obs = log_expit(xi) - 0.5 * xi - 0.5 * mean
    omega_star = (
        log_expit(xi_star)
        - lam_star * (second - xi_star * xi_star)
        - 0.5 * xi_star
        - 0.5 * mean
    )
    correction = view.other_weights[other_idx] * (omega_obs - omega_star)
    total += np.bincount(own_idx, weights=correction, minlength=n)
    return total


def categorical_logits(
    state: ModelState, cache: BackgroundCache, side: str = "user"
) -> np.ndarray:
    """Unnormalized log s~_i = E[log pi_i] + sum_j t_j Omega_ij."""
    omega = expected_omega(
        state, cache, side, fixed_energy=state.hyper.fixed_energy_categorical
    )
    return state.view(side).dirichlet.expected_log() + omega


def _normalize(logits: np.ndarray) -> np.ndarray:
    p = softmax(logits)
    return p / p.sum()


def update_categorical_s(state: ModelState, item_cache: BackgroundCache) -> np.ndarray:
    return _normalize(categorical_logits(state, item_cache, "user"))


def update_categorical_t(state: ModelState, user_cache: BackgroundCache) -> np.ndarray:
    return _normalize(categorical_logits(state, user_cache, "item"))


# =============================================================================
# Shared logistic parameter
# =============================================================================

def update_shared_xi(
    state: ModelState,
    user_cache: BackgroundCache,
    item_cache: BackgroundCache,
) -> float:
    """
    xi* from the weighted mean of E[a_ij^2] over pairs outside G:
    (full cached sum - sum_G s_i t_j xi_ij^2) / (1 - sum_G s_i t_j).
    """
    rows, cols, _, _, second = graph_moments(state)
    st = state.cat.s[rows] * state.cat.t[cols]

    Z = 1.0 - float(np.sum(st))
    if Z <= _Z_FLOOR:
        raise DegenerateMassError(
            f"categorical mass outside observed pairs is {Z:.3e}"
        )

    full = full_second_moment(user_cache, item_cache)
    numerator = full - float(st @ second)

    if numerator < 0.0:
        if numerator < -_XI_CLAMP * max(1.0, abs(full)):
            log.warning("Negative xi* numerator %.3e clamped to zero", numerator)
        numerator = 0.0

    return float(np.sqrt(numerator / Z))
