"""
Naive O(IJ) reference implementations.

Every quantity here is summed explicitly over all (i, j), with xi_ij at
its local optimum on observed pairs and xi* everywhere else. Nothing is
shared with the cache code paths: second moments come from full K x K
outer products and traces, not from the per-dimension identity used by
the fast path. Only meant for small instances.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, entr, expit, gammaln, log_expit, logsumexp

from pairvb.core.data import PairCounts
from pairvb.core.errors import ContractViolation, DegenerateMassError
from pairvb.core.model import Hyperparams, ModelState
from pairvb.engines.updates import TraitNaturalParams

MAX_PAIRS = 1_000_000


def _check_size(state: ModelState) -> None:
    if state.n_users * state.n_items > MAX_PAIRS:
        raise ContractViolation(
            f"oracle limited to {MAX_PAIRS} pairs, got "
            f"{state.n_users}x{state.n_items}"
        )


def _lam(xi: np.ndarray) -> np.ndarray:
    xi = np.abs(np.asarray(xi, dtype=np.float64))
    nz = xi > 1e-6
    safe = np.where(nz, xi, 1.0)
    return np.where(nz, (expit(safe) - 0.5) / (2.0 * safe), 0.125 - xi**2 / 96.0)


def _outer_moments(mu: np.ndarray, prec: np.ndarray) -> np.ndarray:
    """E[x x^T] for every row, shape (n, K, K)."""
    n, K = mu.shape
    out = np.empty((n, K, K))
    for r in range(n):
        out[r] = np.outer(mu[r], mu[r]) + np.diag(1.0 / prec[r])
    return out


def _pair_moments(state: ModelState) -> tuple[np.ndarray, np.ndarray]:
    """(E[a_ij], E[a_ij^2]) as dense I x J arrays."""
    u, v = state.users, state.items
    uu = _outer_moments(u.mu, u.prec)
    vv = _outer_moments(v.mu, v.prec)

    bu, bv = u.bias_mean, v.bias_mean
    bu2 = bu**2 + 1.0 / u.bias_prec
    bv2 = bv**2 + 1.0 / v.bias_prec

    dot = u.mu @ v.mu.T
    mean = dot + bu[:, None] + bv[None, :]

    I, J = dot.shape
    second = np.empty((I, J))
    for i in range(I):
        for j in range(J):
            second[i, j] = (
                np.trace(uu[i] @ vv[j])
                + 2.0 * dot[i, j] * (bu[i] + bv[j])
                + bu2[i]
                + 2.0 * bu[i] * bv[j]
                + bv2[j]
            )
    return mean, second


def _dense_counts(counts: PairCounts) -> np.ndarray:
    return counts.matrix.toarray().astype(np.float64)


def _xi_matrix(state: ModelState, second: np.ndarray) -> np.ndarray:
    """Local optimum on observed pairs, xi* elsewhere."""
    observed = _dense_counts(state.counts) > 0
    return np.where(observed, np.sqrt(second), state.xi_star)


def _omega(xi: np.ndarray, mean: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Bounded E[log(1 - sigma(a))]."""
    return log_expit(xi) - _lam(xi) * (second - xi**2) - 0.5 * mean - 0.5 * xi


def _side_arrays(state: ModelState, side: str):
    """Orient every dense array so rows are the updated side."""
    mean, second = _pair_moments(state)
    C = _dense_counts(state.counts)
    xi = _xi_matrix(state, second)
    if side == "user":
        return (
            state.users, state.items, state.cat.s, state.cat.t,
            C, mean, second, xi, state.hyper.tau_u,
        )
    return (
        state.items, state.users, state.cat.t, state.cat.s,
        C.T, mean.T, second.T, xi.T, state.hyper.tau_v,
    )


# =============================================================================
# Naive updates
# =============================================================================

def naive_trait_update(
    idx: int, state: ModelState, side: str = "user"
) -> TraitNaturalParams:
    _check_size(state)
    own, other, w_own, w_other, C, _, _, xi, tau = _side_arrays(state, side)
    d_prime = float(state.n_censored)
    K = state.k

    vv = _outer_moments(other.mu, other.prec)
    P = tau * np.eye(K)
    m = np.zeros(K)

    for j in range(other.size):
        lam = _lam(xi[idx, j])
        c = C[idx, j]
        sd = w_own[idx] * w_other[j] * d_prime
        eb = own.bias_mean[idx] + other.bias_mean[j]

        P += (c + sd) * 2.0 * lam * vv[j]
        m += (c * (0.5 - 2.0 * lam * eb) + sd * (-0.5 - 2.0 * lam * eb)) * other.mu[j]

    return TraitNaturalParams(P=P, m=m)


def naive_bias_update(
    idx: int, state: ModelState, side: str = "user"
) -> tuple[float, float]:
    """(nu, rho) of q(b) by explicit summation."""
    _check_size(state)
    own, other, w_own, w_other, C, _, _, xi, _ = _side_arrays(state, side)
    d_prime = float(state.n_censored)

    rho = state.hyper.tau_b
    nu = 0.0
    for j in range(other.size):
        lam = _lam(xi[idx, j])
        c = C[idx, j]
        sd = w_own[idx] * w_other[j] * d_prime
        e = float(own.mu[idx] @ other.mu[j] + other.bias_mean[j])

        rho += (c + sd) * 2.0 * lam
        nu += c * (0.5 - 2.0 * lam * e) + sd * (-0.5 - 2.0 * lam * e)

    return float(nu), float(rho)


def _dirichlet_expected_log(alpha: np.ndarray) -> np.ndarray:
    return digamma(alpha) - digamma(alpha.sum())


def naive_categorical(state: ModelState) -> tuple[np.ndarray, np.ndarray]:
    """(s, t) from explicit Omega_ij over every pair, both from ``state``."""
    _check_size(state)
    mean, second = _pair_moments(state)

    if state.hyper.fixed_energy_categorical:
        omega = np.full(mean.shape, np.log(0.5))
    else:
        omega = _omega(_xi_matrix(state, second), mean, second)

    log_s = _dirichlet_expected_log(state.dir_pi.alpha) + omega @ state.cat.t
    log_t = _dirichlet_expected_log(state.dir_psi.alpha) + state.cat.s @ omega

    return np.exp(log_s - logsumexp(log_s)), np.exp(log_t - logsumexp(log_t))


def naive_shared_xi(state: ModelState) -> float:
    """sqrt of the s_i t_j-weighted mean of E[a_ij^2] over pairs outside G."""
    _check_size(state)
    _, second = _pair_moments(state)
    outside = _dense_counts(state.counts) == 0

    weights = np.outer(state.cat.s, state.cat.t) * outside
    Z = weights.sum()
    if not outside.any() or Z <= 1e-12:
        raise DegenerateMassError("no categorical mass outside observed pairs")

    return float(np.sqrt(max(np.sum(weights * second) / Z, 0.0)))


def naive_elbo(state: ModelState) -> float:
    _check_size(state)
    hyper = state.hyper
    d_prime = float(state.n_censored)
    s, t = state.cat.s, state.cat.t

    mean, second = _pair_moments(state)
    C = _dense_counts(state.counts)
    xi = _xi_matrix(state, second)

    total = 0.0

    # likelihood of observed pairs: log sigma(a) bound at its own xi
    lam = _lam(xi)
    bound_pos = log_expit(xi) - lam * (second - xi**2) + 0.5 * mean - 0.5 * xi
    total += float(np.sum(C * bound_pos))

    # censored stream
    total += d_prime * float(np.sum(np.outer(s, t) * _omega(xi, mean, second)))

    # selection terms and Dirichlets
    for q, totals, w, conc in (
        (state.dir_pi.alpha, C.sum(axis=1), s, hyper.alpha0),
        (state.dir_psi.alpha, C.sum(axis=0), t, hyper.beta0),
    ):
        e_log = _dirichlet_expected_log(q)
        n = q.size
        total += float(np.sum((totals + d_prime * w) * e_log))
        total += gammaln(n * conc) - n * gammaln(conc) + (conc - 1.0) * e_log.sum()
        total -= gammaln(q.sum()) - gammaln(q).sum() + np.sum((q - 1.0) * e_log)
        total += d_prime * float(np.sum(entr(w)))

    # Gaussians: prior cross-entropy plus entropy
    for mu, prec, tau in (
        (state.users.mu, state.users.prec, hyper.tau_u),
        (state.items.mu, state.items.prec, hyper.tau_v),
        (state.users.bias_mean, state.users.bias_prec, hyper.tau_b),
        (state.items.bias_mean, state.items.bias_prec, hyper.tau_b),
    ):
        var = 1.0 / prec
        total += float(
            np.sum(
                -0.5 * np.log(2.0 * np.pi / tau)
                - 0.5 * tau * (mu**2 + var)
                + 0.5 * np.log(2.0 * np.pi * np.e * var)
            )
        )

    return float(total)


# =============================================================================
# Integration oracles
# =============================================================================

def logistic_gaussian_quadrature(mean: float, variance: float, n: int = 64) -> float:
    """int sigma(a) N(a; mean, variance) da by Gauss-Hermite quadrature."""
    if variance < 0:
        raise ContractViolation("variance must be nonnegative")
    x, w = np.polynomial.hermite.hermgauss(n)
    return float(w @ expit(mean + np.sqrt(2.0 * variance) * x) / np.sqrt(np.pi))


def monte_carlo_log_evidence(
    counts: PairCounts,
    hyper: Hyperparams,
    n_censored: int,
    n_samples: int = 200_000,
    seed: int = 0,
    batch: int = 20_000,
) -> float:
    """
    log p(D) estimated from prior samples of (pi, psi, U, V, b).

    Observed events contribute log pi_i + log psi_j + log sigma(a_ij);
    each censored event contributes log sum_ij pi_i psi_j sigma(-a_ij).
    """
    I, J, K = counts.n_users, counts.n_items, hyper.k
    if I * J * K > 1_000:
        raise ContractViolation("Monte-Carlo evidence is meant for tiny instances")

    rng = np.random.default_rng(seed)
    C = _dense_counts(counts)
    log_weights = []

    remaining = n_samples
    while remaining > 0:
        n = min(batch, remaining)
        remaining -= n

        pi = rng.dirichlet(np.full(I, hyper.alpha0), size=n)
        psi = rng.dirichlet(np.full(J, hyper.beta0), size=n)
        U = rng.normal(0.0, 1.0 / np.sqrt(hyper.tau_u), size=(n, I, K))
        V = rng.normal(0.0, 1.0 / np.sqrt(hyper.tau_v), size=(n, J, K))
        bu = rng.normal(0.0, 1.0 / np.sqrt(hyper.tau_b), size=(n, I))
        bv = rng.normal(0.0, 1.0 / np.sqrt(hyper.tau_b), size=(n, J))

        a = np.einsum("nik,njk->nij", U, V) + bu[:, :, None] + bv[:, None, :]
        with np.errstate(divide="ignore"):
            log_sel = np.log(pi)[:, :, None] + np.log(psi)[:, None, :]

        observed = np.sum(C * (log_sel + log_expit(a)), axis=(1, 2))
        censored = logsumexp((log_sel + log_expit(-a)).reshape(n, -1), axis=1)
        log_weights.append(observed + n_censored * censored)

    lw = np.concatenate(log_weights)
    return float(logsumexp(lw) - np.log(lw.size))
