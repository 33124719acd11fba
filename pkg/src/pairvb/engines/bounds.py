"""
Logistic bound machinery.

Jaakkola-Jordan bound on the logistic function, posterior moments of the
energy a_ij = u_i^T v_j + b_i + b_j and the MacKay approximation of the
logistic-Gaussian integral. Every function accepts scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from pairvb.core.errors import ContractViolation
from pairvb.core.model import ModelState

_SERIES_CUTOFF = 1e-6


# =============================================================================
# Jaakkola-Jordan bound
# =============================================================================

def lambda_of(xi):
    """
    lambda(xi) = (sigma(xi) - 1/2) / (2 xi), even in xi.

    Written as tanh(xi/2) / (4 xi); below |xi| = 1e-6 the series
    1/8 - xi^2/96 replaces the 0/0 form.
    """
    x = np.abs(np.asarray(xi, dtype=np.float64))
    small = x < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.where(small, 0.125 - x * x / 96.0, np.tanh(safe / 2.0) / (4.0 * safe))
    return out if out.ndim else float(out)


def log_logistic_bound(a, xi):
    """
    Lower bound on log sigma(a):
    log sigma(xi) - lambda(xi) (a^2 - xi^2) + a/2 - xi/2.

    Tight at |a| = |xi|. The bound on log(1 - sigma(a)) is this at -a.
    """
    a = np.asarray(a, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    out = log_expit(xi) - lambda_of(xi) * (a * a - xi * xi) + 0.5 * a - 0.5 * xi
    return out if np.ndim(out) else float(out)


# =============================================================================
# Energy moments
# =============================================================================

@dataclass(frozen=True)
class EnergyMoments:
    """First two moments of a_ij under q."""

    mean: float
    second: float

    @property
    def variance(self) -> float:
        return max(self.second - self.mean * self.mean, 0.0)


def energy_moment_arrays(
    mu_a: np.ndarray,
    var_a: np.ndarray,
    bias_a: np.ndarray,
    bias_var_a: np.ndarray,
    mu_b: np.ndarray,
    var_b: np.ndarray,
    bias_b: np.ndarray,
    bias_var_b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized moments of a = x^T y + b_x + b_y for independent factors.

    Trait arguments are (..., K) and broadcast against each other.
    Returns (mean, second, variance), variance clamped at zero.

    Var[x^T y] = sum_k (mx^2 vy + vx my^2 + vx vy).
    """
    dot = np.sum(mu_a * mu_b, axis=-1)
    dot_var = np.sum(mu_a**2 * var_b + var_a * mu_b**2 + var_a * var_b, axis=-1)

    mean = dot + bias_a + bias_b
    variance = dot_var + bias_var_a + bias_var_b
    second = variance + mean * mean
    return mean, second, np.maximum(variance, 0.0)


def energy_moments(i: int, j: int, state: ModelState) -> EnergyMoments:
    u, v = state.users, state.items
    mean, second, _ = energy_moment_arrays(
        u.mu[i], u.var_at(i), u.bias_mean[i], u.bias_var_at(i),
        v.mu[j], v.var_at(j), v.bias_mean[j], v.bias_var_at(j),
    )
    return EnergyMoments(mean=float(mean), second=float(second))


def local_xi(i: int, j: int, state: ModelState) -> float:
    """Optimal logistic parameter of an observed pair, the positive root."""
    return float(np.sqrt(energy_moments(i, j, state).second))


# =============================================================================
# Prediction
# =============================================================================

def mackay_probability(mean, variance):
    """sigma(mean / sqrt(1 + pi * variance / 8))."""
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)

    if np.any(variance < 0):
        raise ContractViolation("variance must be nonnegative")

    out = expit(mean / np.sqrt(1.0 + np.pi * variance / 8.0))
    return out if out.ndim else float(out)
