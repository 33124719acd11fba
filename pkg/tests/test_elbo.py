import numpy as np
import pytest

from pairvb.core.data import PairCounts
from pairvb.core.model import DirichletFactor, Hyperparams, TiedCategorical, init_state
from pairvb.engines.caches import build_item_background, build_user_background
from pairvb.engines.elbo import (
    compute_elbo,
    dirichlet_entropy,
    dirichlet_prior_term,
    gaussian_entropy,
    gaussian_prior_term,
)
from pairvb.engines.oracle import monte_carlo_log_evidence, naive_elbo
from pairvb.engines.sweep import SweepEngine
from pairvb.engines.updates import (
    update_bias,
    update_categorical_s,
    update_categorical_t,
    update_dirichlet,
    update_shared_xi,
    update_traits,
)


def _random_counts(seed, n_users, n_items, density=0.4):
    rng = np.random.default_rng(seed)
    mask = rng.random((n_users, n_items)) < density
    mask[0, 0] = True
    mask[-1, -1] = False
    rows, cols = np.nonzero(mask)
    return PairCounts.from_triples(
        rows, cols, rng.integers(1, 4, size=rows.size), (n_users, n_items)
    )


def test_zero_data_bound_is_zero():
    hyper = Hyperparams(k=3, ratio=0.0, init_std=0.0, tau_u=2.0, alpha0=0.7)
    state = init_state(PairCounts.empty(4, 5), hyper, seed=0)

    breakdown = compute_elbo(state)
    assert breakdown.total == pytest.approx(0.0, abs=1e-9)
    assert breakdown.observed_lik == 0.0
    assert breakdown.censored_lik == 0.0


def test_closed_form_pieces_vanish_at_prior():
    q = DirichletFactor(np.full(6, 0.8))
    assert dirichlet_prior_term(q, 0.8) + dirichlet_entropy(q) == pytest.approx(0.0, abs=1e-12)

    mean, prec = np.zeros((3, 2)), np.full((3, 2), 1.7)
    assert gaussian_prior_term(mean, prec, 1.7) + gaussian_entropy(prec) == pytest.approx(
        0.0, abs=1e-12
    )


@pytest.mark.parametrize("seed", range(10))
def test_elbo_matches_oracle(make_state, close, seed):
    rng = np.random.default_rng(seed)
    state = make_state(
        seed,
        n_users=int(rng.integers(2, 15)),
        n_items=int(rng.integers(2, 15)),
        k=int(rng.integers(1, 5)),
    )
    close(compute_elbo(state).total, naive_elbo(state), 1e-9)


def test_breakdown_total_is_sum(small_state):
    b = compute_elbo(small_state)
    parts = b.describe()
    assert parts["total"] == b.total
    assert b.total == pytest.approx(
        sum(v for k, v in parts.items() if k != "total"), rel=1e-15
    )


# -----------------------------------------------------------------------------
# Monotonicity
# -----------------------------------------------------------------------------

def _coordinate_steps(state):
    """Every coordinate update of one sweep, applied in place one at a time."""
    state.dir_pi, state.dir_psi = update_dirichlet(state)
    yield "dirichlet"

    item_cache = build_item_background(state)
    state.cat = TiedCategorical(update_categorical_s(state, item_cache), state.cat.t)
    yield "s"

    for i in range(state.n_users):
        state.users.set_bias(i, update_bias(i, state, item_cache, "user"))
        yield f"user bias {i}"
        state.users.set_trait(i, update_traits(i, state, item_cache, "user"))
        yield f"user trait {i}"

    user_cache = build_user_background(state)
    state.xi_star = update_shared_xi(state, user_cache, item_cache)
    yield "xi_star"

    state.cat = TiedCategorical(state.cat.s, update_categorical_t(state, user_cache))
    yield "t"

    for j in range(state.n_items):
        state.items.set_bias(j, update_bias(j, state, user_cache, "item"))
        yield f"item bias {j}"
        state.items.set_trait(j, update_traits(j, state, user_cache, "item"))
        yield f"item trait {j}"


@pytest.mark.parametrize("seed", range(20))
def test_every_coordinate_update_raises_bound(seed):
    rng = np.random.default_rng(seed)
    counts = _random_counts(seed, int(rng.integers(2, 8)), int(rng.integers(2, 8)))
    hyper = Hyperparams(k=int(rng.integers(1, 4)), init_std=0.5, bulk_trait_update=False)
    state = init_state(counts, hyper, seed=seed)

    previous = compute_elbo(state).total
    for _ in range(3):
        for step in _coordinate_steps(state):
            current = compute_elbo(state).total
            assert current >= previous - 1e-8 * abs(previous), step
            previous = current


@pytest.mark.parametrize("seed", range(5))
def test_bulk_sweeps_raise_bound(seed):
    counts = _random_counts(seed, 12, 10, density=0.3)
    state = init_state(counts, Hyperparams(k=3, init_std=0.5), seed=seed)

    previous = compute_elbo(state).total
    with SweepEngine() as engine:
        for _ in range(10):
            engine.run(state)
            current = compute_elbo(state).total
            assert current >= previous - 1e-6 * abs(previous)
            previous = current


@pytest.mark.slow
def test_bound_below_monte_carlo_evidence():
    counts = PairCounts.from_triples([0, 1, 1], [0, 0, 1], [2, 1, 1], (2, 2))
    hyper = Hyperparams(k=1, ratio=1.0)
    state = init_state(counts, hyper, seed=0)

    with SweepEngine() as engine:
        for _ in range(30):
            engine.run(state)

    evidence = monte_carlo_log_evidence(
        counts, hyper, state.n_censored, n_samples=200_000, seed=1
    )
    assert compute_elbo(state).total <= evidence + 0.05
