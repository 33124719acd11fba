import numpy as np
import pytest
from scipy.special import digamma, softmax

from pairvb.core.data import PairCounts
from pairvb.core.errors import DegenerateMassError
from pairvb.core.model import DirichletFactor, ModelState, TiedCategorical
from pairvb.engines.caches import (
    build_item_background,
    build_user_background,
    full_second_moment,
)
from pairvb.engines.oracle import (
    naive_bias_update,
    naive_categorical,
    naive_shared_xi,
    naive_trait_update,
)
from pairvb.engines.updates import (
    bias_natural_params,
    mean_gradient,
    trait_natural_params,
    update_categorical_s,
    update_categorical_t,
    update_dirichlet,
    update_shared_xi,
    update_traits,
    update_user_traits,
)


def _caches(state):
    return {"user": build_item_background(state), "item": build_user_background(state)}


def _check_against_oracle(state, close, indices_per_side=3):
    caches = _caches(state)

    for side in ("user", "item"):
        n = state.view(side).own.size
        for idx in np.unique(np.linspace(0, n - 1, indices_per_side).astype(int)):
            fast = trait_natural_params(int(idx), state, caches[side], side)
            slow = naive_trait_update(int(idx), state, side)
            close(fast.P, slow.P, 1e-10)
            close(fast.m, slow.m, 1e-10)

            close(
                bias_natural_params(int(idx), state, caches[side], side),
                naive_bias_update(int(idx), state, side),
                1e-10,
            )

    s, t = naive_categorical(state)
    close(update_categorical_s(state, caches["user"]), s, 1e-10)
    close(update_categorical_t(state, caches["item"]), t, 1e-10)

    xi = update_shared_xi(state, caches["item"], caches["user"])
    close(xi, naive_shared_xi(state), 1e-10)


def _random_shape(seed):
    rng = np.random.default_rng(10_000 + seed)
    return dict(
        n_users=int(rng.integers(2, 13)),
        n_items=int(rng.integers(2, 13)),
        k=int(rng.integers(1, 5)),
        density=float(rng.uniform(0.1, 0.7)),
        ratio=float(rng.choice([0.5, 1.0, 2.0])),
    )


# -----------------------------------------------------------------------------
# Oracle equivalence
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(25))
def test_cached_updates_match_oracle(make_state, close, seed):
    _check_against_oracle(make_state(seed, **_random_shape(seed)), close)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_cached_updates_match_oracle_wide(make_state, close, seed):
    rng = np.random.default_rng(20_000 + seed)
    state = make_state(
        seed,
        n_users=int(rng.integers(2, 51)),
        n_items=int(rng.integers(2, 51)),
        k=int(rng.integers(1, 9)),
        density=float(rng.uniform(0.02, 0.5)),
        max_count=5,
    )
    _check_against_oracle(state, close, indices_per_side=2)


def test_fixed_energy_matches_oracle(make_state, close):
    state = make_state(31, fixed_energy_categorical=True)
    caches = _caches(state)
    s, t = naive_categorical(state)
    close(update_categorical_s(state, caches["user"]), s, 1e-12)
    close(update_categorical_t(state, caches["item"]), t, 1e-12)


def test_fixed_energy_tracks_dirichlet(make_state, close):
    state = make_state(32, fixed_energy_categorical=True)
    s = update_categorical_s(state, build_item_background(state))
    close(s, softmax(state.dir_pi.expected_log()), 1e-12)


def _swap_sides(state: ModelState) -> ModelState:
    h = state.hyper
    return ModelState(
        counts=state.counts.transpose(),
        hyper=h.replace(tau_u=h.tau_v, tau_v=h.tau_u, alpha0=h.beta0, beta0=h.alpha0),
        users=state.items.copy(),
        items=state.users.copy(),
        dir_pi=state.dir_psi,
        dir_psi=state.dir_pi,
        cat=TiedCategorical(state.cat.t, state.cat.s),
        xi_star=state.xi_star,
        n_censored=state.n_censored,
    )


def test_item_updates_mirror_user_updates(make_state, close):
    state = make_state(33, n_users=7, n_items=5)
    flipped = _swap_sides(state)
    user_cache = build_user_background(state)

    for j in range(state.n_items):
        item_side = trait_natural_params(j, state, user_cache, "item")
        as_user = trait_natural_params(j, flipped, build_item_background(flipped), "user")
        close(item_side.P, as_user.P, 1e-12)
        close(item_side.m, as_user.m, 1e-12)

    close(
        update_categorical_t(state, user_cache),
        update_categorical_s(flipped, build_item_background(flipped)),
        1e-12,
    )


# -----------------------------------------------------------------------------
# Gaussian updates
# -----------------------------------------------------------------------------

def test_no_data_recovers_prior(make_state, close):
    state = make_state(34, density=0.0, ratio=0.0)
    cache = build_item_background(state)
    i = state.n_users - 1
    assert state.counts.row(i)[0].size == 0

    params = trait_natural_params(i, state, cache, "user")
    close(params.P, state.hyper.tau_u * np.eye(state.k), 1e-14)
    close(params.m, np.zeros(state.k), 1e-14)

    nu, rho = bias_natural_params(i, state, cache, "user")
    assert rho == pytest.approx(state.hyper.tau_b, rel=1e-14)
    assert nu == 0.0


def test_bulk_update_zeroes_gradient(make_state, close):
    state = make_state(35, n_users=8, density=0.0)
    cache = build_item_background(state)
    i = state.n_users - 1

    state.users.set_trait(i, update_user_traits(i, state, cache))
    close(mean_gradient(i, state, cache, "user"), np.zeros(state.k), 1e-10)


def test_bulk_update_uses_diagonal_precision(make_state, close):
    state = make_state(36, k=4)
    cache = build_item_background(state)
    params = trait_natural_params(2, state, cache, "user")
    factor = update_traits(2, state, cache, "user")

    close(factor.prec, np.diag(params.P), 1e-14)
    close(factor.mu, np.linalg.solve(params.P, params.m), 1e-10)


def test_sequential_equals_bulk_in_one_dimension(make_state, close):
    bulk = make_state(37, k=1)
    seq = make_state(37, k=1, bulk_trait_update=False)
    for idx in range(bulk.n_users):
        a = update_traits(idx, bulk, build_item_background(bulk), "user")
        b = update_traits(idx, seq, build_item_background(seq), "user")
        close(a.mu, b.mu, 1e-12)
        close(a.prec, b.prec, 1e-14)


def test_sequential_sweep_is_gauss_seidel(make_state, close):
    state = make_state(38, k=3, bulk_trait_update=False)
    cache = build_item_background(state)
    params = trait_natural_params(1, state, cache, "user")
    P, m = params.P, params.m

    mu = state.users.mu[1].copy()
    for k in range(3):
        others = P[k] @ mu - P[k, k] * mu[k]
        mu[k] = (m[k] - others) / P[k, k]

    close(update_traits(1, state, cache, "user").mu, mu, 1e-12)


# -----------------------------------------------------------------------------
# Dirichlet and categorical updates
# -----------------------------------------------------------------------------

def test_dirichlet_update_adds_counts_and_censored_mass(make_state, close):
    state = make_state(39, ratio=2.0, alpha0=0.5, beta0=1.5)
    d_prime = 2 * state.counts.total
    assert state.n_censored == d_prime

    pi, psi = update_dirichlet(state)
    close(pi.alpha, 0.5 + state.counts.user_totals + d_prime * state.cat.s, 1e-14)
    close(psi.alpha, 1.5 + state.counts.item_totals + d_prime * state.cat.t, 1e-14)


def test_dirichlet_expected_log():
    q = DirichletFactor(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(q.expected_log(), digamma([1.0, 2.0, 3.0]) - digamma(6.0))
    np.testing.assert_allclose(q.mean(), [1 / 6, 2 / 6, 3 / 6])


def test_categorical_on_simplex(make_state):
    state = make_state(40, n_users=25, n_items=20)
    s = update_categorical_s(state, build_item_background(state))
    assert np.all(s >= 0)
    assert abs(s.sum() - 1.0) <= 1e-12


def test_single_user_gets_all_mass(make_state):
    state = make_state(41, n_users=1, n_items=4)
    s = update_categorical_s(state, build_item_background(state))
    np.testing.assert_array_equal(s, [1.0])


# -----------------------------------------------------------------------------
# Shared xi
# -----------------------------------------------------------------------------

def test_empty_graph_uses_full_moment(make_state, close):
    state = make_state(42)
    state.counts = PairCounts.empty(state.n_users, state.n_items)
    user_cache, item_cache = build_user_background(state), build_item_background(state)

    xi = update_shared_xi(state, user_cache, item_cache)
    close(xi, np.sqrt(full_second_moment(user_cache, item_cache)), 1e-12)
    close(xi, naive_shared_xi(state), 1e-10)


def test_near_zero_state_gives_zero_xi(make_state):
    state = make_state(43)
    for factors in (state.users, state.items):
        factors.mu[:] = 0.0
        factors.bias_mean[:] = 0.0
        factors.prec[:] = 1e30
        factors.bias_prec[:] = 1e30

    xi = update_shared_xi(state, build_user_background(state), build_item_background(state))
    assert xi == pytest.approx(0.0, abs=1e-10)


def test_all_mass_on_observed_pair_is_degenerate(make_state):
    state = make_state(44)
    assert state.counts.count(0, 0) > 0

    s = np.zeros(state.n_users)
    t = np.zeros(state.n_items)
    s[0] = t[0] = 1.0
    state.cat = TiedCategorical(s, t)

    with pytest.raises(DegenerateMassError):
        update_shared_xi(state, build_user_background(state), build_item_background(state))
    with pytest.raises(DegenerateMassError):
        naive_shared_xi(state)
