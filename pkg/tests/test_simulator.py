import numpy as np
import pytest

from pairvb.core.data import read_pair_stream
from pairvb.core.errors import SimulationBudgetError
from pairvb.engines.simulator import (
    GroundTruth,
    sample_ground_truth,
    simulate,
    write_simulated_stream,
)
from pairvb.engines.truth_io import read_ground_truth, write_ground_truth


def _flat_truth(n_users=3, n_items=4, bias=0.0, pi=None):
    return GroundTruth(
        U=np.zeros((n_users, 2)),
        V=np.zeros((n_items, 2)),
        user_bias=np.full(n_users, bias / 2),
        item_bias=np.full(n_items, bias / 2),
        pi=np.full(n_users, 1.0 / n_users) if pi is None else pi,
        psi=np.full(n_items, 1.0 / n_items),
    )


def test_certain_acceptance_rejects_nothing():
    result = simulate(_flat_truth(bias=40.0), target_observed=5_000, seed=0)
    assert result.accepted == 5_000
    assert result.rejected == 0
    assert result.users.size == result.items.size == 5_000


def test_coin_flip_acceptance():
    result = simulate(_flat_truth(bias=0.0), target_observed=20_000, seed=1)
    assert result.accepted == 20_000
    assert result.rejected / result.accepted == pytest.approx(1.0, abs=0.05)


def test_degenerate_selection_weights():
    truth = _flat_truth(pi=np.array([0.0, 1.0, 0.0]))
    result = simulate(truth, target_observed=500, seed=2)
    assert np.all(result.users == 1)


def test_simulation_is_reproducible():
    truth = sample_ground_truth(10, 8, 2, seed=3)
    a = simulate(truth, 1_000, seed=4)
    b = simulate(truth, 1_000, seed=4)
    np.testing.assert_array_equal(a.users, b.users)
    np.testing.assert_array_equal(a.items, b.items)
    assert a.rejected == b.rejected


def test_batch_size_does_not_change_counts():
    truth = _flat_truth(bias=40.0)
    small = simulate(truth, 300, seed=5, batch_size=7)
    assert small.accepted == 300
    assert small.rejected == 0


def test_budget_exhaustion():
    with pytest.raises(SimulationBudgetError):
        simulate(_flat_truth(bias=-40.0), target_observed=10, seed=6, max_draws=1_000)


def test_ground_truth_validates_simplex():
    with pytest.raises(ValueError):
        _flat_truth(pi=np.array([0.5, 0.4, 0.0]))


def test_sampled_truth_shapes():
    truth = sample_ground_truth(6, 5, 3, seed=7, alpha=0.3)
    assert (truth.n_users, truth.n_items, truth.k) == (6, 5, 3)
    assert truth.pi.sum() == pytest.approx(1.0)
    assert truth.energy(np.array([0, 1]), np.array([2, 3])).shape == (2,)
    assert truth.energy(0, 0) == pytest.approx(
        truth.U[0] @ truth.V[0] + truth.user_bias[0] + truth.item_bias[0]
    )


def test_stream_file_holds_every_observation(tmp_path):
    truth = sample_ground_truth(5, 4, 2, seed=8)
    result = simulate(truth, 200, seed=9)
    path = tmp_path / "sim.tsv"
    write_simulated_stream(path, result)

    counts, users, items = read_pair_stream(path)
    assert counts.total == 200
    i = users.index(f"u{int(result.users[0])}")
    j = items.index(f"v{int(result.items[0])}")
    assert counts.count(i, j) >= 1


def test_truth_sidecar_round_trip(tmp_path):
    truth = sample_ground_truth(4, 3, 2, seed=10)
    path = write_ground_truth(
        tmp_path / "truth.h5",
        truth,
        {"seed": 10, "accepted": 50, "draw": {"batch": 64}, "label": "demo"},
    )

    loaded, meta = read_ground_truth(path)
    for name in ("U", "V", "user_bias", "item_bias", "pi", "psi"):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(truth, name))
    assert meta["seed"] == 10
    assert meta["accepted"] == 50
    assert meta["draw.batch"] == 64
    assert meta["label"] == "demo"
