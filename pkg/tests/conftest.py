from __future__ import annotations

import numpy as np
import pytest

from pairvb.core.data import PairCounts
from pairvb.core.model import (
    DirichletFactor,
    EntityFactors,
    Hyperparams,
    ModelState,
    TiedCategorical,
)


def random_state(
    seed: int,
    n_users: int = 6,
    n_items: int = 5,
    k: int = 3,
    density: float = 0.4,
    ratio: float = 1.0,
    max_count: int = 3,
    **hyper,
) -> ModelState:
    """
    A random but valid state: random counts, factors, Dirichlets, s, t
    and xi*. At least one pair is observed and at least one is not.
    """
    rng = np.random.default_rng(seed)
    I, J, K = n_users, n_items, k

    mask = rng.random((I, J)) < density
    mask[0, 0] = True
    mask[-1, -1] = False
    rows, cols = np.nonzero(mask)
    counts = PairCounts.from_triples(
        rows, cols, rng.integers(1, max_count + 1, size=rows.size), (I, J)
    )

    params = dict(
        k=K,
        ratio=ratio,
        tau_u=float(rng.uniform(0.5, 2.0)),
        tau_v=float(rng.uniform(0.5, 2.0)),
        tau_b=float(rng.uniform(0.5, 2.0)),
        alpha0=float(rng.uniform(0.5, 2.0)),
        beta0=float(rng.uniform(0.5, 2.0)),
    )
    params.update(hyper)

    def factors(n: int) -> EntityFactors:
        return EntityFactors(
            mu=rng.normal(0.0, 0.7, size=(n, K)),
            prec=rng.uniform(0.5, 3.0, size=(n, K)),
            bias_mean=rng.normal(0.0, 0.5, size=n),
            bias_prec=rng.uniform(0.5, 3.0, size=n),
        )

    s = rng.dirichlet(np.ones(I))
    t = rng.dirichlet(np.ones(J))

    return ModelState(
        counts=counts,
        hyper=Hyperparams(**params),
        users=factors(I),
        items=factors(J),
        dir_pi=DirichletFactor(rng.uniform(0.5, 5.0, size=I)),
        dir_psi=DirichletFactor(rng.uniform(0.5, 5.0, size=J)),
        cat=TiedCategorical(s / s.sum(), t / t.sum()),
        xi_star=float(rng.uniform(0.5, 2.0)),
    )


def assert_close(actual, expected, rel: float) -> None:
    """max |actual - expected| <= rel * max(1, max |expected|)."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(expected))) if expected.size else 1.0)
    err = float(np.max(np.abs(actual - expected))) if expected.size else 0.0
    assert err <= rel * scale, f"error {err:.3e} exceeds {rel:.1e} * {scale:.3g}"


@pytest.fixture
def make_state():
    return random_state


@pytest.fixture
def close():
    return assert_close


@pytest.fixture
def small_state() -> ModelState:
    return random_state(0)


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_text(
        "# user\titem\tcount\n"
        "alice\tx\t2\n"
        "alice\ty\n"
        "bob\tx\n"
        "bob\tz\t3\n"
        "\n"
        "carol\ty\n"
        "carol\tz\n"
        "dave\tx\n",
        encoding="utf-8",
    )
    return path
