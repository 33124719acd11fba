"""
Plain-text checkpoints.

Layout, one record per line, sections in fixed order::

    PSM-CKPT <version>
    [header]          I, J, K, D, D_prime, xi_star as ``name value``
    [hyper]           one ``name value`` line per hyperparameter
    [user_ids]        count, then one key per line
    [item_ids]
    [counts]          nnz, then ``i j c`` lines
    [user_factors]    one row per entity: mu_1..mu_K prec_1..prec_K bias_mean bias_prec
    [item_factors]
    [dirichlet_pi]    one tab-separated row
    [dirichlet_psi]
    [s]
    [t]
    [end]

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from pairvb.core.data import IdMap, PairCounts
from pairvb.core.errors import CheckpointError
from pairvb.core.model import (
    HYPER_DEFAULTS,
    DirichletFactor,
    EntityFactors,
    Hyperparams,
    ModelState,
    TiedCategorical,
)
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

MAGIC = "PSM-CKPT"
VERSION = 1


def _f(x: float) -> str:
    return format(float(x), ".17g")


def _row(values) -> str:
    return "\t".join(_f(x) for x in values)


def _value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _f(value)
    return str(value)


# =============================================================================
# Writing
# =============================================================================

def _lines(state: ModelState, users: IdMap, items: IdMap) -> Iterator[str]:
    counts = state.counts

    yield f"{MAGIC} {VERSION}"

    yield "[header]"
    yield f"I {state.n_users}"
    yield f"J {state.n_items}"
    yield f"K {state.k}"
    yield f"D {counts.total}"
    yield f"D_prime {state.n_censored}"
    yield f"xi_star {_f(state.xi_star)}"

    yield "[hyper]"
    for name, value in state.hyper.describe().items():
        yield f"{name} {_value(value)}"

    for section, ids in (("user_ids", users), ("item_ids", items)):
        yield f"[{section}]"
        yield str(len(ids))
        yield from ids.keys()

    yield "[counts]"
    yield str(counts.nnz)
    for i, j, c in zip(*counts.row_triples()):
        yield f"{i} {j} {c}"

    for section, factors in (("user_factors", state.users), ("item_factors", state.items)):
        yield f"[{section}]"
        for n in range(factors.size):
            yield _row(
                [
                    *factors.mu[n],
                    *factors.prec[n],
                    factors.bias_mean[n],
                    factors.bias_prec[n],
                ]
            )

    yield "[dirichlet_pi]"
    yield _row(state.dir_pi.alpha)
    yield "[dirichlet_psi]"
    yield _row(state.dir_psi.alpha)
    yield "[s]"
    yield _row(state.cat.s)
    yield "[t]"
    yield _row(state.cat.t)
    yield "[end]"


def save_checkpoint(state: ModelState, users: IdMap, items: IdMap, path) -> Path:
    if len(users) != state.n_users or len(items) != state.n_items:
        raise CheckpointError("id maps do not match the state dimensions")
    for ids in (users, items):
        bad = next((key for key in ids.keys() if "\n" in key), None)
        if bad is not None:
            raise CheckpointError(f"key {bad!r} contains a newline")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf-8", newline="\n") as f:
        for line in _lines(state, users, items):
            f.write(line + "\n")

    log.info("Checkpoint written to %s", path)
    return path


# =============================================================================
# Reading
# =============================================================================

class _Reader:
    def __init__(self, lines: list[str]):
        self._lines = lines
        self._pos = 0
        self.section = "magic"

    def next(self) -> str:
        if self._pos >= len(self._lines):
            raise CheckpointError(f"truncated checkpoint in section [{self.section}]")
        line = self._lines[self._pos]
        self._pos += 1
        return line

    def enter(self, section: str) -> None:
        line = self.next()
        if line != f"[{section}]":
            raise CheckpointError(
                f"expected section [{section}] after [{self.section}], got {line!r}"
            )
        self.section = section

    def pairs(self, names: list[str]) -> dict[str, str]:
        out = {}
        for name in names:
            key, _, value = self.next().partition(" ")
            if key != name:
                raise CheckpointError(
                    f"expected {name!r} in section [{self.section}], got {key!r}"
                )
            out[name] = value
        return out

    def floats(self, n: int) -> np.ndarray:
        try:
            values = np.array([float(x) for x in self.next().split("\t")])
        except ValueError as e:
            raise CheckpointError(f"bad number in section [{self.section}]") from e
        if values.size != n:
            raise CheckpointError(
                f"section [{self.section}] has {values.size} values, expected {n}"
            )
        return values

    def integer(self) -> int:
        line = self.next()
        try:
            return int(line)
        except ValueError as e:
            raise CheckpointError(
                f"expected an integer in section [{self.section}], got {line!r}"
            ) from e


def _parse_hyper(raw: dict[str, str]) -> Hyperparams:
    values = {}
    for name, text in raw.items():
        kind = type(HYPER_DEFAULTS[name])
        if kind is bool:
            values[name] = text == "true"
        else:
            values[name] = kind(text)
    return Hyperparams.from_dict(values)


def _read_factors(reader: _Reader, n: int, k: int) -> EntityFactors:
    rows = np.array([reader.floats(2 * k + 2) for _ in range(n)]).reshape(n, 2 * k + 2)
    return EntityFactors(
        mu=rows[:, :k],
        prec=rows[:, k : 2 * k],
        bias_mean=rows[:, 2 * k],
        bias_prec=rows[:, 2 * k + 1],
    )


def load_checkpoint(path) -> tuple[ModelState, IdMap, IdMap]:
    path = Path(path)
    # split on "\n" only: str.splitlines also breaks on \x0c, \x85, \u2028
    # and other separators that may appear inside user or item keys
    with path.open("r", encoding="utf-8", newline="\n") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    reader = _Reader(lines)

    magic, _, version = reader.next().partition(" ")
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a {MAGIC} checkpoint")
    if version != str(VERSION):
        raise CheckpointError(
            f"checkpoint version {version!r} is not supported (expected {VERSION})"
        )

    try:
        reader.enter("header")
        header = reader.pairs(["I", "J", "K", "D", "D_prime", "xi_star"])
        I, J, K = int(header["I"]), int(header["J"]), int(header["K"])

        reader.enter("hyper")
        hyper = _parse_hyper(reader.pairs(list(HYPER_DEFAULTS)))
        if hyper.k != K:
            raise CheckpointError(f"header K={K} disagrees with hyper k={hyper.k}")

        ids = []
        for section, expected in (("user_ids", I), ("item_ids", J)):
            reader.enter(section)
            n = reader.integer()
            if n != expected:
                raise CheckpointError(f"[{section}] lists {n} keys, expected {expected}")
            ids.append(IdMap(reader.next() for _ in range(n)))
        users, items = ids

        reader.enter("counts")
        nnz = reader.integer()
        triples = np.array(
            [[int(x) for x in reader.next().split(" ")] for _ in range(nnz)],
            dtype=np.int64,
        ).reshape(nnz, 3)
        counts = PairCounts.from_triples(
            triples[:, 0], triples[:, 1], triples[:, 2], (I, J)
        )
        if counts.total != int(header["D"]):
            raise CheckpointError(
                f"counts sum to {counts.total}, header says D={header['D']}"
            )

        reader.enter("user_factors")
        user_factors = _read_factors(reader, I, K)
        reader.enter("item_factors")
        item_factors = _read_factors(reader, J, K)

        reader.enter("dirichlet_pi")
        alpha = reader.floats(I)
        reader.enter("dirichlet_psi")
        beta = reader.floats(J)
        reader.enter("s")
        s = reader.floats(I)
        reader.enter("t")
        t = reader.floats(J)
        reader.enter("end")

        state = ModelState(
            counts=counts,
            hyper=hyper,
            users=user_factors,
            items=item_factors,
            dir_pi=DirichletFactor(alpha),
            dir_psi=DirichletFactor(beta),
            cat=TiedCategorical(s, t),
            xi_star=float(header["xi_star"]),
            n_censored=int(header["D_prime"]),
        )
    except CheckpointError:
        raise
    except ValueError as e:
        raise CheckpointError(f"invalid checkpoint in section [{reader.section}]: {e}") from e

    log.info("Checkpoint loaded from %s: %s", path, state.describe())
    return state, users, items
