from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from pairvb.core.errors import PairStreamError
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

Record = tuple  # (user, item) or (user, item, count)


# =============================================================================
# Id maps
# =============================================================================

class IdMap:
    """
    Dense index assignment for external string keys.

    Indices are handed out in first-appearance order and never change.
    """

    def __init__(self, keys: Iterable[str] = ()):
        self._keys: list[str] = []
        self._index: dict[str, int] = {}
        for key in keys:
            self.add(key)

    def add(self, key: str) -> int:
        idx = self._index.get(key)
        if idx is None:
            idx = len(self._keys)
            self._index[key] = idx
            self._keys.append(key)
        return idx

    def index(self, key: str) -> int:
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"Unknown key {key!r}") from None

    def key(self, idx: int) -> str:
        return self._keys[idx]

    def keys(self) -> list[str]:
        return list(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: object) -> bool:
        return key in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IdMap) and self._keys == other._keys

    def __repr__(self) -> str:
        return f"<IdMap n={len(self._keys)}>"


# =============================================================================
# Pair counts
# =============================================================================

@dataclass(frozen=True, eq=False)
class PairCounts:
    """
    Sparse observed counts c_ij of an I-by-J pair stream.

    ``matrix`` is kept in canonical CSR form (sorted indices, no
    duplicates, no explicit zeros), so rows are the adjacency lists G(i).
    The CSC transpose view gives G(j).
    """

    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.int64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()

        if m.nnz and m.data.min() < 1:
            raise ValueError("Pair counts must be positive integers")

        object.__setattr__(self, "matrix", m)

    # --------------------------------------------------------------------------
    # Construction
    # --------------------------------------------------------------------------

    @classmethod
    def from_triples(
        cls,
        rows: Sequence[int],
        cols: Sequence[int],
        counts: Sequence[int],
        shape: tuple[int, int],
    ) -> PairCounts:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)

        if counts.size and counts.min() < 1:
            raise ValueError("Pair counts must be positive integers")

        coo = sp.coo_matrix((counts, (rows, cols)), shape=shape)
        return cls(coo.tocsr())

    @classmethod
    def empty(cls, n_users: int, n_items: int) -> PairCounts:
        return cls(sp.csr_matrix((n_users, n_items), dtype=np.int64))

    # --------------------------------------------------------------------------
    # Sizes and marginals
    # --------------------------------------------------------------------------

    @property
    def n_users(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_items(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @cached_property
    def total(self) -> int:
        """D, the number of observed pairs."""
        return int(self.matrix.data.sum())

    @cached_property
    def user_totals(self) -> np.ndarray:
        """c_i for every user."""
        return np.asarray(self.matrix.sum(axis=1)).ravel().astype(np.int64)

    @cached_property
    def item_totals(self) -> np.ndarray:
        """c_j for every item."""
        return np.asarray(self.matrix.sum(axis=0)).ravel().astype(np.int64)

    @cached_property
    def by_item(self) -> sp.csc_matrix:
        m = self.matrix.tocsc()
        m.sort_indices()
        return m

    # --------------------------------------------------------------------------
    # Adjacency
    # --------------------------------------------------------------------------

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """G(i) as (item indices, counts)."""
        m = self.matrix
        lo, hi = m.indptr[i], m.indptr[i + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """G(j) as (user indices, counts)."""
        m = self.by_item
        lo, hi = m.indptr[j], m.indptr[j + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def row_triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (i, j, c_ij) in row-major order."""
        m = self.matrix
        rows = np.repeat(np.arange(self.n_users), np.diff(m.indptr))
        return rows, m.indices.astype(np.int64), m.data.copy()

    def col_triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (i, j, c_ij) in column-major order."""
        m = self.by_item
        cols = np.repeat(np.arange(self.n_items), np.diff(m.indptr))
        return m.indices.astype(np.int64), cols, m.data.copy()

    def count(self, i: int, j: int) -> int:
        items, counts = self.row(i)
        pos = np.searchsorted(items, j)
        if pos < items.size and items[pos] == j:
            return int(counts[pos])
        return 0

    def transpose(self) -> PairCounts:
        return PairCounts(self.matrix.T.tocsr())

    def describe(self) -> dict:
        return {
            "users": self.n_users,
            "items": self.n_items,
            "pairs": self.total,
            "distinct_pairs": self.nnz,
        }

    def __repr__(self) -> str:
        return (
            f"<PairCounts I={self.n_users} J={self.n_items} "
            f"D={self.total} nnz={self.nnz}>"
        )


# =============================================================================
# Pair stream I/O
# =============================================================================

def parse_pair_lines(lines: Iterable[str]) -> Iterator[Record]:
    """
    Parse ``user<TAB>item[<TAB>count]`` records.

    Blank lines and ``#`` comments are skipped. Errors carry the 1-based
    line number.
    """
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")

        if not line.strip() or line.startswith("#"):
            continue

        fields = line.split("\t")

        if len(fields) not in (2, 3):
            raise PairStreamError(
                f"line {lineno}: expected 2 or 3 tab-separated fields, "
                f"got {len(fields)}"
            )

        user, item = fields[0], fields[1]
        if not user or not item:
            raise PairStreamError(f"line {lineno}: empty user or item key")

        if len(fields) == 2:
            yield (user, item)
            continue

        try:
            count = int(fields[2])
        except ValueError:
            raise PairStreamError(
                f"line {lineno}: count {fields[2]!r} is not an integer"
            ) from None

        if count < 1:
            raise PairStreamError(
                f"line {lineno}: count must be positive, got {count}"
            )

        yield (user, item, count)


def ingest_pairs(
    records: Iterable[Record],
) -> tuple[PairCounts, IdMap, IdMap]:
    """
    Aggregate a pair stream into counts.

    Returns the counts together with the user and item id maps; dense
    indices follow first appearance and repeated pairs accumulate.
    """
    users = IdMap()
    items = IdMap()
    acc: dict[tuple[int, int], int] = {}

    for n, record in enumerate(records, start=1):
        if len(record) == 2:
            user, item = record
            count = 1
        elif len(record) == 3:
            user, item, count = record
        else:
            raise PairStreamError(
                f"record {n}: expected (user, item[, count]), got {record!r}"
            )

        if isinstance(count, bool) or int(count) != count:
            raise PairStreamError(f"record {n}: count must be an integer")
        if count < 1:
            raise PairStreamError(
                f"record {n}: count must be positive, got {count}"
            )

        key = (users.add(str(user)), items.add(str(item)))
        acc[key] = acc.get(key, 0) + int(count)

    if not acc:
        raise PairStreamError("no observations")

    pairs = np.fromiter(
        (x for key in acc for x in key), dtype=np.int64, count=2 * len(acc)
    ).reshape(-1, 2)
    counts = PairCounts.from_triples(
        pairs[:, 0],
        pairs[:, 1],
        np.fromiter(acc.values(), dtype=np.int64, count=len(acc)),
        shape=(len(users), len(items)),
    )

    log.info(
        "Ingested %d pairs (%d distinct) over %d users and %d items",
        counts.total, counts.nnz, counts.n_users, counts.n_items,
    )
    return counts, users, items


def read_pair_stream(path) -> tuple[PairCounts, IdMap, IdMap]:
    path = Path(path)

    if not path.exists():
        raise FileNotFoundError(f"Pair stream not found: {path}")

    log.info("Reading pair stream: %s", path)
    with path.open("r", encoding="utf-8") as f:
        return ingest_pairs(parse_pair_lines(f))


def write_pair_stream(
    path,
    counts: PairCounts,
    users: IdMap,
    items: IdMap,
    aggregate: bool = True,
) -> None:
    """
    Write counts as a pair stream.

    With ``aggregate`` each distinct pair is one line with a count column;
    otherwise every observation is written as its own line.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    rows, cols, data = counts.row_triples()

    with path.open("w", encoding="utf-8") as f:
        f.write("# user\titem" + ("\tcount" if aggregate else "") + "\n")
        for i, j, c in zip(rows, cols, data):
            user, item = users.key(int(i)), items.key(int(j))
            if aggregate:
                f.write(f"{user}\t{item}\t{int(c)}\n")
            else:
                f.write(f"{user}\t{item}\n" * int(c))
