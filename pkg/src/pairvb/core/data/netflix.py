from __future__ import annotations

from pathlib import Path
from typing import Iterator

from pairvb.core.errors import PairStreamError
from pairvb.utils.logging import get_logger

log = get_logger(__name__)


def read_netflix_pairs(
    directory,
    min_stars: int = 4,
    pattern: str = "mv_*.txt",
) -> Iterator[tuple[str, str]]:
    """
    Turn Netflix prize ratings into an implicit-feedback pair stream.

    Each per-movie file starts with ``<movie_id>:`` followed by
    ``customer_id,rating,date`` lines. Ratings of at least ``min_stars``
    become (user, item) records; everything else is dropped.
    """
    directory = Path(directory)
    files = sorted(directory.glob(pattern))

    if not files:
        raise FileNotFoundError(f"No {pattern} files in {directory}")

    log.info("Reading %d Netflix movie files from %s", len(files), directory)

    for path in files:
        with path.open("r", encoding="latin-1") as f:
            header = f.readline().strip()
            if not header.endswith(":"):
                raise PairStreamError(
                    f"{path.name}: line 1: expected '<movie_id>:' header"
                )
            movie = header[:-1]

            for lineno, line in enumerate(f, start=2):
                line = line.strip()
                if not line:
                    continue

                fields = line.split(",")
                if len(fields) < 2:
                    raise PairStreamError(
                        f"{path.name}: line {lineno}: malformed rating row"
                    )

                try:
                    stars = int(fields[1])
                except ValueError:
                    raise PairStreamError(
                        f"{path.name}: line {lineno}: bad rating {fields[1]!r}"
                    ) from None

                if stars >= min_stars:
                    yield (fields[0], movie)
