from .counts import (
    IdMap,
    PairCounts,
    ingest_pairs,
    parse_pair_lines,
    read_pair_stream,
    write_pair_stream,
)
from .netflix import read_netflix_pairs
