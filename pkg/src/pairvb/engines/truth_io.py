from __future__ import annotations

import json
import re
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator

import h5py
import numpy as np

from pairvb.engines.simulator import GroundTruth
from pairvb.utils.logging import get_logger

log = get_logger(__name__)

_ARRAYS = ("U", "V", "user_bias", "item_bias", "pi", "psi")


# =============================================================================
# Attributes
# =============================================================================

_UNSAFE = re.compile(r"[^\w.]")
_STR = h5py.string_dtype(encoding="utf-8")


def _attr_name(key: str) -> str:
    return _UNSAFE.sub("", re.sub(r"\s+", "_", key.strip()))


def _run_attrs(meta: dict[str, Any], prefix: str = "run") -> Iterator[tuple[str, Any]]:
    """Nested run metadata as dotted attribute names, ``{"draw": {"batch": 64}}`` -> ``run.draw.batch``."""
    for key, value in meta.items():
        name = f"{prefix}.{_attr_name(key)}"
        if isinstance(value, dict):
            yield from _run_attrs(value, name)
        elif value is not None:
            yield name, value


def _store_attr(attrs: h5py.AttributeManager, name: str, value: Any) -> None:
    if isinstance(value, str):
        attrs.create(name, value, dtype=_STR)
    elif isinstance(value, (bool, int, float, np.integer, np.floating)):
        attrs[name] = value
    else:
        # lists, tuples and other containers round-trip as JSON text
        attrs.create(name, json.dumps(value), dtype=_STR)


def _load_attr(value: Any) -> Any:
    if isinstance(value, bytes):
        value = value.decode("utf-8")
    if isinstance(value, np.generic):
        return value.item()
    return value


# =============================================================================
# Ground-truth sidecar
# =============================================================================

def write_ground_truth(
    path,
    truth: GroundTruth,
    meta: dict[str, Any] | None = None,
) -> Path:
    """
    Layout:

    /truth
        attrs (created_at, I, J, K, run metadata under ``run.``)
        U, V, user_bias, item_bias, pi, psi
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with h5py.File(path, "w") as f:
        group = f.create_group("truth")
        for name in _ARRAYS:
            group.create_dataset(name, data=getattr(truth, name))

        attrs = group.attrs
        _store_attr(attrs, "created_at", datetime.now().astimezone().isoformat())
        _store_attr(attrs, "shape.I", truth.n_users)
        _store_attr(attrs, "shape.J", truth.n_items)
        _store_attr(attrs, "shape.K", truth.k)

        for name, value in _run_attrs(meta or {}):
            _store_attr(attrs, name, value)

    log.info("Ground truth written to %s", path)
    return path


def read_ground_truth(path) -> tuple[GroundTruth, dict[str, Any]]:
    """Returns the truth and its ``run.`` metadata with the prefix stripped."""
    with h5py.File(Path(path), "r") as f:
        group = f["truth"]
        arrays = {name: group[name][()] for name in _ARRAYS}
        meta = {
            key[len("run."):]: _load_attr(value)
            for key, value in group.attrs.items()
            if key.startswith("run.")
        }

    return GroundTruth(**arrays), meta
