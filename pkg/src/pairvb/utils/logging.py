import logging
from pathlib import Path
from typing import Any, Mapping, Union
from logging.handlers import RotatingFileHandler

_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def setup_logging(
    level: int = logging.INFO,
    logfile: Union[str, Path, None] = None,
    max_bytes: int = 5_000_000,  # ~5 MB
    backup_count: int = 3,
    force: bool = False,
) -> None:
    """
    Configure logging for a pairvb run.

    - Console output always enabled
    - Optional rotating file log next to run artifacts
    - Second calls are ignored unless ``force`` is set
    """
    root = logging.getLogger()

    if root.handlers and not force:
        return

    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(_FORMAT)
    root.setLevel(level)

    console = logging.StreamHandler()
    console.setLevel(level)
    console.setFormatter(formatter)
    root.addHandler(console)

    if logfile is not None:
        logfile = Path(logfile)
        logfile.parent.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            logfile,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding="utf-8",
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    # numeric libraries are chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(max(level, logging.WARNING))
    logging.getLogger("h5py").setLevel(max(level, logging.WARNING))


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def format_fields(values: Mapping[str, Any]) -> str:
    """
    Render a flat mapping as ``key1=value1 | key2=value2 | ...``.

    Floats use ``%.6g`` so logged configurations stay readable.
    """
    parts = []
    for key, value in values.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.6g}")
        else:
            parts.append(f"{key}={value}")
    return " | ".join(parts)
