"""
Pieces shared by every pairvb command: flags, config resolution and the
error contract (one ``error=<Class> message=<text>`` line on stderr,
exit status 1).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Callable

from pairvb.config import load_config
from pairvb.core.errors import ConfigError, PairVBError
from pairvb.core.model import HYPER_DEFAULTS, Hyperparams
from pairvb.core.training import TrainConfig
from pairvb.utils.logging import format_fields, get_logger, setup_logging

log = get_logger(__name__)

_TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))

# flag dest -> hyperparameter name
_HYPER_FLAGS = {
    "k": "k",
    "ratio": "ratio",
    "tau_u": "tau_u",
    "tau_v": "tau_v",
    "tau_b": "tau_b",
    "alpha0": "alpha0",
    "beta0": "beta0",
    "sweeps": "sweeps",
    "init_std": "init_std",
}


# =============================================================================
# Flags
# =============================================================================

def add_logging_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity (default: INFO)",
    )
    parser.add_argument(
        "--logfile",
        type=Path,
        default=None,
        help="Optional rotating log file",
    )


def add_model_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    d = HYPER_DEFAULTS

    group.add_argument("--k", type=int, default=None, help=f"Latent dimensionality (default: {d['k']})")
    group.add_argument("--ratio", type=float, default=None, help=f"Censoring ratio r in D' = rD (default: {d['ratio']})")
    group.add_argument("--tau-u", type=float, default=None, help=f"User trait prior precision (default: {d['tau_u']})")
    group.add_argument("--tau-v", type=float, default=None, help=f"Item trait prior precision (default: {d['tau_v']})")
    group.add_argument("--tau-b", type=float, default=None, help=f"Bias prior precision (default: {d['tau_b']})")
    group.add_argument("--alpha0", type=float, default=None, help=f"User Dirichlet concentration (default: {d['alpha0']})")
    group.add_argument("--beta0", type=float, default=None, help=f"Item Dirichlet concentration (default: {d['beta0']})")
    group.add_argument("--sweeps", type=int, default=None, help=f"Number of sweeps (default: {d['sweeps']})")
    group.add_argument("--init-std", type=float, default=None, help=f"Std of initial trait means (default: {d['init_std']})")
    group.add_argument(
        "--sequential-traits",
        action="store_true",
        default=None,
        help="Per-dimension trait updates instead of the bulk solve",
    )
    group.add_argument(
        "--fixed-energy-categorical",
        action="store_true",
        default=None,
        help="Evaluate the s/t updates with zero pair energies",
    )


def add_run_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run")
    group.add_argument("--tol", type=float, default=None, help="Stop when the relative ELBO change drops below this (default: off)")
    group.add_argument("--seed", type=int, default=None, help="Random seed (default: 0)")
    group.add_argument("--threads", type=int, default=None, help="Worker threads (default: 1)")
    group.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Fixed reduction order everywhere (default: on)",
    )
    group.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON or YAML file with defaults for any of the flags above",
    )


# =============================================================================
# Resolution
# =============================================================================

def resolve_config(args: argparse.Namespace) -> tuple[Hyperparams, TrainConfig]:
    """defaults < --config file < explicit flags."""
    hyper_values: dict[str, Any] = dict(HYPER_DEFAULTS)
    train_values: dict[str, Any] = {}

    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    for key, value in file_values.items():
        key = key.replace("-", "_")
        if key in HYPER_DEFAULTS:
            hyper_values[key] = value
        elif key in _TRAIN_KEYS:
            train_values[key] = value
        else:
            raise ConfigError(f"Unknown configuration key {key!r} in {args.config}")

    for dest, name in _HYPER_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            hyper_values[name] = value

    if getattr(args, "sequential_traits", None):
        hyper_values["bulk_trait_update"] = False
    if getattr(args, "fixed_energy_categorical", None):
        hyper_values["fixed_energy_categorical"] = True

    for key in ("tol", "seed", "threads", "deterministic"):
        value = getattr(args, key, None)
        if value is not None:
            train_values[key] = value

    hyper = Hyperparams.from_dict(hyper_values)
    try:
        train = TrainConfig(**train_values)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    return hyper, train


def log_resolved(title: str, values: dict[str, Any]) -> None:
    log.info("=== %s ===", title)
    log.info(format_fields(values))


# =============================================================================
# Entry-point wrapper
# =============================================================================

def run_command(body: Callable[[argparse.Namespace], None], args: argparse.Namespace) -> int:
    setup_logging(level=getattr(logging, args.level), logfile=args.logfile)

    try:
        body(args)
        return 0

    except (PairVBError, OSError) as e:
        log.error("%s failed: %s", body.__module__, e, exc_info=True)
        print(f"error={type(e).__name__} message={e}", file=sys.stderr)
        return 1

    except Exception:
        log.error("%s failed", body.__module__, exc_info=True)
        raise
