"""Exception classes raised by pairvb.

Each class also derives from the builtin exception a caller would
naturally catch, so ``except ValueError`` keeps working.
"""


class PairVBError(Exception):
    """Base class for all pairvb errors."""


class PairStreamError(PairVBError, ValueError):
    """Malformed or empty pair stream."""


class ContractViolation(PairVBError, ValueError):
    """A documented precondition of an operation does not hold."""


class DegenerateMassError(PairVBError, RuntimeError):
    """All categorical mass sits on observed pairs."""


class SimulationBudgetError(PairVBError, RuntimeError):
    """The simulator could not reach its target within the draw budget."""


class CheckpointError(PairVBError, ValueError):
    """Unreadable, truncated or incompatible checkpoint."""


class ConfigError(PairVBError, ValueError):
    """Invalid configuration file or flag combination."""
