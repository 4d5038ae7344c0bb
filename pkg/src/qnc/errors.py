"""Exception hierarchy shared across the package.

The CLI maps each class to its own exit code, so new failure modes should
subclass the closest existing type rather than raising bare ``ValueError``.
"""


class QncError(Exception):
    """Base class for all package errors."""


class ZeroVectorError(QncError, ValueError):
    """A vector with zero norm cannot be amplitude-encoded."""


class DimensionError(QncError, ValueError):
    """Vector or circuit dimensions do not satisfy an operation's contract."""


class CircuitError(QncError, ValueError):
    """Malformed circuit, or a gate kind an operation does not support."""


class MitigationStarvationError(QncError, RuntimeError):
    """Post-selection kept no shots, so no mitigated estimate exists."""


class InfeasibleSpecError(QncError, ValueError):
    """A synthetic-data request could not be satisfied within the rejection budget."""


class DatasetFormatError(QncError, ValueError):
    """A dataset file is malformed (bad header, magic number, row length, ...)."""
