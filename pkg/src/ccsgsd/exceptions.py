"""Exception hierarchy.

Input problems subclass ``ValueError`` and numerical failures subclass
``RuntimeError`` so callers that only know the builtins still catch them.
"""


class CCSError(Exception):
    """Base class for all package errors."""


class InputError(CCSError, ValueError):
    """Invalid user input (configuration, information tables, statistics)."""


class CorrelationError(InputError):
    """A correlation matrix is not symmetric, unit-diagonal or PSD."""


class NestingError(InputError):
    """Information counts violate population nesting or monotonicity."""


class DataError(InputError):
    """Observed analysis data inconsistent with earlier analyses."""


class SequencingError(InputError):
    """Statistics supplied for analyses whose bounds are not finalized."""


class NumericalError(CCSError, RuntimeError):
    """A root-finding bracket failed or an integral could not be resolved."""
