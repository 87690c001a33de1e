"""Exception hierarchy shared across the package.

Three failure classes map onto the CLI exit codes: bad arguments or
malformed parameter values (exit 2), unreadable or inconsistent market
data (exit 3), and numerical breakdown inside a solver (exit 4).
"""

from __future__ import annotations


class DrTrackError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DrTrackError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class DataError(DrTrackError):
    """Market data is missing, malformed, or internally inconsistent."""


class NumericalError(DrTrackError):
    """A numerical routine failed to produce a usable result."""
