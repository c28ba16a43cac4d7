"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class GridCascadeError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(GridCascadeError, ValueError):
    """An instance description is malformed; the message names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ImbalanceError(GridCascadeError, ValueError):
    """Power injections of some connected component do not sum to zero."""


class NumericalError(GridCascadeError, ArithmeticError):
    """A linear-algebra routine failed or a numerical guard tripped."""


class CutEdgeError(NumericalError):
    """The requested operation is undefined because the line is a cut-edge."""


class StaleVersionError(GridCascadeError):
    """A pseudo-inverse was used against a graph state it does not describe."""


class GroupingError(NumericalError):
    """Pseudo-inverse row differences did not split into exactly two clusters."""


class InfeasibleInitialStateError(GridCascadeError):
    """Pre-failure flows already exceed some capacity (strict mode only)."""


class TooLargeError(GridCascadeError):
    """An exhaustive search would exceed the configured subset cap."""


class DisconnectedEnsembleError(GridCascadeError):
    """No connected sample was drawn within the retry budget."""


class ParamRangeError(GridCascadeError, ValueError):
    """A fixture parameter lies outside the range its construction requires."""
