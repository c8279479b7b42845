"""Exception hierarchy shared by all modules.

Model errors (bad netlists, forbidden topologies) and numerical failures
(instability, missing stationary state, quadrature trouble) are kept apart
so that front ends can map them to distinct exit codes.
"""


class RLCError(Exception):
    """Base class for every error raised by the package."""


class ModelError(RLCError, ValueError):
    """The circuit description is invalid or unsupported."""


class NetlistError(ModelError):
    """Syntax or semantic error in a netlist.

    Parameters
    ----------
    message : str
        Human readable description.
    line, column : int, optional
        1-based position of the offending token.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class TopologyError(ModelError):
    """Structural problem with the circuit graph."""


class DisconnectedGraphError(TopologyError):
    """The circuit graph has more than one connected component."""


class ConditionViolation(TopologyError):
    """No normal tree exists.

    Attributes
    ----------
    condition : str
        ``"i"`` for a loop made only of capacitors and voltage sources,
        ``"ii"`` for a cut-set made only of inductors and current sources.
    elements : tuple of str
        Names of the offending elements.
    """

    def __init__(self, condition: str, elements, message: str):
        self.condition = condition
        self.elements = tuple(elements)
        super().__init__(message)


class InconsistentTopologyError(TopologyError):
    """Local heat currents are ill defined because Q_RR is nonzero."""


class NumericalError(RLCError, ArithmeticError):
    """A numerical procedure failed."""


class InstabilityError(NumericalError):
    """The dynamics blew up (non-finite values or runaway norm)."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        super().__init__(message)


class NoStationaryState(NumericalError):
    """The drift matrix is not Hurwitz, so no stationary state exists."""


class QuadratureError(NumericalError):
    """Adaptive frequency quadrature did not converge."""


class TruncationWarning(UserWarning):
    """Fourier truncation may be too small for the requested accuracy."""
