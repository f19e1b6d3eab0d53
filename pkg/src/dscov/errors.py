"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DscovError(Exception):
    """Base class for all package errors."""


class InputError(DscovError, ValueError):
    """Malformed or out-of-contract input (bad edges, shapes, non-PSD data)."""


class NotChordalError(InputError):
    """Raised when a graph fails the chordality test.

    Attributes
    ----------
    cycle : tuple of int
        A chordless cycle of length >= 4 (0-based vertex labels) proving
        the graph is not chordal.
    """

    def __init__(self, cycle, message=None):
        self.cycle = tuple(int(v) for v in cycle)
        if message is None:
            message = "graph is not chordal; chordless cycle " + "-".join(
                str(v + 1) for v in self.cycle
            )
        super().__init__(message)


class SingularBlockError(DscovError, ArithmeticError):
    """A clique or separator block is singular (or not positive definite
    where positive definiteness is required)."""

    def __init__(self, vertices, message=None):
        self.vertices = tuple(int(v) for v in vertices)
        if message is None:
            message = "singular block on vertices {" + ",".join(
                str(v + 1) for v in self.vertices
            ) + "}"
        super().__init__(message)


class ConsistencyError(InputError):
    """Clique blocks of a partial matrix disagree on a shared separator."""


class InsufficientDataError(InputError):
    """Too few observations for the requested statistic."""
