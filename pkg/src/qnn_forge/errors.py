"""Exception types shared across the package."""


class QnnForgeError(Exception):
    pass


class InvalidInputError(QnnForgeError, ValueError):
    pass


class DimensionError(QnnForgeError, ValueError):
    pass


class InvalidObservableError(QnnForgeError, ValueError):
    pass


class NotADAGError(QnnForgeError, ValueError):
    """Raised when a graph contains a directed cycle.

    ``vertex`` names one vertex that lies on the cycle.
    """

    def __init__(self, vertex, msg=None):
        self.vertex = vertex
        super().__init__(msg or f"graph has a cycle through vertex {vertex}")


class UnknownVertexError(QnnForgeError, KeyError):
    pass


class NumericError(QnnForgeError, ArithmeticError):
    pass


class TraceError(QnnForgeError, ValueError):
    """Corrupt, empty or incomplete round trace."""
