"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters; ``field`` names the offending input."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ResolutionError(RuntimeError):
    """The grid or recursion depth is too coarse for the requested quantity."""

    def __init__(self, message, suggestion=None):
        self.suggestion = suggestion
        super().__init__(message)


class NotEvaluable(RuntimeError):
    """A sup-functional was requested over an empty cube family.

    Kept distinct from a zero result: an empty window says nothing about
    whether the functional vanishes.
    """


class DisconnectedError(RuntimeError):
    """Two points lie in different grid components of the domain."""
