"""Exception types raised by the package."""


class StructureError(ValueError):
    """Shapes, ranks or dimensions are inconsistent."""


class ConfigurationError(ValueError):
    """A parameter lies outside its admissible range."""


class SolverAbort(RuntimeError):
    """An iterative solver stopped before completion.

    ``trace`` holds the telemetry recorded up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class RetractionError(SolverAbort):
    """Polar retraction received a (numerically) rank-deficient matrix."""
