"""Exception hierarchy used across the package."""


class EngineCoolError(Exception):
    """Base class for all package errors."""


class DomainError(EngineCoolError, ValueError):
    """An argument lies outside the domain of a physical law."""


class ConfigurationError(EngineCoolError, ValueError):
    """Invalid or inconsistent parameters, detected before a run starts."""


class ConvergenceError(EngineCoolError, RuntimeError):
    """An iterative solve did not converge."""


class SimulationError(EngineCoolError, RuntimeError):
    """A lap simulation produced a non-finite state and was aborted.

    Attributes
    ----------
    time : float
        Simulation time (s) of the first offending step.
    """

    def __init__(self, message, time=float("nan")):
        super().__init__(message)
        self.time = time


class TraceMismatchError(EngineCoolError, ValueError):
    """Two results that must share a lap trace do not."""


class SweepError(EngineCoolError, RuntimeError):
    """A parameter sweep has no usable points."""
