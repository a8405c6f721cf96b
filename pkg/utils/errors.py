"""Exception hierarchy shared by the simulator modules."""


class SimulatorError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidInputError(SimulatorError, ValueError):
    """An argument lies outside the physical or mathematical domain"""


class DegenerateInputError(SimulatorError):
    """The input sits on a limit where the requested quantity is undefined"""


class DimensionMismatchError(SimulatorError, ValueError):
    """Array shapes do not agree"""


class SingularMatrixError(SimulatorError):
    """A matrix that must be positive definite is not"""


class UpperBoundTooLowError(SimulatorError):
    """The SDR bisection is already feasible at its upper bound"""


class ConvergenceError(SimulatorError):
    """An iterative solver did not converge and the caller asked for strictness"""


class ConfigError(SimulatorError):
    """The configuration document is missing or invalid"""
