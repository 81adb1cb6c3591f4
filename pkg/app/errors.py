"""Exceptions raised by the simulator. Library code raises, the CLI maps them to exit codes."""


class SimulationError(Exception):
    """Base class for every error raised by this package."""


class QubitIndexError(SimulationError, IndexError):
    pass


class NonUnitaryError(SimulationError, ValueError):
    pass


class CapacityError(SimulationError):
    """Register would exceed the dense-representation limit."""


class NormDriftError(SimulationError):
    """Norm deviates far beyond rounding drift; indicates a bug rather than noise."""


class DegenerateBranchError(SimulationError):
    def __init__(self, message: str, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class DimensionMismatchError(SimulationError, ValueError):
    pass


class InvalidParameterError(SimulationError, ValueError):
    pass


class PatternError(SimulationError, ValueError):
    pass


class VerificationError(SimulationError):
    """A closed-form result disagrees with brute-force simulation."""


class StateFileError(SimulationError):
    pass


class ReportWriteError(SimulationError):
    pass
