"""Exception types raised by the solver library."""


class FracFlowError(Exception):
    """Base class for all library errors."""


class PartitionError(FracFlowError, ValueError):
    pass


class NonMonotone(PartitionError):
    pass


class BadOrigin(PartitionError):
    pass


class BadCount(PartitionError):
    pass


class BadHorizon(PartitionError):
    pass


class OutOfRange(FracFlowError, ValueError):
    pass


class BadIndex(FracFlowError, IndexError):
    pass


class BadOrder(FracFlowError, ValueError):
    pass


class BadExponent(FracFlowError, ValueError):
    pass


class DimensionMismatch(FracFlowError, ValueError):
    pass


class Unsupported(FracFlowError, ValueError):
    pass


class NoConvergence(FracFlowError, RuntimeError):
    pass


class IllPosed(FracFlowError, ValueError):
    pass


class NotDifferentiable(FracFlowError, ValueError):
    pass


class DomainEscape(FracFlowError, ValueError):
    pass


class StepConditionViolated(FracFlowError, ValueError):
    pass


class ProxFailure(FracFlowError, RuntimeError):
    """A resolvent solve failed at step ``n``."""

    def __init__(self, n: int, cause: Exception):
        super().__init__(f"prox solve failed at step {n}: {cause}")
        self.n = n
        self.cause = cause


class FloorReached(FracFlowError, RuntimeError):
    pass


class StepBudget(FracFlowError, RuntimeError):
    pass


class ConfigError(FracFlowError, ValueError):
    pass
