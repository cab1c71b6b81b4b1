"""Exception taxonomy shared across the package."""


class MSPLabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MSPLabError):
    """An element index falls outside the ground set of an oracle."""


class ContractViolationError(MSPLabError):
    """A precondition of a matroid operation was violated (e.g. contracting
    by a dependent set)."""


class CapacityError(MSPLabError):
    """A brute-force routine was asked to handle an instance above its
    enumeration cap."""


class ParameterError(MSPLabError):
    """An instance or experiment parameter is out of range."""


class ConfigurationError(MSPLabError):
    """An algorithm or policy was paired with an incompatible matroid."""


class FrameworkFaultError(MSPLabError):
    """A greedy-framework state invariant was violated."""


class AlgorithmFaultError(MSPLabError):
    """An algorithm attempted an infeasible accept. Carries the trace prefix
    up to (and including) the offending event."""

    def __init__(self, message, trace_prefix=None):
        super().__init__(message)
        self.trace_prefix = trace_prefix


class ValidityBreachError(MSPLabError):
    """A parallel-Dynkin run produced a dependent output, meaning the edge
    partition it ran on was not valid."""


class DistributionFaultError(MSPLabError):
    """A partition distribution produced an invalid partition."""


class DegenerateInstanceError(MSPLabError):
    """An estimator was asked to normalize by a zero-weight optimum."""
