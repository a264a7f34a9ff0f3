"""Exception types raised by privpca."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class OutOfRangeError(ValueError):
    """A privacy parameter lies outside the range a mechanism is valid for."""


class InsufficientSamplesError(ValueError):
    """Too few samples for the requested number of subsets or batches."""


class EstimationFailedError(RuntimeError):
    """A private estimator released nothing (every histogram bin was suppressed)."""
