"""Exception hierarchy shared by all indisketch modules.

Exit-code mapping used by the command line front end:
input errors -> 1, configuration errors -> 2, budget errors -> 3,
anything else -> 4.
"""


class IndisketchError(Exception):
    """Base class for all library errors."""


class MalformedInputError(IndisketchError):
    """A stream record is malformed (wrong arity, non-integer, out of range).

    Carries the 1-based record or line index when known.
    """

    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class EmptyStreamError(IndisketchError):
    """An operation that requires at least one tuple saw an empty stream."""


class BudgetExceededError(IndisketchError):
    """A dense materialization would exceed the configured entry budget."""


class ConfigurationError(IndisketchError):
    """Parameters violate a precondition (bad epsilon, too few repetitions, ...)."""


class MergeIncompatibleError(IndisketchError):
    """Two sketch states were built with different configuration or randomness."""


class SubAlgorithmError(IndisketchError):
    """A sub-estimator failed; the message carries round/level context."""
