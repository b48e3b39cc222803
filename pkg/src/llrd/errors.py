"""Exception hierarchy shared by all modules."""


class LlrdError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LlrdError):
    """A value object failed its construction invariants."""


class AlphabetMismatchError(ValidationError):
    """Two objects were combined whose alphabets do not line up."""


class InfeasibleError(LlrdError):
    """A requested operating point lies outside the feasible set."""


class InapplicableError(LlrdError):
    """The requested method's preconditions fail for this problem.

    Raised e.g. when the single-parameter dual form has an empty
    feasibility set.
    """


class ConvergenceError(LlrdError):
    """An iterative solver could not reach its tolerance."""
