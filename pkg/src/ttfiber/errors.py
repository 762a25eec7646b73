"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: pattern validation failures are 2,
identifiability failures are 3, file/format problems are 4.
"""


class CompletionError(Exception):
    """Base class for every error this package raises deliberately."""


class PatternValidationError(CompletionError):
    """An observation pattern failed the pre-completion condition checks."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IdentifiabilityError(CompletionError):
    """The observed data does not pin down the quantity being estimated.

    ``split`` names the unfolding at which estimation failed, when known.
    """

    def __init__(self, message, split=None):
        super().__init__(message)
        self.split = split


class InsufficientFibersError(IdentifiabilityError):
    """Fewer observed fibers than the rank of the last unfolding."""


class RankDeficientError(IdentifiabilityError):
    """A linear system that must have full column rank does not.

    ``slice_index`` names the offending slice when raised while recovering
    the next-to-last core.
    """

    def __init__(self, message, split=None, slice_index=None):
        super().__init__(message, split=split)
        self.slice_index = slice_index


class FormatError(CompletionError):
    """A container file is malformed or inconsistent."""


class MaskMismatchError(FormatError):
    """NaN entries of a dense tensor disagree with the stated fiber pattern."""
