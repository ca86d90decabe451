"""
Error classes for qfi-bell
"""
from typing import Any, Dict, Optional


class QfiBellError(Exception):
    """Base class for qfi-bell errors."""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details


class ValidationError(QfiBellError):
    """Error for input validation failures."""
    pass


class DimensionMismatchError(QfiBellError):
    """Error for states and operators living on different spaces."""
    pass


class InvalidStateError(QfiBellError):
    """Error for amplitudes or density matrices that are not valid states."""
    pass


class NonHermitianError(QfiBellError):
    """Error for matrices that should be Hermitian but are not."""
    pass


class DegenerateOperatorError(QfiBellError):
    """Error for operators with vanishing variance or norm."""
    pass


class UndefinedSqueezingError(QfiBellError):
    """Error for quantities that need a finite squeezing parameter."""
    pass


class SizeLimitError(QfiBellError):
    """Error for full-space computations beyond the supported party count."""
    pass


class EnumerationBudgetError(QfiBellError):
    """Error for strategy enumerations that exceed the class budget."""
    def __init__(self, message: str, classes: int, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.classes = classes


class SpecParseError(QfiBellError):
    """Error for state specs and ranges that cannot be parsed."""
    def __init__(self, message: str, token: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.token = token


class VerificationError(QfiBellError):
    """Error for oracle cross-checks that disagree beyond tolerance."""
    pass


# Exit codes of the command line driver
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_VERIFY = 3
EXIT_IO = 4


def is_qfi_bell_error(error: Exception) -> bool:
    """Check if an exception is a qfi-bell error."""
    return isinstance(error, QfiBellError)


def exit_code_for(error: Exception) -> int:
    """
    Map an exception onto the exit code of the command line driver.

    Args:
        error: The exception raised while running a command

    Returns:
        Process exit code
    """
    if isinstance(error, (SpecParseError, ValidationError)):
        return EXIT_PARSE
    elif isinstance(error, VerificationError):
        return EXIT_VERIFY
    elif isinstance(error, OSError):
        return EXIT_IO
    else:
        return EXIT_FAILURE
