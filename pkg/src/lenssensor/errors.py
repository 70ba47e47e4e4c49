"""Exception hierarchy shared by all modules.

The CLI maps these onto its exit codes: validation -> 1, I/O -> 2 (plain
``OSError``), numerical/domain -> 3.
"""


class LensSensorError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LensSensorError, ValueError):
    """Input parameters violate a documented constraint."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ParseError(ValidationError):
    """A data file does not follow its declared layout."""


class DomainError(LensSensorError, ArithmeticError):
    """A formula was evaluated outside its physical domain."""


class BracketError(DomainError):
    """Root bracket does not enclose a sign change."""
