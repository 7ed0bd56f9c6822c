"""Exception hierarchy shared by the library and the command line."""


class ContModelError(Exception):
    """Base class for every error raised by contmodel."""


class ParseError(ContModelError):
    """Malformed formula text; ``position`` is the 0-based character offset."""

    def __init__(self, message, position=None):
        self.message = message
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ValidationError(ContModelError):
    """A formula does not conform to the signature it is used with."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SignatureError(ValidationError):
    """A term or atom is used against a model of the wrong kind."""


class EvaluationError(ContModelError):
    """Missing variables or other problems at evaluation time."""


class BudgetError(ContModelError):
    """The optimizer budget leaves fewer restarts than the minimum of one."""


class ShapeMismatchError(ContModelError):
    """A witness does not fit the quantifier or model it is replayed against."""


class PanelMismatchError(ContModelError):
    """Two fingerprints were computed on different panels or panel versions."""
