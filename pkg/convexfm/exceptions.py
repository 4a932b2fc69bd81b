from typing import Any


class CfmError(Exception):
    """Base class of every exception raised by ``convexfm``."""


class ContractError(CfmError, ValueError):
    """Raised when an operation is called with arguments that violate its
    preconditions, for example vectors of the wrong length."""


class InputError(CfmError, ValueError):
    """Raised when the data itself is unusable (non-finite targets, empty
    datasets and so on)."""


class ParseError(InputError):
    """An exception that is raised when a data file cannot be parsed.

    The offending location is accessible in the attributes ``path`` and
    ``line``.

    :ivar path: The file being parsed, if any.
    :ivar line: The 1-based line number, if known.
    """
    def __init__(self, *args, path: str | None = None,
                 line: int | None = None):
        if line is not None:
            args = (f"{path or '<input>'}:{line}: {args[0]}", *args[1:]) \
                if args else (f"{path or '<input>'}:{line}",)
        super().__init__(*args)
        self.path = path
        self.line = line


class NumericalError(CfmError, ArithmeticError):
    """Raised when a solver produces non-finite values.

    :ivar diagnostics: Whatever state was available when the failure was
        detected (iteration, objective, ...).
    """
    def __init__(self, *args, diagnostics: dict[str, Any] | None = None):
        super().__init__(*args)
        self.diagnostics = diagnostics or {}


class IncompleteError(CfmError):
    """Raised when required fields are missing, such as command line
    options or arrays in a model file.

    :ivar missing: The names of the missing fields.
    """
    def __init__(self, missing):
        super().__init__(f"{', '.join(missing)} not specified")
        self.missing = missing


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap."""
