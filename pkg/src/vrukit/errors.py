"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI reports for it:
1 for I/O problems, 2 for parse/validation failures, 3 for bad configuration.
"""

from __future__ import annotations


class VrukitError(Exception):
    exit_code = 2


class DatasetIOError(VrukitError):
    exit_code = 1


class ParseError(VrukitError, ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(VrukitError, ValueError):
    pass


class MappingError(ValidationError):
    pass


class AmbiguityError(ValidationError):
    pass


class AlignmentError(ValidationError):
    def __init__(self, message: str, offenders: list[str] | None = None) -> None:
        self.offenders = list(offenders or [])
        super().__init__(message)


class ConfigError(VrukitError, ValueError):
    exit_code = 3
