"""Exceptions raised across the gass package.

Every error carries the process exit code the command-line front end
uses when it reaches the top level.
"""

from typing import List, Optional


class GassError(Exception):
    exit_code = 1


class InvalidArgumentError(GassError, ValueError):
    exit_code = 1


class ParseError(GassError):
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = f'{path}:{line}: ' if line is not None else f'{path}: '
        super().__init__(f'{where}{message}')


class ValidationError(GassError):
    exit_code = 3

    def __init__(self, message: str, violations: Optional[List] = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + '\n' + '\n'.join(
                f'  - {v}' for v in self.violations)
        super().__init__(message)


class NotFoundError(GassError, KeyError):
    exit_code = 3

    def __str__(self) -> str:
        # KeyError would quote the message
        return str(self.args[0]) if self.args else ''


class CapacityError(GassError):
    exit_code = 4
