"""Exception hierarchy shared across the package.

Each class carries the process exit code the command-line front end maps it
to, so callers deep in the stack never need to know about the CLI.
"""


class MTLError(Exception):
    exit_code = 1


class ConfigError(MTLError, ValueError):
    exit_code = 2


class DimensionError(MTLError, ValueError):
    exit_code = 2


class UsageError(MTLError, ValueError):
    exit_code = 2


class RegistryError(MTLError, KeyError):
    exit_code = 2

    def __str__(self):
        # KeyError repr-quotes its message; keep it readable
        return str(self.args[0]) if self.args else ""


class DataError(MTLError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ChecksumError(DataError):
    pass


class CalibrationError(DataError, ValueError):
    pass


class NumericError(MTLError, ArithmeticError):
    exit_code = 4
