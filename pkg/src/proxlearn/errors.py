"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ProxLearnError(Exception):
    exit_code = 1


class ConfigError(ProxLearnError, ValueError):
    exit_code = 2


class NumericalError(ProxLearnError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class DataError(ProxLearnError, ValueError):
    """Malformed or inconsistent input file / array shapes."""

    exit_code = 4
