"""
Exception hierarchy for the spectral series toolkit
Each error carries the process exit code the CLI reports for it
"""

from typing import List, Tuple

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class SpectralError(Exception):
    """Base class for every error raised by the library"""
    exit_code = EXIT_NUMERICAL


class InputError(SpectralError, ValueError):
    """Invalid samples, points, dimensions or arguments"""
    exit_code = EXIT_DATA


class ConfigError(SpectralError):
    """Invalid run configuration or command-line usage"""
    exit_code = EXIT_USAGE


class NumericalError(SpectralError):
    exit_code = EXIT_NUMERICAL


class DegenerateKernelError(NumericalError):
    """Every Gram eigenvalue fell below the floor (bandwidth far too small or too large)"""


class SelectionError(NumericalError):
    """No configuration of a tuning grid could be fitted"""

    def __init__(self, message: str, failures: List[Tuple[object, str]]):
        details = "; ".join(f"{config}: {reason}" for config, reason in failures)
        super().__init__(f"{message} ({details})" if details else message)
        self.failures = failures


class ModelFileError(SpectralError):
    exit_code = EXIT_DATA


class CorruptModelFileError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


class MonotonicityError(NumericalError):
    """A convergence study's mean metric moved the wrong way across the size grid"""
