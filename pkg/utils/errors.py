"""
Error module for the RPC fitter.
This module defines the exception hierarchy and the exit-code table used by the CLI.
"""

from typing import Any, Dict, Optional


class RpcFitError(Exception):
    """
    Base class for all errors raised by the RPC fitter.
    """

    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        """
        Serialize the error as a status dictionary.

        Returns:
            Dictionary with status, message and error name
        """
        return {
            "status": "error",
            "message": str(self),
            "error": type(self).__name__,
        }


class ConfigurationError(RpcFitError):
    exit_code = 2


class ParseError(RpcFitError):
    exit_code = 4

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class MissingKey(RpcFitError):
    exit_code = 4

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing key {name}")


class NonPositiveScale(RpcFitError):
    exit_code = 5

    def __init__(self, scale: float):
        self.scale = scale
        super().__init__(f"scale must be strictly positive, got {scale!r}")


class InvalidSpec(RpcFitError):
    exit_code = 5


class TooFewPoints(RpcFitError):
    exit_code = 5

    def __init__(self, n: int, required: int):
        self.n = n
        self.required = required
        super().__init__(f"{n} points given, at least {required} required")


class DegenerateGeometry(RpcFitError):
    exit_code = 5


class NumericalFailure(RpcFitError):
    exit_code = 6


class DenominatorNearZero(NumericalFailure):
    def __init__(self, where: Any, value: float):
        self.where = where
        self.value = value
        super().__init__(f"denominator near zero at {where}: {value!r}")


class NoConvergence(NumericalFailure):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e} px)")


class DegenerateSpectrum(NumericalFailure):
    def __init__(self, sigma_min: float, sigma_max: float):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(f"rank-deficient design matrix (sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e})")


class DegenerateFit(NumericalFailure):
    pass


class ProjectionError(RpcFitError):
    """
    Common parent of sensor projection failures.
    """

    exit_code = 7


class OutOfBounds(ProjectionError):
    pass


class BehindCamera(ProjectionError):
    pass


class NoAcquisition(ProjectionError):
    pass


class SensorProjectionError(ProjectionError):
    def __init__(self, index: int, cause: Optional[BaseException] = None):
        self.index = index
        self.cause = cause
        super().__init__(f"sensor failed to project point {index}: {cause}")


# Exit codes for failures that are not RpcFitError instances
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to its documented exit code.

    Args:
        error: Raised exception

    Returns:
        Process exit code
    """
    if isinstance(error, RpcFitError):
        return error.exit_code
    if isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError)):
        return EXIT_IO
    return EXIT_UNEXPECTED


def error_response(error: BaseException, context: str = "") -> Dict[str, Any]:
    """
    Status dictionary for a failed operation, carrying the error name and its exit code.

    Args:
        error: Raised exception
        context: Optional prefix for the message

    Returns:
        Dictionary with status, message, error and exit_code
    """
    message = f"{context}: {str(error)}" if context else str(error)
    return {
        "status": "error",
        "message": message,
        "error": type(error).__name__,
        "exit_code": exit_code_for(error),
    }
