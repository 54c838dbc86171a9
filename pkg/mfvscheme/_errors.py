"""
* Errors
"""
# Standard Library Imports
from typing import Optional, Sequence

# Third Party Imports
from numpy.linalg import LinAlgError

"""
* Exit Codes
"""

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

"""
* Base Error
"""


class MFVError(Exception):
    """Base class for every error raised by mfvscheme.

    Attributes:
        category: Machine-readable error category printed by the CLI.
        exit_code: Process exit code used by the CLI.
    """
    category: str = 'error'
    exit_code: int = EXIT_NUMERICAL


"""
* Usage Errors
"""


class ConfigError(MFVError, ValueError):
    """Invalid command line or config file value."""
    category = 'config'
    exit_code = EXIT_USAGE


class OracleSizeError(MFVError, ValueError):
    """The dense saddle-point oracle was asked for a system above its size guard."""
    category = 'oracle-size'
    exit_code = EXIT_USAGE


"""
* Validation Errors
"""


class GeometryError(MFVError, ValueError):
    """Invalid polygon or segment."""
    category = 'geometry'
    exit_code = EXIT_VALIDATION


class MeshValidationError(MFVError, ValueError):
    """A mesh fails the admissibility checks.

    Args:
        message: Error description.
        cells: Offending cell indices, if known.
    """
    category = 'validation'
    exit_code = EXIT_VALIDATION

    def __init__(self, message: str, cells: Optional[Sequence[int]] = None):
        self.cells: list[int] = sorted(set(int(c) for c in cells)) if cells else []
        if self.cells:
            shown = ', '.join(str(c) for c in self.cells[:20])
            more = f" (+{len(self.cells) - 20} more)" if len(self.cells) > 20 else ''
            message = f"{message} [cells: {shown}{more}]"
        super().__init__(message)


class MeshFormatError(MeshValidationError):
    """A mesh or solution file could not be parsed.

    Args:
        message: Error description.
        line: One-based line number of the offending line.
        field: Name of the offending field, if any.
    """
    category = 'format'

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ProblemDefinitionError(MFVError, ValueError):
    """Invalid continuous problem data."""
    category = 'problem'
    exit_code = EXIT_VALIDATION


"""
* Numerical Errors
"""


class NotSPDError(MFVError, LinAlgError):
    """A factorization met a non-positive pivot.

    Args:
        message: Error description.
        pivot: Index of the failing pivot.
    """
    category = 'not-spd'
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, pivot: Optional[int] = None):
        self.pivot = pivot
        super().__init__(message if pivot is None else f"{message} (pivot {pivot})")


class LocalSystemError(MFVError, ArithmeticError):
    """A cell matrix could not be factorized.

    Args:
        message: Error description.
        cell: Index of the failing cell.
    """
    category = 'local-system'
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, cell: Optional[int] = None):
        self.cell = cell
        super().__init__(message if cell is None else f"cell {cell}: {message}")


class NonConvergenceError(MFVError, ArithmeticError):
    """An iterative solve stopped before reaching its tolerance.

    Args:
        message: Error description.
        residual: Relative residual at exit.
        iterations: Iterations performed.
    """
    category = 'non-convergence'
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")


__all__ = [
    'EXIT_SUCCESS', 'EXIT_USAGE', 'EXIT_VALIDATION', 'EXIT_NUMERICAL',
    'MFVError', 'ConfigError', 'OracleSizeError', 'GeometryError', 'MeshValidationError',
    'MeshFormatError', 'ProblemDefinitionError', 'NotSPDError', 'LocalSystemError', 'NonConvergenceError'
]
