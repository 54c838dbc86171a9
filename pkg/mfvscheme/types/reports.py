"""
* Types: Reports
"""
# Standard Library Imports
from typing import Optional, TypedDict
from typing_extensions import NotRequired

# Third Party Imports
import numpy as np
from numpy.typing import NDArray

"""
* Mesh Reports
"""


class MeshSummary(TypedDict):
    """Object representing the counts and metrics of a mesh."""
    cells: int
    edges: int
    interior_edges: int
    boundary_edges: int
    max_cell_edges: int
    size: float
    regularity: float
    domain_area: float


"""
* Solver Reports
"""


class SolverStats(TypedDict):
    """Object representing the diagnostics of one linear solve."""
    method: str
    unknowns: int
    nnz: int
    iterations: int
    residual: float
    factor_nnz: NotRequired[int]
    ordering: NotRequired[str]
    refinements: NotRequired[int]


class SchemeResiduals(TypedDict):
    """Object representing the scaled residuals of the scheme equations on a solution."""
    conservativity: float
    balance: float
    gradient: float
    trace: float


class SolveDiagnostics(TypedDict):
    """Object representing everything reported by one end-to-end solve."""
    solver: SolverStats
    residuals: SchemeResiduals
    seconds: float


"""
* Error Reports
"""


class ErrorReport(TypedDict):
    """Object representing the error of a discrete solution against an exact one."""
    e2_u: float
    e2_grad: float
    u_min: float
    u_max: float
    h: float
    cells: int
    regularity: float
    per_cell_e: NotRequired[NDArray[np.float64]]


class ConvergenceOrders(TypedDict):
    """Object representing fitted and pairwise convergence orders, None where undefined."""
    order_u: Optional[float]
    order_grad: Optional[float]
    pairwise_u: list[Optional[float]]
    pairwise_grad: list[Optional[float]]
