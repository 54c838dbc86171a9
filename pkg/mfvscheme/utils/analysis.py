"""
* Utils: Error Analysis
"""
# Standard Library Imports
from dataclasses import dataclass, field
from logging import getLogger
from typing import Optional, Sequence

# Third Party Imports
import numpy as np
from numpy.typing import NDArray
from scipy.stats import linregress

# Local Imports
from mfvscheme._errors import ProblemDefinitionError
from mfvscheme.types.reports import ConvergenceOrders, ErrorReport
from mfvscheme.utils.mesh import Mesh
from mfvscheme.utils.problem import ProblemCase, mesh_quadrature
from mfvscheme.utils.scheme import Solution

"""
* Error Norms
"""


def exact_sup_norm(mesh: Mesh, case: ProblemCase) -> float:
    """‖ū‖_{L∞(Ω)} sampled at the vertices, cell points, edge centers and quadrature points."""
    if case.exact is None:
        raise ProblemDefinitionError(f"Case '{case.name}' has no exact solution")
    pts, _, _ = mesh_quadrature(mesh, quad_order=4)
    samples = np.concatenate([
        np.concatenate([c.polygon.vertices for c in mesh.cells]),
        mesh.cell_points, mesh.edge_centers, pts])
    return float(np.max(np.abs(case.exact.value(samples))))


def cell_errors(mesh: Mesh, solution: Solution, case: ProblemCase) -> NDArray[np.float64]:
    """e_K = |u_K − ū(x_K)| / ‖ū‖_{L∞(Ω)} per cell, unnormalized if ū vanishes.

    Raises:
        ProblemDefinitionError: If the case has no exact solution.
    """
    if case.exact is None:
        raise ProblemDefinitionError(f"Case '{case.name}' has no exact solution")
    diff = np.abs(solution.u - case.exact.value(mesh.cell_points))
    sup = exact_sup_norm(mesh, case)
    return diff / sup if sup > 0.0 else diff


def error_report(mesh: Mesh, solution: Solution, case: ProblemCase, per_cell: bool = False) -> ErrorReport:
    """Discrete L² errors of u and v against the exact solution, evaluated at x_K.

    Args:
        mesh: Discretization.
        solution: Discrete solution on the mesh.
        case: Problem with an exact solution.
        per_cell: Also return the normalized per-cell error field.

    Returns:
        Error report with the solution extrema and mesh metrics.

    Raises:
        ProblemDefinitionError: If the case has no exact solution.
    """
    if case.exact is None:
        raise ProblemDefinitionError(f"Case '{case.name}' has no exact solution")
    x = mesh.cell_points
    areas = mesh.cell_areas
    du = solution.u - case.exact.value(x)
    dv = solution.v - case.exact.gradient(x)
    report = ErrorReport(
        e2_u=float(np.sqrt(np.sum(areas * du ** 2))),
        e2_grad=float(np.sqrt(np.sum(areas * np.einsum('ki,ki->k', dv, dv)))),
        u_min=float(np.min(solution.u)),
        u_max=float(np.max(solution.u)),
        h=float(mesh.size),
        cells=mesh.n_cells,
        regularity=float(mesh.regularity))
    if per_cell:
        report['per_cell_e'] = cell_errors(mesh, solution, case)
    return report


"""
* Convergence Orders
"""


@dataclass
class ConvergenceTable:
    """Object representing the errors of a refinement series, kept sorted by decreasing h."""
    rows: list[tuple[str, ErrorReport]] = field(default_factory=list)

    def add(self, label: str, report: ErrorReport) -> None:
        """Adds a row, keeping the order by decreasing mesh size."""
        self.rows.append((label, report))
        self.rows.sort(key=lambda r: -r[1]['h'])

    @property
    def sizes(self) -> NDArray[np.float64]:
        return np.array([r['h'] for _, r in self.rows])

    def errors(self, key: str) -> NDArray[np.float64]:
        """Column `e2_u` or `e2_grad`."""
        return np.array([r[key] for _, r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)


def _orders(h: NDArray[np.float64], e: NDArray[np.float64], name: str) -> tuple[Optional[float], list[Optional[float]]]:
    log = getLogger(__name__)
    if len(h) < 2:
        log.warning(f"Order of {name} is undefined with fewer than 2 rows")
        return None, []
    pairwise: list[Optional[float]] = []
    for i in range(len(h) - 1):
        if e[i] > 0.0 and e[i + 1] > 0.0 and h[i] != h[i + 1]:
            pairwise.append(float(np.log(e[i] / e[i + 1]) / np.log(h[i] / h[i + 1])))
        else:
            pairwise.append(None)
    if np.any(e <= 0.0) or np.all(h == h[0]):
        log.warning(f"Order of {name} is undefined: zero error or constant mesh size in the series")
        return None, pairwise
    fit = linregress(np.log(h), np.log(e))
    return float(fit.slope), pairwise


def convergence_order(table: ConvergenceTable) -> ConvergenceOrders:
    """Least-squares slopes of log E against log h, with the pairwise orders.

    Orders are None where undefined: fewer than two rows, or a zero error.
    """
    h = table.sizes
    order_u, pairwise_u = _orders(h, table.errors('e2_u'), 'u')
    order_grad, pairwise_grad = _orders(h, table.errors('e2_grad'), 'gradient')
    return ConvergenceOrders(
        order_u=order_u,
        order_grad=order_grad,
        pairwise_u=pairwise_u,
        pairwise_grad=pairwise_grad)


"""
* Table Rows
"""


def error_row(case: str, mesh_label: str, report: ErrorReport) -> dict:
    """CSV row of one solve."""
    return {
        'case': case,
        'mesh': mesh_label,
        'cells': report['cells'],
        'h': report['h'],
        'regul': report['regularity'],
        'e2_u': report['e2_u'],
        'e2_grad': report['e2_grad'],
        'u_min': report['u_min'],
        'u_max': report['u_max']}


def convergence_rows(case: str, table: ConvergenceTable, orders: Optional[ConvergenceOrders] = None) -> list[dict]:
    """CSV rows of a series, refinement rows carrying the pairwise orders against the previous row."""
    orders = orders or convergence_order(table)
    rows = []
    for i, (label, report) in enumerate(table.rows):
        row = error_row(case, label, report)
        if i > 0:
            row['order_u'] = orders['pairwise_u'][i - 1]
            row['order_grad'] = orders['pairwise_grad'][i - 1]
        rows.append(row)
    return rows


def compare_reference(value: float, reference: float) -> dict:
    """Measured value next to a published one, with their ratio."""
    return {
        'measured': float(value),
        'reference': float(reference),
        'ratio': float(value / reference) if reference else None}


def fitted_order(h: Sequence[float], e: Sequence[float]) -> Optional[float]:
    """Least-squares order of an error series, None where undefined."""
    order, _ = _orders(np.asarray(h, dtype=np.float64), np.asarray(e, dtype=np.float64), 'series')
    return order
