"""
* Tests: Error Analysis
"""
# Third Party Imports
import numpy as np
import pytest

# Local Imports
from mfvscheme._errors import ProblemDefinitionError
from mfvscheme.types.reports import ErrorReport
from mfvscheme.utils.analysis import (
    ConvergenceTable,
    cell_errors,
    compare_reference,
    convergence_order,
    convergence_rows,
    error_report,
    exact_sup_norm,
    fitted_order)
from mfvscheme.utils.generators import gen_uniform_squares
from mfvscheme.utils.scheme import Solution, solve_mfv


def report(h: float, e2_u: float, e2_grad: float) -> ErrorReport:
    return ErrorReport(e2_u=e2_u, e2_grad=e2_grad, u_min=0.0, u_max=1.0, h=h, cells=1, regularity=8.0)


def exact_solution(mesh, case) -> Solution:
    """Discrete solution equal to the exact one at the cell points."""
    x = mesh.cell_points
    return Solution(
        u=case.exact.value(x),
        v=case.exact.gradient(x),
        flux=np.zeros(len(mesh.incidence_edge)),
        traces=case.exact.value(mesh.edge_centers))


"""
* Convergence Orders
"""


class TestConvergenceOrder:

    def test_second_order_pair(self):
        table = ConvergenceTable()
        table.add('coarse', report(0.1, 1e-2, 1e-1))
        table.add('fine', report(0.05, 2.5e-3, 5e-2))
        orders = convergence_order(table)
        assert orders['order_u'] == pytest.approx(2.0)
        assert orders['order_grad'] == pytest.approx(1.0)
        assert orders['pairwise_u'] == [pytest.approx(2.0)]

    def test_rows_sorted_by_size(self):
        table = ConvergenceTable()
        table.add('fine', report(0.05, 2.5e-3, 5e-2))
        table.add('coarse', report(0.1, 1e-2, 1e-1))
        assert np.array_equal(table.sizes, [0.1, 0.05])
        assert [label for label, _ in table.rows] == ['coarse', 'fine']

    def test_published_square_series(self):
        h = np.sqrt(2) / np.array([40.0, 80.0, 200.0])
        order = fitted_order(h, [9.12e-4, 1.62e-4, 2.02e-5])
        assert order == pytest.approx(2.37, abs=0.1)

    def test_single_row_is_undefined(self):
        table = ConvergenceTable()
        table.add('only', report(0.1, 1e-2, 1e-1))
        orders = convergence_order(table)
        assert orders['order_u'] is None
        assert orders['order_grad'] is None
        assert len(table) == 1

    def test_zero_error_is_undefined(self):
        assert fitted_order([0.1, 0.05], [1e-3, 0.0]) is None

    def test_convergence_rows_carry_pairwise_orders(self):
        table = ConvergenceTable()
        table.add('squares:8', report(0.1, 1e-2, 1e-1))
        table.add('squares:16', report(0.05, 2.5e-3, 5e-2))
        rows = convergence_rows('isotropic', table)
        assert 'order_u' not in rows[0]
        assert rows[1]['order_u'] == pytest.approx(2.0)
        assert rows[1]['mesh'] == 'squares:16'

    def test_compare_reference(self):
        c = compare_reference(1.1e-3, 1e-3)
        assert c['ratio'] == pytest.approx(1.1)
        assert compare_reference(1.0, 0.0)['ratio'] is None


"""
* Error Norms
"""


class TestErrorReport:

    def test_exact_solution_has_zero_error(self, lepotier):
        mesh = gen_uniform_squares(6)
        r = error_report(mesh, exact_solution(mesh, lepotier), lepotier, per_cell=True)
        assert r['e2_u'] == 0.0
        assert r['e2_grad'] == 0.0
        assert np.all(r['per_cell_e'] == 0.0)
        assert r['cells'] == 36

    def test_cell_errors_are_normalized(self, squares3, isotropic):
        solution = solve_mfv(squares3, isotropic)
        errors = cell_errors(squares3, solution, isotropic)
        assert errors.shape == (9,)
        assert np.all(errors >= 0.0)
        sup = exact_sup_norm(squares3, isotropic)
        assert sup == pytest.approx(1 / 16)
        expected = np.abs(solution.u - isotropic.exact.value(squares3.cell_points)) / sup
        assert np.allclose(errors, expected)

    def test_report_metrics(self, squares3, isotropic):
        solution = solve_mfv(squares3, isotropic)
        r = error_report(squares3, solution, isotropic)
        assert r['h'] == pytest.approx(np.sqrt(2) / 3)
        assert r['u_min'] == pytest.approx(float(solution.u.min()))
        assert r['u_max'] == pytest.approx(float(solution.u.max()))
        assert 'per_cell_e' not in r

    def test_missing_exact_solution(self, squares2, isotropic):
        case = isotropic.with_source(lambda x: np.ones(len(x)))
        solution = solve_mfv(squares2, case)
        with pytest.raises(ProblemDefinitionError):
            error_report(squares2, solution, case)
        with pytest.raises(ProblemDefinitionError):
            cell_errors(squares2, solution, case)
