"""
* Tests: Linear Solvers
"""
# Third Party Imports
import numpy as np
import pytest

# Local Imports
from mfvscheme._errors import ConfigError, NonConvergenceError, NotSPDError
from mfvscheme.utils.generators import gen_uniform_squares
from mfvscheme.utils.problem import compute_cell_data
from mfvscheme.utils.scheme import PenalizationPolicy, assemble_hybrid, dirichlet_traces, local_matrix
from mfvscheme.utils.solver import (
    SparseSym,
    dense_ldlt_factor,
    dense_solve,
    pcg_solve,
    solve_spd,
    sparse_cholesky,
    sparse_solve)


def laplacian_1d(n: int) -> SparseSym:
    rows = list(range(n)) + list(range(n - 1)) + list(range(1, n))
    cols = list(range(n)) + list(range(1, n)) + list(range(n - 1))
    vals = [2.0] * n + [-1.0] * (2 * (n - 1))
    return SparseSym.from_triplets(rows, cols, vals, n)


def hybrid_matrix(n: int, case, policy: PenalizationPolicy):
    mesh = gen_uniform_squares(n)
    return assemble_hybrid(mesh, compute_cell_data(mesh, case), policy, dirichlet_traces(mesh, case))


"""
* Dense Factorization
"""


class TestDenseLDLT:

    def test_identity(self):
        fact = dense_ldlt_factor(np.eye(3))
        assert np.allclose(dense_solve(fact, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_diagonal(self):
        assert np.allclose(dense_solve(dense_ldlt_factor(np.diag([2.0, 3.0])), [2.0, 3.0]), [1.0, 1.0])

    def test_unit_lower_and_pivots(self):
        a = np.array([[4.0, 2.0], [2.0, 3.0]])
        fact = dense_ldlt_factor(a)
        lower = fact.unit_lower
        assert np.allclose(np.diag(lower), 1.0)
        assert np.allclose(lower @ np.diag(fact.pivots) @ lower.T, a)
        assert np.allclose(fact.inverse(), np.linalg.inv(a))

    def test_penalized_cell_matrix(self):
        offsets = np.array([[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]])
        b = local_matrix(offsets, np.eye(2), 1.0, 1e-9)
        fact = dense_ldlt_factor(b)
        rhs = np.random.default_rng(3).normal(size=(4, 50))
        x = fact.solve(rhs)
        residual = np.linalg.norm(b @ x - rhs, axis=0) / np.linalg.norm(rhs, axis=0)
        assert np.max(residual) <= 1e-9

    def test_singular(self):
        offsets = np.array([[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]])
        with pytest.raises(NotSPDError):
            dense_ldlt_factor(local_matrix(offsets, np.eye(2), 1.0, 0.0))

    def test_indefinite_reports_pivot(self):
        with pytest.raises(NotSPDError) as e:
            dense_ldlt_factor(np.diag([1.0, -1.0, 2.0]))
        assert e.value.pivot == 1

    def test_not_symmetric(self):
        with pytest.raises(NotSPDError):
            dense_ldlt_factor(np.array([[2.0, 1.0], [0.0, 2.0]]))


"""
* Sparse Factorization
"""


class TestSparseCholesky:

    @pytest.mark.parametrize('ordering', ['mmd', 'rcm'])
    def test_tridiagonal(self, ordering):
        fact = sparse_cholesky(laplacian_1d(5), ordering=ordering)
        assert np.allclose(sparse_solve(fact, np.ones(5)), [2.5, 4.0, 4.5, 4.0, 2.5])

    def test_permutation_equivariance(self):
        m = laplacian_1d(6)
        rhs = np.arange(1.0, 7.0)
        perm = np.array([3, 0, 5, 1, 4, 2])
        permuted = SparseSym(m.matrix[perm][:, perm].tocsr())
        x = sparse_solve(sparse_cholesky(m), rhs)
        y = sparse_solve(sparse_cholesky(permuted), rhs[perm])
        assert np.allclose(y, x[perm])

    def test_hybrid_matrix_residual(self, isotropic, moderate):
        system = hybrid_matrix(2, isotropic, moderate)
        assert system.matrix.n == 4
        x, stats = solve_spd(system.matrix, system.rhs, method='cholesky')
        assert stats['residual'] <= 1e-12
        assert system.matrix.asymmetry() <= 1e-14

    def test_defect_drives_refinement(self):
        m = laplacian_1d(6)
        b = np.ones(6)
        calls = []

        def defect(x):
            calls.append(x.copy())
            return b - m.matrix @ x

        x, stats = solve_spd(m, b, method='cholesky', defect=defect)
        assert len(calls) == 1
        assert stats['refinements'] == 1
        assert np.allclose(m.matrix @ x, b)
        _, plain = solve_spd(m, b, method='cholesky')
        assert plain['refinements'] == 1
        _, unrefined = solve_spd(m, b, method='cholesky', refine=False, defect=defect)
        assert unrefined['refinements'] == 0 and len(calls) == 1

    def test_indefinite(self):
        m = SparseSym.from_triplets([0, 1, 2], [0, 1, 2], [1.0, -2.0, 1.0], 3)
        with pytest.raises(NotSPDError):
            sparse_cholesky(m)

    def test_unknown_ordering(self):
        with pytest.raises(ConfigError):
            sparse_cholesky(laplacian_1d(3), ordering='amd')

    def test_empty(self):
        fact = sparse_cholesky(SparseSym.from_triplets([], [], [], 0))
        assert sparse_solve(fact, np.zeros(0)).shape == (0,)


"""
* Conjugate Gradients
"""


class TestPCG:

    def test_identity(self):
        m = SparseSym.from_triplets(range(4), range(4), np.ones(4), 4)
        x, iterations = pcg_solve(m, np.arange(4.0))
        assert np.allclose(x, np.arange(4.0))
        assert iterations <= 1

    def test_diagonal_terminates(self):
        n = 30
        m = SparseSym.from_triplets(range(n), range(n), np.arange(1.0, n + 1), n)
        x, iterations = pcg_solve(m, np.ones(n), tol=1e-12)
        assert np.allclose(x, 1.0 / np.arange(1.0, n + 1))
        assert iterations <= n + 5

    def test_matches_cholesky(self, isotropic, moderate):
        system = hybrid_matrix(20, isotropic, moderate)
        direct, _ = solve_spd(system.matrix, system.rhs, method='cholesky')
        iterative, stats = solve_spd(system.matrix, system.rhs, method='pcg', tol=1e-14, max_iter=50000)
        assert stats['method'] == 'pcg'
        assert np.max(np.abs(iterative - direct)) <= 1e-8 * np.max(np.abs(direct))

    def test_iteration_cap(self):
        with pytest.raises(NonConvergenceError) as e:
            pcg_solve(laplacian_1d(50), np.ones(50), tol=1e-14, max_iter=2)
        assert e.value.iterations <= 2

    def test_auto_switches_to_pcg(self):
        _, stats = solve_spd(laplacian_1d(10), np.ones(10), method='auto', cholesky_limit=5)
        assert stats['method'] == 'pcg'

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            solve_spd(laplacian_1d(3), np.ones(3), method='gmres')
