"""
* Utils: Linear Solvers
"""
# Standard Library Imports
from dataclasses import dataclass, field
from logging import getLogger
import re
from typing import Callable, Optional

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import LinearOperator, cg, splu

# Local Imports
from mfvscheme._errors import ConfigError, NonConvergenceError, NotSPDError
from mfvscheme.types.reports import SolverStats

# Pivots below this fraction of the largest diagonal entry are rejected
PIVOT_TOL = 1e-14

SOLVER_METHODS = ('auto', 'cholesky', 'pcg')
ORDERINGS = ('mmd', 'rcm')

"""
* Dense Factorization
"""


@dataclass(frozen=True, eq=False)
class DenseLDLT:
    """LDLᵀ factorization of a small symmetric positive definite matrix.

    Stored as its Cholesky factor C = L D^½, so D = diag(C)² and L = C D^-½.
    """
    factor: NDArray[np.float64]
    pivots: NDArray[np.float64]

    @property
    def order(self) -> int:
        return len(self.pivots)

    @property
    def unit_lower(self) -> NDArray[np.float64]:
        """NDArray: Unit lower triangular L."""
        return np.tril(self.factor) / np.sqrt(self.pivots)[None, :]

    def solve(self, rhs: ArrayLike) -> NDArray[np.float64]:
        """Solves A x = rhs for one or several right-hand side columns."""
        return cho_solve((self.factor, True), np.asarray(rhs, dtype=np.float64), check_finite=False)

    def inverse(self) -> NDArray[np.float64]:
        """A⁻¹ column by column through triangular solves."""
        inv = self.solve(np.eye(self.order))
        return 0.5 * (inv + inv.T)


def dense_ldlt_factor(a: ArrayLike) -> DenseLDLT:
    """Factorizes a dense symmetric matrix.

    Args:
        a: Symmetric matrix.

    Returns:
        Factorization usable for repeated solves.

    Raises:
        NotSPDError: If the matrix is not symmetric, or a pivot is below
            1e−14 times the largest diagonal entry.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSPDError(f"Expected a square matrix, got shape {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise NotSPDError("Matrix is not symmetric")
    try:
        c, _ = cho_factor(a, lower=True)
    except LinAlgError as e:
        found = re.search(r'(\d+)', str(e))
        raise NotSPDError("Matrix is not positive definite", pivot=int(found.group(1)) - 1 if found else None)
    pivots = np.diag(c) ** 2
    tol = PIVOT_TOL * float(np.max(np.diag(a))) if a.size else 0.0
    small = np.flatnonzero(pivots <= tol)
    if len(small):
        raise NotSPDError("Matrix is not positive definite", pivot=int(small[0]))
    return DenseLDLT(factor=c, pivots=pivots)


def dense_solve(fact: DenseLDLT, rhs: ArrayLike) -> NDArray[np.float64]:
    """Solves with a dense factorization."""
    return fact.solve(rhs)


"""
* Sparse Factorization
"""


@dataclass(frozen=True, eq=False)
class SparseSym:
    """Sparse symmetric matrix, stored in full CSR with its lower triangle available on demand."""
    matrix: sp.csr_matrix

    @classmethod
    def from_triplets(cls, rows: ArrayLike, cols: ArrayLike, values: ArrayLike, n: int) -> 'SparseSym':
        """Assembles a matrix from (row, col, value) triplets, summing duplicates in a fixed order."""
        m = sp.coo_matrix(
            (np.asarray(values, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
            shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        return cls(matrix=m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @property
    def lower(self) -> sp.csc_matrix:
        """csc_matrix: Lower triangle including the diagonal."""
        return sp.tril(self.matrix, format='csc')

    def asymmetry(self) -> float:
        """Largest |A − Aᵀ| relative to the largest |A|."""
        if self.nnz == 0:
            return 0.0
        diff = abs(self.matrix - self.matrix.T)
        return float(diff.max()) / float(abs(self.matrix).max()) if diff.nnz else 0.0

    def residual(self, x: NDArray[np.float64], rhs: NDArray[np.float64]) -> float:
        """Relative residual ‖Ax − b‖ / ‖b‖, or the absolute one when b = 0."""
        r = float(np.linalg.norm(self.matrix @ x - rhs))
        b = float(np.linalg.norm(rhs))
        return r / b if b > 0.0 else r


@dataclass(frozen=True, eq=False)
class SparseCholesky:
    """Symmetric factorization of a sparse SPD matrix with a fill-reducing ordering."""
    n: int
    ordering: str
    lu: Optional[object] = None
    perm: Optional[NDArray[np.int64]] = None
    factor_nnz: int = field(default=0)

    def solve(self, rhs: ArrayLike) -> NDArray[np.float64]:
        """Solves A x = rhs."""
        b = np.asarray(rhs, dtype=np.float64)
        if self.n == 0:
            return np.zeros_like(b)
        if self.perm is None:
            return self.lu.solve(b)
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(b[self.perm])
        return x


def sparse_cholesky(m: SparseSym, ordering: str = 'mmd') -> SparseCholesky:
    """Factorizes a sparse SPD matrix.

    Elimination runs on the diagonal without pivoting, which for an SPD matrix
    is the LDLᵀ factorization. `rcm` applies a reverse Cuthill-McKee
    permutation first, `mmd` lets SuperLU order by minimum degree on A + Aᵀ.

    Args:
        m: Symmetric matrix.
        ordering: `mmd` or `rcm`.

    Returns:
        Factorization usable for repeated solves.

    Raises:
        NotSPDError: If a pivot is not positive.
    """
    if ordering not in ORDERINGS:
        raise ConfigError(f"Unknown ordering '{ordering}', expected one of {ORDERINGS}")
    if m.n == 0:
        return SparseCholesky(n=0, ordering=ordering)

    a = m.matrix
    perm = None
    if ordering == 'rcm':
        perm = reverse_cuthill_mckee(a, symmetric_mode=True).astype(np.int64)
        a = a[perm][:, perm]
    try:
        lu = splu(
            a.tocsc(),
            permc_spec='NATURAL' if ordering == 'rcm' else 'MMD_AT_PLUS_A',
            diag_pivot_thresh=0.0,
            options=dict(SymmetricMode=True))
    except RuntimeError as e:
        raise NotSPDError(f"Sparse factorization failed: {e}")

    pivots = lu.U.diagonal()
    tol = PIVOT_TOL * float(np.max(np.abs(a.diagonal())))
    small = np.flatnonzero(pivots <= tol)
    if len(small):
        k = int(small[0])
        column = int(np.argsort(lu.perm_c)[k])
        raise NotSPDError("Matrix is not positive definite", pivot=int(perm[column]) if perm is not None else column)
    return SparseCholesky(n=m.n, ordering=ordering, lu=lu, perm=perm, factor_nnz=int(lu.L.nnz + lu.U.nnz))


def sparse_solve(fact: SparseCholesky, rhs: ArrayLike) -> NDArray[np.float64]:
    """Solves with a sparse factorization."""
    return fact.solve(rhs)


"""
* Iterative Solve
"""


def pcg_solve(
    m: SparseSym,
    rhs: ArrayLike,
    tol: float = 1e-12,
    max_iter: Optional[int] = None,
    x0: Optional[ArrayLike] = None
) -> tuple[NDArray[np.float64], int]:
    """Jacobi-preconditioned conjugate gradient.

    Args:
        m: SPD matrix.
        rhs: Right-hand side.
        tol: Relative residual target.
        max_iter: Iteration cap, defaults to 10 n.
        x0: Initial guess.

    Returns:
        Tuple of the solution and the number of iterations.

    Raises:
        NotSPDError: If the diagonal has a non-positive entry.
        NonConvergenceError: If the cap is reached first.
    """
    b = np.asarray(rhs, dtype=np.float64)
    if m.n == 0:
        return np.zeros_like(b), 0
    diag = m.matrix.diagonal()
    bad = np.flatnonzero(diag <= 0.0)
    if len(bad):
        raise NotSPDError("Non-positive diagonal entry", pivot=int(bad[0]))

    jacobi = LinearOperator(m.matrix.shape, matvec=lambda r: np.ravel(r) / diag, dtype=np.float64)
    count = [0]

    def on_iteration(_xk):
        count[0] += 1

    x, info = cg(
        m.matrix, b, x0=x0, rtol=tol, atol=0.0,
        maxiter=max_iter or 10 * m.n, M=jacobi, callback=on_iteration)
    if info != 0:
        raise NonConvergenceError("Conjugate gradient did not converge", m.residual(x, b), count[0])
    return x, count[0]


"""
* Solver Dispatch
"""


def solve_spd(
    m: SparseSym,
    rhs: ArrayLike,
    method: str = 'auto',
    tol: float = 1e-12,
    max_iter: Optional[int] = None,
    cholesky_limit: int = 200_000,
    ordering: str = 'mmd',
    x0: Optional[ArrayLike] = None,
    refine: bool = True,
    defect: Optional[Callable[[NDArray[np.float64]], NDArray[np.float64]]] = None
) -> tuple[NDArray[np.float64], SolverStats]:
    """Solves a sparse SPD system with a direct or iterative method.

    Args:
        m: SPD matrix.
        rhs: Right-hand side.
        method: `cholesky`, `pcg`, or `auto` for Cholesky up to `cholesky_limit` unknowns.
        tol: PCG relative residual target.
        max_iter: PCG iteration cap.
        cholesky_limit: Size above which `auto` uses PCG.
        ordering: Sparse factorization ordering.
        x0: PCG initial guess.
        refine: Apply one step of iterative refinement after a direct solve.
        defect: b − A x evaluated more accurately than the assembled product,
            used by the refinement step in place of `b − A x`.

    Returns:
        Tuple of the solution and its diagnostics, including the explicit residual.
    """
    if method not in SOLVER_METHODS:
        raise ConfigError(f"Unknown solver '{method}', expected one of {SOLVER_METHODS}")
    b = np.asarray(rhs, dtype=np.float64)
    if method == 'auto':
        method = 'cholesky' if m.n <= cholesky_limit else 'pcg'

    if method == 'cholesky':
        fact = sparse_cholesky(m, ordering=ordering)
        x = fact.solve(b)
        steps = 0
        if refine and m.n:
            r = b - m.matrix @ x if defect is None else defect(x)
            x, steps = x + fact.solve(r), 1
        stats = SolverStats(
            method='cholesky', unknowns=m.n, nnz=m.nnz, iterations=0,
            residual=m.residual(x, b), factor_nnz=fact.factor_nnz, ordering=ordering, refinements=steps)
    else:
        x, iterations = pcg_solve(m, b, tol=tol, max_iter=max_iter, x0=x0)
        stats = SolverStats(
            method='pcg', unknowns=m.n, nnz=m.nnz, iterations=iterations, residual=m.residual(x, b))
    getLogger(__name__).debug(
        f"Solved {stats['unknowns']} unknowns with {stats['method']}, relative residual {stats['residual']:.3e}")
    return x, stats
