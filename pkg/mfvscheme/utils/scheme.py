"""
* Utils: Mixed Finite Volume Scheme
"""
# Standard Library Imports
from dataclasses import dataclass, replace
from logging import getLogger
import time
from typing import Optional, Sequence, Union

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray

# Local Imports
from mfvscheme._errors import ConfigError, LocalSystemError, NotSPDError, OracleSizeError
from mfvscheme.types.config import SolverOptions
from mfvscheme.types.reports import SchemeResiduals, SolveDiagnostics
from mfvscheme.utils.mesh import Cell, Mesh
from mfvscheme.utils.problem import CellData, CellDataSet, ProblemCase, compute_cell_data
from mfvscheme.utils.solver import PIVOT_TOL, SparseSym, dense_ldlt_factor, solve_spd

PENALIZATION_MODES = ('fixed-over-measure', 'power-of-diameter', 'zero')
_MODE_ALIASES = {'fixed': 'fixed-over-measure', 'power': 'power-of-diameter'}
DEFAULT_NU0 = 1e-9
DEFAULT_BETA = -1.0

# Largest saddle-point system the dense oracle accepts
ORACLE_MAX_UNKNOWNS = 500

SolverOptionsDefaults = SolverOptions(
    method='auto',
    tol=1e-12,
    max_iter=20000,
    cholesky_limit=200_000,
    ordering='mmd',
    quad_order=2)

"""
* Penalization
"""


@dataclass(frozen=True)
class PenalizationPolicy:
    """Object representing the choice of the penalization coefficients ν_K.

    Attributes:
        mode: `fixed-over-measure` (ν_K = ν₀/m(K)), `power-of-diameter`
            (ν_K = ν₀ diam(K)^β) or `zero`, which is only legal on simplicial meshes.
        nu0: Scale ν₀, positive unless the mode is `zero`.
        beta: Exponent β of `power-of-diameter`, the analyzed range is (−2, 0).
    """
    mode: str = 'fixed-over-measure'
    nu0: float = DEFAULT_NU0
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        mode = _MODE_ALIASES.get(self.mode, self.mode)
        if mode not in PENALIZATION_MODES:
            raise ConfigError(f"Unknown penalization '{self.mode}', expected one of {PENALIZATION_MODES}")
        object.__setattr__(self, 'mode', mode)
        if mode == 'zero':
            return
        if not np.isfinite(self.nu0) or self.nu0 <= 0.0:
            raise ConfigError(f"Penalization scale nu0 must be positive, got {self.nu0!r}")
        if mode == 'power-of-diameter':
            if not np.isfinite(self.beta):
                raise ConfigError(f"Penalization exponent beta must be finite, got {self.beta!r}")
            if not -2.0 < self.beta < 0.0:
                getLogger(__name__).warning(
                    f"Penalization exponent beta={self.beta:g} is outside the analyzed range (-2, 0)")

    @classmethod
    def parse(
        cls,
        text: Union[str, float],
        nu0: Optional[float] = None,
        beta: Optional[float] = None
    ) -> 'PenalizationPolicy':
        """Policy from a command line value.

        Args:
            text: A mode name or alias (`fixed`, `power`, `zero`), or a number
                read as ν₀ of the fixed-over-measure mode.
            nu0: Scale overriding the default.
            beta: Exponent overriding the default.

        Returns:
            Validated policy.
        """
        kwargs = {}
        if nu0 is not None:
            kwargs['nu0'] = float(nu0)
        if beta is not None:
            kwargs['beta'] = float(beta)
        raw = str(text).strip()
        try:
            scale = float(raw)
        except ValueError:
            return cls(mode=raw.lower(), **kwargs)
        kwargs.setdefault('nu0', scale)
        return cls(mode='fixed-over-measure', **kwargs)

    def values(self, mesh: Mesh, check: bool = True) -> NDArray[np.float64]:
        """ν_K of every cell.

        Args:
            mesh: Discretization.
            check: Reject the zero mode on meshes with non-simplicial cells.

        Raises:
            LocalSystemError: If the zero mode is applied to a non-simplicial mesh.
        """
        if self.mode == 'fixed-over-measure':
            return self.nu0 / mesh.cell_areas
        if self.mode == 'power-of-diameter':
            return self.nu0 * mesh.cell_diameters ** self.beta
        if check and not mesh.is_simplicial:
            first = int(np.flatnonzero(mesh.cell_edge_counts != 3)[0])
            raise LocalSystemError("penalization zero requires simplicial mesh", cell=first)
        return np.zeros(mesh.n_cells)

    def describe(self) -> str:
        """Short label used in reports."""
        if self.mode == 'zero':
            return 'zero'
        if self.mode == 'fixed-over-measure':
            return f"{self.nu0:g}/m(K)"
        return f"{self.nu0:g}*diam(K)^{self.beta:g}"


"""
* Local Systems
"""


def local_matrix(
    offsets: ArrayLike,
    lambda_inverse: ArrayLike,
    area: float,
    nu: float
) -> NDArray[np.float64]:
    """B_K[σ,σ'] = (1/m(K)) Λ_K⁻¹(x_σ' − x_K)·(x_σ − x_K) + ν_K m(K) δ_σσ'.

    Args:
        offsets: x_σ − x_K for the edges of the cell, shape (k, 2).
        lambda_inverse: Λ_K⁻¹.
        area: m(K).
        nu: ν_K.
    """
    d = np.asarray(offsets, dtype=np.float64)
    b = d @ np.asarray(lambda_inverse, dtype=np.float64) @ d.T / area
    b = 0.5 * (b + b.T)
    b[np.diag_indices_from(b)] += nu * area
    return b


@dataclass(frozen=True, eq=False)
class LocalSystem:
    """Object representing the eliminated unknowns of one cell.

    With D the rows x_σ − x_K, G = DᵀD, η = ν_K m(K) and P the orthogonal
    projector on ker Dᵀ, the local matrix splits as B_K⁻¹ = P/η + R with
    R = m(K) D (GΛ_K⁻¹G + ηm(K)G)⁻¹ Dᵀ. Writing p = P1, α = 1ᵀp, r = R1 and
    β = 1ᵀr, the element matrix B_K⁻¹ − b_Kσ b_Kσ'/b_K of the hybrid system is

        Π/η + R + (β ppᵀ − α(prᵀ + rpᵀ) − αη rrᵀ) / (α(α + ηβ))

    where Π = P − ppᵀ/α has rank k − 3. Every other term stays bounded as
    η → 0, and Π vanishes on triangles, so ν_K = 0 is allowed there.

    Attributes:
        cell: Cell index, if known.
        edge_ids: Edges of the cell in its order.
        nu: ν_K.
        area: m(K).
        offsets: x_σ − x_K, shape (k, 2).
        lambda_k: Λ_K.
        matrix: B_K.
        stiff: Π, None on triangles.
        regular: R.
        kernel: p.
        spread: r.
        alpha: α.
        beta: β.
    """
    cell: Optional[int]
    edge_ids: tuple[int, ...]
    nu: float
    area: float
    offsets: NDArray[np.float64]
    lambda_k: NDArray[np.float64]
    matrix: NDArray[np.float64]
    stiff: Optional[NDArray[np.float64]]
    regular: NDArray[np.float64]
    kernel: NDArray[np.float64]
    spread: NDArray[np.float64]
    alpha: float
    beta: float

    @property
    def size(self) -> int:
        return len(self.edge_ids)

    @property
    def weight(self) -> float:
        """float: η = ν_K m(K)."""
        return self.nu * self.area

    @property
    def b_k(self) -> Optional[float]:
        """Optional[float]: b_K = 1ᵀB_K⁻¹1, None when ν_K = 0."""
        eta = self.weight
        return None if eta == 0.0 else (self.alpha + eta * self.beta) / eta

    @property
    def b_coeffs(self) -> Optional[NDArray[np.float64]]:
        """Optional[NDArray]: b_{K,σ} = (B_K⁻¹1)_σ, None when ν_K = 0."""
        eta = self.weight
        return None if eta == 0.0 else (self.kernel + eta * self.spread) / eta

    @property
    def load(self) -> NDArray[np.float64]:
        """NDArray: Weights of ∫_K f in the hybrid right-hand side, b_{K,σ}/b_K, summing to 1."""
        eta = self.weight
        return (self.kernel + eta * self.spread) / (self.alpha + eta * self.beta)

    @property
    def element_matrix(self) -> NDArray[np.float64]:
        """NDArray: Contribution of the cell to the hybrid matrix, indexed by its edges."""
        eta, alpha, beta = self.weight, self.alpha, self.beta
        p, r = self.kernel, self.spread
        cross = np.outer(p, r)
        a = self.regular + (
            beta * np.outer(p, p) - alpha * (cross + cross.T) - alpha * eta * np.outer(r, r)
        ) / (alpha * (alpha + eta * beta))
        if self.stiff is not None:
            a = a + self.stiff / eta
        return 0.5 * (a + a.T)

    def fluxes(self, traces: ArrayLike, f_k: float) -> tuple[float, NDArray[np.float64]]:
        """u_K and (F_{K,σ}) from the traces of the cell edges.

        The fluxes sum to −∫_K f by construction. Their 1/η part is taken from
        u_σ − u_K and projected twice, so it stays in ker Dᵀ.

        Args:
            traces: u_σ in the cell edge order.
            f_k: ∫_K f.

        Returns:
            Tuple of u_K and the fluxes in the cell edge order.
        """
        t = np.asarray(traces, dtype=np.float64)
        eta = self.weight
        u_k = float(self.kernel @ t + eta * (self.spread @ t + f_k)) / (self.alpha + eta * self.beta)
        gap = t - u_k
        fluxes = self.regular @ gap + self.kernel * ((-f_k - self.spread @ gap) / self.alpha)
        if self.stiff is not None:
            fluxes = fluxes + self.stiff @ (self.stiff @ gap) / eta
        return u_k, fluxes

    def recover(self, traces: ArrayLike, f_k: float) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
        """u_K, v_K = Λ_K⁻¹ Σ_σ F_{K,σ}(x_σ − x_K) / m(K) and (F_{K,σ}) from the traces.

        Returns:
            Tuple of u_K, v_K and the fluxes in the cell edge order.
        """
        u_k, fluxes = self.fluxes(traces, f_k)
        v = np.linalg.solve(self.lambda_k, self.offsets.T @ fluxes) / self.area
        return u_k, v, fluxes


def local_system(
    cell: Cell,
    cell_data: CellData,
    nu: float,
    edge_centers: ArrayLike,
    index: Optional[int] = None
) -> LocalSystem:
    """Builds and factorizes the local system of one cell.

    Only the 2×2 Gram matrices G and GΛ_K⁻¹G + ηm(K)G are factorized, B_K
    itself is never inverted.

    Args:
        cell: Control volume with its point x_K.
        cell_data: Λ_K, Λ_K⁻¹ and ∫_K f.
        nu: ν_K, zero only on triangles.
        edge_centers: x_σ of the cell edges in the cell order, shape (k, 2).
        index: Cell index used in error messages.

    Returns:
        Factorized local system.

    Raises:
        LocalSystemError: If ν_K is negative, if ν_K = 0 on a cell that is not
            a triangle, or if the geometry is degenerate.
    """
    offsets = np.asarray(edge_centers, dtype=np.float64).reshape(-1, 2) - np.asarray(cell.point)
    k = len(offsets)
    area = float(cell.polygon.area)
    if not np.isfinite(nu) or nu < 0.0:
        raise LocalSystemError(f"penalization must be a non-negative number, got {nu!r}", cell=index)
    if nu == 0.0 and k != 3:
        raise LocalSystemError(f"zero penalization requires a simplex, the cell has {k} edges", cell=index)
    lambda_inverse = np.asarray(cell_data.lambda_k_inverse, dtype=np.float64)
    eta = nu * area

    gram = offsets.T @ offsets
    try:
        gram_factor = dense_ldlt_factor(gram)
        moment = gram @ lambda_inverse @ gram + eta * area * gram
        moment_factor = dense_ldlt_factor(0.5 * (moment + moment.T))
    except NotSPDError as e:
        raise LocalSystemError(f"degenerate cell geometry, x_σ − x_K do not span the plane ({e})", cell=index)

    projector = np.eye(k) - offsets @ gram_factor.solve(offsets.T)
    projector = 0.5 * (projector + projector.T)
    kernel = projector.sum(axis=1)
    alpha = float(kernel.sum())
    if not alpha > PIVOT_TOL * k:
        raise LocalSystemError("degenerate cell geometry, the edge centers are collinear", cell=index)
    regular = area * offsets @ moment_factor.solve(offsets.T)
    regular = 0.5 * (regular + regular.T)
    spread = regular.sum(axis=1)

    stiff = None
    if k > 3:
        stiff = projector - np.outer(kernel, kernel) / alpha
        stiff = 0.5 * (stiff + stiff.T)

    return LocalSystem(
        cell=index,
        edge_ids=tuple(cell.edge_ids),
        nu=float(nu),
        area=area,
        offsets=offsets,
        lambda_k=np.asarray(cell_data.lambda_k),
        matrix=local_matrix(offsets, lambda_inverse, area, nu),
        stiff=stiff,
        regular=regular,
        kernel=kernel,
        spread=spread,
        alpha=alpha,
        beta=float(spread.sum()))


def local_systems(mesh: Mesh, data: CellDataSet, nu: ArrayLike) -> list[LocalSystem]:
    """Local systems of every cell."""
    nu = np.asarray(nu, dtype=np.float64)
    centers = mesh.edge_centers
    return [
        local_system(cell, data[k], float(nu[k]), centers[list(cell.edge_ids)], index=k)
        for k, cell in enumerate(mesh.cells)]


"""
* Hybrid System
"""


@dataclass(frozen=True, eq=False)
class HybridSystem:
    """Object representing the condensed system on the interior edge traces.

    Attributes:
        index_map: Unknown index of every edge, −1 on boundary edges.
        unknown_edges: Edge id of every unknown.
        matrix: Symmetric positive definite matrix M.
        rhs: Right-hand side with the Dirichlet traces folded in.
        boundary_traces: u_σ of every edge, g(x_σ) on boundary edges and 0 elsewhere.
        nu: ν_K of every cell.
        f_k: ∫_K f of every cell.
        local: Local systems reused by the back-substitution.
    """
    index_map: NDArray[np.int64]
    unknown_edges: NDArray[np.int64]
    matrix: SparseSym
    rhs: NDArray[np.float64]
    boundary_traces: NDArray[np.float64]
    nu: NDArray[np.float64]
    f_k: NDArray[np.float64]
    local: tuple[LocalSystem, ...]

    @property
    def n(self) -> int:
        return len(self.unknown_edges)

    def traces(self, x: ArrayLike) -> NDArray[np.float64]:
        """u_σ of every edge from the interior solution vector."""
        t = self.boundary_traces.copy()
        t[self.unknown_edges] = np.asarray(x, dtype=np.float64)
        return t

    def defect(self, x: ArrayLike) -> NDArray[np.float64]:
        """rhs − M x as −Σ_K F_{K,σ} over the interior edges.

        Each cell evaluates its Π/η part from u_σ − u_K rather than from u_σ,
        so the defect resolves below the roundoff of the assembled product M x.
        """
        t = self.traces(x)
        r = np.zeros(self.n)
        for k, s in enumerate(self.local):
            ids = np.asarray(s.edge_ids, dtype=np.int64)
            loc = self.index_map[ids]
            free = loc >= 0
            _, fluxes = s.fluxes(t[ids], self.f_k[k])
            np.subtract.at(r, loc[free], fluxes[free])
        return r


def dirichlet_traces(mesh: Mesh, case: ProblemCase) -> NDArray[np.float64]:
    """g(x_σ) on boundary edges, 0 on interior edges."""
    g = np.zeros(mesh.n_edges)
    bnd = mesh.boundary_edges
    if len(bnd):
        g[bnd] = case.dirichlet(mesh.edge_centers[bnd])
    return g


def assemble_hybrid(
    mesh: Mesh,
    data: CellDataSet,
    policy: PenalizationPolicy,
    dirichlet: Optional[ArrayLike] = None
) -> HybridSystem:
    """Assembles the symmetric positive definite system on the interior edge traces.

    Each interior edge σ = K|L receives the element matrix rows of K and L and
    the source terms (b_{K,σ}/b_K)∫_K f + (b_{L,σ}/b_L)∫_L f. Boundary traces
    are fixed to their Dirichlet values and moved to the right-hand side.

    Args:
        mesh: Discretization.
        data: Cell data of the problem.
        policy: Penalization.
        dirichlet: u_σ on boundary edges indexed by edge id, zero when None.

    Returns:
        Assembled system.

    Raises:
        LocalSystemError: From the local factorizations.
    """
    nu = policy.values(mesh)
    systems = local_systems(mesh, data, nu)

    interior = mesh.interior_edges
    index_map = np.full(mesh.n_edges, -1, dtype=np.int64)
    index_map[interior] = np.arange(len(interior))
    fixed = np.zeros(mesh.n_edges)
    if dirichlet is not None:
        g = np.asarray(dirichlet, dtype=np.float64)
        fixed[mesh.boundary_edges] = g[mesh.boundary_edges]

    rhs = np.zeros(len(interior))
    rows, cols, vals = [], [], []
    for k, s in enumerate(systems):
        ids = np.asarray(s.edge_ids, dtype=np.int64)
        loc = index_map[ids]
        free = loc >= 0
        a = s.element_matrix
        contrib = s.load * data.f_k[k] - a[:, ~free] @ fixed[ids[~free]]
        rhs[loc[free]] += contrib[free]
        r, c = np.meshgrid(loc[free], loc[free], indexing='ij')
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(a[np.ix_(free, free)].ravel())

    n = len(interior)
    if rows:
        matrix = SparseSym.from_triplets(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n)
    else:
        matrix = SparseSym.from_triplets([], [], [], n)
    getLogger(__name__).debug(f"Assembled hybrid system: {n} unknowns, {matrix.nnz} nonzeros")
    return HybridSystem(
        index_map=index_map,
        unknown_edges=interior,
        matrix=matrix,
        rhs=rhs,
        boundary_traces=fixed,
        nu=nu,
        f_k=np.asarray(data.f_k, dtype=np.float64),
        local=tuple(systems))


"""
* Solutions
"""


@dataclass(frozen=True, eq=False)
class Solution:
    """Object representing a discrete solution (u, v, F) with its edge traces.

    Attributes:
        u: u_K per cell.
        v: v_K per cell, shape (N, 2).
        flux: F_{K,σ} per incidence, in the mesh's flat incidence order.
        traces: u_σ per edge.
        diagnostics: Solver statistics and scheme residuals, when produced by a solve.
    """
    u: NDArray[np.float64]
    v: NDArray[np.float64]
    flux: NDArray[np.float64]
    traces: NDArray[np.float64]
    diagnostics: Optional[SolveDiagnostics] = None

    def flux_at(self, mesh: Mesh, cell: int, edge: int) -> float:
        """F_{K,σ} for cell K and edge σ."""
        return float(self.flux[mesh.incidence_index(cell, edge)])

    def cell_fluxes(self, mesh: Mesh, cell: int) -> NDArray[np.float64]:
        """Fluxes of a cell in its edge order."""
        return self.flux[mesh.incidence_ptr[cell]:mesh.incidence_ptr[cell + 1]]


def back_substitute(
    mesh: Mesh,
    data: CellDataSet,
    policy: PenalizationPolicy,
    traces: ArrayLike,
    systems: Optional[Sequence[LocalSystem]] = None
) -> Solution:
    """Recovers u_K, F_{K,σ} and v_K cell by cell from all edge traces.

    Args:
        mesh: Discretization.
        data: Cell data of the problem.
        policy: Penalization.
        traces: u_σ of every edge, boundary values included.
        systems: Local systems already built for the same data and policy.

    Returns:
        Discrete solution without diagnostics.
    """
    traces = np.asarray(traces, dtype=np.float64)
    if systems is None:
        systems = local_systems(mesh, data, policy.values(mesh))
    u = np.zeros(mesh.n_cells)
    v = np.zeros((mesh.n_cells, 2))
    flux = np.zeros(len(mesh.incidence_edge))
    ptr = mesh.incidence_ptr
    for k, s in enumerate(systems):
        u[k], v[k], flux[ptr[k]:ptr[k + 1]] = s.recover(traces[list(s.edge_ids)], data.f_k[k])
    return Solution(u=u, v=v, flux=flux, traces=traces)


"""
* Scheme Residuals
"""


def _scaled_max(residual: NDArray[np.float64], scale: NDArray[np.float64]) -> float:
    if residual.size == 0:
        return 0.0
    ratio = np.where(scale > 0.0, residual / np.where(scale > 0.0, scale, 1.0), residual)
    return float(np.max(ratio))


def scheme_residuals(
    mesh: Mesh,
    data: CellDataSet,
    policy: PenalizationPolicy,
    solution: Solution
) -> SchemeResiduals:
    """Scaled residuals of the scheme equations on a solution.

    - conservativity: max |F_{K,σ} + F_{L,σ}| / max(1, max|F|) over interior edges.
    - balance: max |Σ_σ F_{K,σ} + ∫_K f| / (|∫_K f| + max|F|) over cells.
    - gradient: max ‖m(K)Λ_K v_K − Σ_σ F_{K,σ}(x_σ − x_K)‖ / (m(K)‖Λ_K‖‖v_K‖).
    - trace: max |v_K·(x_σ − x_K) + ν_K m(K)F_{K,σ} − (u_σ − u_K)| over
      incidences, relative to the sum of the magnitudes of its terms.

    Balance, gradient and trace hold to roundoff for any ν_K. Conservativity
    couples neighbouring cells through the Π/η part of their fluxes, so in
    double precision it bottoms out near ε max|u_σ| / min(ν_K m(K)) on meshes
    with cells of more than three edges, even after refinement.
    """
    nu = policy.values(mesh, check=False)
    cell, edge = mesh.incidence_cell, mesh.incidence_edge
    offsets = mesh.incidence_offsets
    areas = mesh.cell_areas
    f = solution.flux
    max_f = float(np.max(np.abs(f))) if f.size else 0.0

    per_edge = np.bincount(edge, weights=f, minlength=mesh.n_edges)[mesh.interior_edges]
    conservativity = float(np.max(np.abs(per_edge))) / max(1.0, max_f) if per_edge.size else 0.0

    outflow = np.bincount(cell, weights=f, minlength=mesh.n_cells)
    balance = _scaled_max(np.abs(outflow + data.f_k), np.abs(data.f_k) + max_f)

    moment = np.column_stack([
        np.bincount(cell, weights=f * offsets[:, 0], minlength=mesh.n_cells),
        np.bincount(cell, weights=f * offsets[:, 1], minlength=mesh.n_cells)])
    lam_v = np.einsum('kij,kj->ki', data.lambda_k, solution.v)
    gap = np.linalg.norm(areas[:, None] * lam_v - moment, axis=1)
    scale = areas * np.linalg.norm(data.lambda_k, ord=2, axis=(1, 2)) * np.linalg.norm(solution.v, axis=1)
    gradient = _scaled_max(gap, scale)

    drop = np.einsum('ij,ij->i', solution.v[cell], offsets)
    penalty = nu[cell] * areas[cell] * f
    jump = solution.traces[edge] - solution.u[cell]
    trace = _scaled_max(
        np.abs(drop + penalty - jump),
        np.abs(drop) + np.abs(penalty) + np.abs(solution.traces[edge]) + np.abs(solution.u[cell]))

    return SchemeResiduals(conservativity=conservativity, balance=balance, gradient=gradient, trace=trace)


"""
* End-to-end Solve
"""


def solve_mfv(
    mesh: Mesh,
    case: ProblemCase,
    policy: Optional[PenalizationPolicy] = None,
    options: Optional[SolverOptions] = None,
    initial_traces: Optional[ArrayLike] = None
) -> Solution:
    """Solves a problem with the hybridized mixed finite volume scheme.

    A direct solve is refined against `HybridSystem.defect`.

    Args:
        mesh: Discretization.
        case: Continuous problem.
        policy: Penalization, ν_K = 1e−9/m(K) when None.
        options: Solver and quadrature options, see `SolverOptionsDefaults`.
        initial_traces: Initial guess for the interior traces, used by PCG.

    Returns:
        Solution with its solver statistics and scheme residuals.

    Raises:
        LocalSystemError: If a local system cannot be factorized.
        NotSPDError: If the hybrid matrix fails to factorize.
        NonConvergenceError: If PCG reaches its iteration cap.
    """
    start = time.perf_counter()
    policy = policy or PenalizationPolicy()
    opts = SolverOptions(**{**SolverOptionsDefaults, **(options or {})})
    log = getLogger(__name__)

    data = compute_cell_data(mesh, case, quad_order=opts['quad_order'])
    system = assemble_hybrid(mesh, data, policy, dirichlet_traces(mesh, case))
    x, stats = solve_spd(
        system.matrix, system.rhs,
        method=opts['method'],
        tol=opts['tol'],
        max_iter=opts['max_iter'],
        cholesky_limit=opts['cholesky_limit'],
        ordering=opts['ordering'],
        x0=initial_traces,
        defect=system.defect)
    solution = back_substitute(mesh, data, policy, system.traces(x), systems=system.local)
    residuals = scheme_residuals(mesh, data, policy, solution)
    elapsed = time.perf_counter() - start
    log.info(
        f"Solved '{case.name}' on {mesh.n_cells} cells ({stats['method']}, {stats['unknowns']} unknowns) "
        f"in {elapsed:.2f}s, residual {stats['residual']:.2e}")
    return replace(solution, diagnostics=SolveDiagnostics(solver=stats, residuals=residuals, seconds=elapsed))


"""
* Saddle-point Oracle
"""


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """Object representing the full system in (u, v, F) before any elimination.

    Unknowns are ordered u_K for every cell, then (v_K)₁, (v_K)₂ for every cell,
    then F_{K,σ} in the mesh's flat incidence order.
    """
    matrix: NDArray[np.float64]
    rhs: NDArray[np.float64]
    n_cells: int
    n_incidences: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def saddle_oracle_size(mesh: Mesh) -> int:
    """(d+1)Card(M) + 2Card(E_int) + Card(E_ext)."""
    return 3 * mesh.n_cells + len(mesh.incidence_edge)


def assemble_saddle_oracle(
    mesh: Mesh,
    data: CellDataSet,
    policy: PenalizationPolicy,
    dirichlet: Optional[ArrayLike] = None
) -> SaddleSystem:
    """Dense system of the scheme equations in all unknowns.

    Rows come in this order: the trace-continuity equation of every interior
    edge, the trace equation of every boundary edge, flux conservation of every
    interior edge, the two gradient-flux rows of every cell, and the flux
    balance of every cell.

    Args:
        mesh: Small discretization.
        data: Cell data of the problem.
        policy: Penalization, applied without the simplicial guard.
        dirichlet: u_σ on boundary edges indexed by edge id, zero when None.

    Raises:
        OracleSizeError: Above 500 unknowns.
    """
    size = saddle_oracle_size(mesh)
    if size > ORACLE_MAX_UNKNOWNS:
        raise OracleSizeError(f"Saddle-point oracle needs {size} unknowns, the limit is {ORACLE_MAX_UNKNOWNS}")
    n = mesh.n_cells
    nu = policy.values(mesh, check=False)
    areas = mesh.cell_areas
    offsets = mesh.incidence_offsets
    g = np.zeros(mesh.n_edges) if dirichlet is None else np.asarray(dirichlet, dtype=np.float64)

    # Column offsets of the v and F blocks
    v0, f0 = n, 3 * n
    a = np.zeros((size, size))
    rhs = np.zeros(size)

    def add_trace_terms(row: int, k: int, e: int, sign: float) -> None:
        j = mesh.incidence_index(k, e)
        a[row, v0 + 2 * k:v0 + 2 * k + 2] += sign * offsets[j]
        a[row, f0 + j] += sign * nu[k] * areas[k]
        a[row, k] += sign

    row = 0
    for e in mesh.interior_edges:
        k, l = mesh.edges[e].side_cells
        add_trace_terms(row, k, e, 1.0)
        add_trace_terms(row, l, e, -1.0)
        row += 1
    for e in mesh.boundary_edges:
        add_trace_terms(row, mesh.edges[e].side_cells[0], e, 1.0)
        rhs[row] = g[e]
        row += 1
    for e in mesh.interior_edges:
        for k in mesh.edges[e].side_cells:
            a[row, f0 + mesh.incidence_index(k, e)] = 1.0
        row += 1
    ptr = mesh.incidence_ptr
    for k in range(n):
        a[row:row + 2, v0 + 2 * k:v0 + 2 * k + 2] = areas[k] * data.lambda_k[k]
        a[row:row + 2, f0 + ptr[k]:f0 + ptr[k + 1]] = -offsets[ptr[k]:ptr[k + 1]].T
        row += 2
    for k in range(n):
        a[row, f0 + ptr[k]:f0 + ptr[k + 1]] = -1.0
        rhs[row] = data.f_k[k]
        row += 1
    return SaddleSystem(matrix=a, rhs=rhs, n_cells=n, n_incidences=len(offsets))


def solve_saddle_oracle(
    mesh: Mesh,
    data: CellDataSet,
    policy: PenalizationPolicy,
    dirichlet: Optional[ArrayLike] = None
) -> Solution:
    """Dense solve of the saddle-point oracle.

    Traces are recovered from the trace equation on the first side cell of
    every interior edge, and set to the Dirichlet data on boundary edges.

    Raises:
        OracleSizeError: Above 500 unknowns.
        numpy.linalg.LinAlgError: If the system is singular.
    """
    system = assemble_saddle_oracle(mesh, data, policy, dirichlet)
    x = np.linalg.solve(system.matrix, system.rhs)
    n = mesh.n_cells
    u, v, flux = x[:n], x[n:3 * n].reshape(n, 2), x[3 * n:]

    nu = policy.values(mesh, check=False)
    traces = np.zeros(mesh.n_edges)
    if dirichlet is not None:
        traces[mesh.boundary_edges] = np.asarray(dirichlet, dtype=np.float64)[mesh.boundary_edges]
    offsets = mesh.incidence_offsets
    for e in mesh.interior_edges:
        k = mesh.edges[e].side_cells[0]
        j = mesh.incidence_index(k, e)
        traces[e] = u[k] + v[k] @ offsets[j] + nu[k] * mesh.cell_areas[k] * flux[j]
    return Solution(u=u, v=v, flux=flux, traces=traces)


__all__ = [
    'PENALIZATION_MODES', 'DEFAULT_NU0', 'DEFAULT_BETA', 'ORACLE_MAX_UNKNOWNS', 'SolverOptionsDefaults',
    'PenalizationPolicy', 'local_matrix', 'LocalSystem', 'local_system', 'local_systems',
    'HybridSystem', 'dirichlet_traces', 'assemble_hybrid', 'Solution', 'back_substitute',
    'scheme_residuals', 'solve_mfv', 'SaddleSystem', 'saddle_oracle_size', 'assemble_saddle_oracle',
    'solve_saddle_oracle'
]
