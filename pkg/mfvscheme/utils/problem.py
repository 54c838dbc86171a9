"""
* Utils: Problem Definitions
"""
# Standard Library Imports
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray

# Local Imports
from mfvscheme._errors import ConfigError, ProblemDefinitionError
from mfvscheme.utils.geometry import ConvexPolygon, polygon_centroid
from mfvscheme.utils.mesh import Cell, Mesh

# Fields take points of shape (..., 2)
ScalarField = Callable[[NDArray[np.float64]], NDArray[np.float64]]
VectorField = Callable[[NDArray[np.float64]], NDArray[np.float64]]
TensorEvaluator = Callable[[NDArray[np.float64]], NDArray[np.float64]]

"""
* Quadrature
"""

# Gauss rules on a triangle: barycentric points and weights summing to 1
_A4, _B4 = 0.445948490915965, 0.091576213509771
_WA4, _WB4 = 0.223381589678011, 0.109951743655322
TRIANGLE_RULES: dict[int, tuple[NDArray[np.float64], NDArray[np.float64]]] = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([
        [2 / 3, 1 / 6, 1 / 6],
        [1 / 6, 2 / 3, 1 / 6],
        [1 / 6, 1 / 6, 2 / 3]]), np.full(3, 1 / 3)),
    4: (np.array([
        [1 - 2 * _A4, _A4, _A4],
        [_A4, 1 - 2 * _A4, _A4],
        [_A4, _A4, 1 - 2 * _A4],
        [1 - 2 * _B4, _B4, _B4],
        [_B4, 1 - 2 * _B4, _B4],
        [_B4, _B4, 1 - 2 * _B4]]), np.array([_WA4] * 3 + [_WB4] * 3)),
}


def _check_order(quad_order: int) -> None:
    if quad_order not in TRIANGLE_RULES:
        raise ConfigError(f"Quadrature order must be one of {sorted(TRIANGLE_RULES)}, got {quad_order!r}")


def _fan_rule(
    centers: NDArray[np.float64],
    starts: NDArray[np.float64],
    ends: NDArray[np.float64],
    quad_order: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Quadrature points and weights over triangles (center, start, end), shapes (T, q, 2) and (T, q)."""
    bary, weights = TRIANGLE_RULES[quad_order]
    a, b = starts - centers, ends - centers
    area = 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    pts = (bary[None, :, 0, None] * centers[:, None, :]
           + bary[None, :, 1, None] * starts[:, None, :]
           + bary[None, :, 2, None] * ends[:, None, :])
    return pts, area[:, None] * weights[None, :]


def polygon_quadrature(p: ConvexPolygon, quad_order: int = 2) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Quadrature over a polygon fan-triangulated from its centroid.

    Args:
        p: Valid polygon.
        quad_order: Exact polynomial degree of the rule on each triangle, 1, 2 or 4.

    Returns:
        Points of shape (q, 2) and weights of shape (q,) summing to m(K).
    """
    _check_order(quad_order)
    v = p.vertices
    c = np.broadcast_to(polygon_centroid(p), v.shape)
    pts, w = _fan_rule(c, v, np.roll(v, -1, axis=0), quad_order)
    return pts.reshape(-1, 2), w.reshape(-1)


def mesh_quadrature(
    mesh: Mesh,
    quad_order: int = 2
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.int64]]:
    """Quadrature points of every cell at once.

    Returns:
        Points (P, 2), weights (P,) and owning cell (P,).
    """
    _check_order(quad_order)
    polygons = [c.polygon for c in mesh.cells]
    counts = np.array([len(p) for p in polygons])
    owner = np.repeat(np.arange(len(polygons)), counts)
    starts = np.concatenate([p.vertices for p in polygons])
    ends = np.concatenate([np.roll(p.vertices, -1, axis=0) for p in polygons])
    centers = np.array([polygon_centroid(p) for p in polygons])[owner]
    pts, w = _fan_rule(centers, starts, ends, quad_order)
    q = pts.shape[1]
    return pts.reshape(-1, 2), w.reshape(-1), np.repeat(owner, q)


"""
* Continuous Fields
"""


def zero_scalar(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Scalar field equal to zero everywhere."""
    return np.zeros(np.shape(x)[:-1])


def constant_tensor(matrix: ArrayLike) -> TensorEvaluator:
    """Evaluator of a constant tensor field."""
    m = np.array(matrix, dtype=np.float64)

    def evaluate(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.broadcast_to(m, np.shape(x)[:-1] + (2, 2)).copy()
    return evaluate


@dataclass(frozen=True)
class TensorField:
    """Object representing a symmetric diffusion tensor field Λ with its coercivity floor α₀."""
    evaluate: TensorEvaluator
    alpha0: float

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.evaluate(np.asarray(x, dtype=np.float64))

    def check_coercivity(self, samples: int = 200, seed: int = 0) -> None:
        """Spot-checks symmetry and Λ(x)ξ·ξ ≥ α₀|ξ|² on random points of the unit square.

        Raises:
            ProblemDefinitionError: On the first violated sample.
        """
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 1.0, size=(samples, 2))
        xi = rng.normal(size=(samples, 2))
        lam = self(x)
        if not np.allclose(lam, np.swapaxes(lam, -1, -2), rtol=1e-12, atol=1e-14):
            raise ProblemDefinitionError("Tensor field is not symmetric")
        quad = np.einsum('si,sij,sj->s', xi, lam, xi)
        floor = self.alpha0 * np.einsum('si,si->s', xi, xi)
        bad = np.flatnonzero(quad < floor * (1.0 - 1e-10))
        if len(bad):
            raise ProblemDefinitionError(f"Tensor field is not coercive with α₀={self.alpha0:g} at x={x[bad[0]]}")


@dataclass(frozen=True)
class ExactSolution:
    """Object representing an exact solution ū with its gradient."""
    value: ScalarField
    gradient: VectorField


@dataclass(frozen=True)
class ProblemCase:
    """Object representing −div(Λ∇ū) = f in Ω with ū = g on ∂Ω."""
    name: str
    tensor: TensorField
    source: ScalarField
    exact: Optional[ExactSolution] = None
    dirichlet: ScalarField = field(default=zero_scalar)
    homogeneous: bool = True

    def with_source(self, source: ScalarField, name: Optional[str] = None) -> 'ProblemCase':
        """Same case with another source, the exact solution no longer applies."""
        return replace(self, source=source, exact=None, name=name or f"{self.name}+source")

    def scaled(self, factor: float) -> 'ProblemCase':
        """Same case with source, boundary data and exact solution scaled by a constant."""
        src, g, ex = self.source, self.dirichlet, self.exact
        exact = None if ex is None else ExactSolution(
            value=lambda x: factor * ex.value(x),
            gradient=lambda x: factor * ex.gradient(x))
        return replace(
            self, name=f"{self.name}*{factor:g}",
            source=lambda x: factor * src(x),
            dirichlet=lambda x: factor * g(x),
            exact=exact)

    def check_boundary(self, samples: int = 100) -> None:
        """Checks that a homogeneous case's exact solution vanishes on the unit square boundary.

        Raises:
            ProblemDefinitionError: If a boundary sample is not zero.
        """
        if self.exact is None or not self.homogeneous:
            return
        t = np.linspace(0.0, 1.0, samples)
        zeros, ones = np.zeros_like(t), np.ones_like(t)
        pts = np.concatenate([
            np.column_stack([t, zeros]), np.column_stack([ones, t]),
            np.column_stack([t, ones]), np.column_stack([zeros, t])])
        worst = float(np.max(np.abs(self.exact.value(pts))))
        if worst > 1e-12:
            raise ProblemDefinitionError(f"Exact solution of '{self.name}' is {worst:.3e} on the boundary")


"""
* Cell Data
"""


@dataclass(frozen=True, eq=False)
class CellData:
    """Object representing the per-cell reductions Λ_K, Λ_K⁻¹ and ∫_K f."""
    lambda_k: NDArray[np.float64]
    lambda_k_inverse: NDArray[np.float64]
    f_k: float


@dataclass(frozen=True, eq=False)
class CellDataSet:
    """Stacked cell data of a whole mesh, arrays indexed by cell."""
    lambda_k: NDArray[np.float64]
    lambda_k_inverse: NDArray[np.float64]
    f_k: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.f_k)

    def __getitem__(self, k: int) -> CellData:
        return CellData(self.lambda_k[k], self.lambda_k_inverse[k], float(self.f_k[k]))

    def __iter__(self) -> Iterator[CellData]:
        return (self[k] for k in range(len(self)))

    def with_sources(self, f_k: ArrayLike) -> 'CellDataSet':
        """Same tensors with other source integrals."""
        return CellDataSet(self.lambda_k, self.lambda_k_inverse, np.asarray(f_k, dtype=np.float64))


def _check_spd(lam: NDArray[np.float64], cells: NDArray[np.int64]) -> None:
    eig = np.linalg.eigvalsh(lam)
    bad = np.flatnonzero(eig[..., 0] <= 0.0)
    if len(bad):
        raise ProblemDefinitionError(
            f"Cell-averaged tensor is not positive definite on {len(bad)} cell(s), first is cell {cells[bad[0]]}")


def cell_average_tensor(cell: Cell, tensor: TensorField, quad_order: int = 2) -> NDArray[np.float64]:
    """Λ_K = (1/m(K)) ∫_K Λ(x) dx by centroid-fan Gauss quadrature.

    Raises:
        ProblemDefinitionError: If the average is not symmetric positive definite.
    """
    pts, w = polygon_quadrature(cell.polygon, quad_order)
    lam = np.einsum('q,qij->ij', w, tensor(pts)) / cell.polygon.area
    lam = 0.5 * (lam + lam.T)
    _check_spd(lam[None], np.array([0]))
    return lam


def cell_source_integral(cell: Cell, source: ScalarField, quad_order: int = 2) -> float:
    """∫_K f(x) dx by centroid-fan Gauss quadrature."""
    pts, w = polygon_quadrature(cell.polygon, quad_order)
    return float(w @ source(pts))


def compute_cell_data(mesh: Mesh, case: ProblemCase, quad_order: int = 2) -> CellDataSet:
    """Cell averages of Λ, their inverses and the source integrals of every cell.

    Args:
        mesh: Discretization.
        case: Continuous problem.
        quad_order: Quadrature degree, 1, 2 or 4.

    Returns:
        Stacked cell data.

    Raises:
        ProblemDefinitionError: If some cell average is not positive definite.
    """
    pts, w, owner = mesh_quadrature(mesh, quad_order)
    n = mesh.n_cells
    lam = np.zeros((n, 2, 2))
    np.add.at(lam, owner, w[:, None, None] * case.tensor(pts))
    lam /= mesh.cell_areas[:, None, None]
    lam = 0.5 * (lam + np.swapaxes(lam, -1, -2))
    _check_spd(lam, np.arange(n))
    f_k = np.bincount(owner, weights=w * case.source(pts), minlength=n)
    return CellDataSet(lambda_k=lam, lambda_k_inverse=np.linalg.inv(lam), f_k=f_k)


"""
* Built-in Cases
"""


def case_isotropic() -> ProblemCase:
    """Λ = Id with ū(x) = x₁(1−x₁)x₂(1−x₂) on the unit square."""

    def value(x):
        x1, x2 = x[..., 0], x[..., 1]
        return x1 * (1 - x1) * x2 * (1 - x2)

    def gradient(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([(1 - 2 * x1) * x2 * (1 - x2), x1 * (1 - x1) * (1 - 2 * x2)], axis=-1)

    def source(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 2.0 * (x1 * (1 - x1) + x2 * (1 - x2))

    return ProblemCase(
        name='isotropic',
        tensor=TensorField(constant_tensor(np.eye(2)), alpha0=1.0),
        source=source,
        exact=ExactSolution(value, gradient))


# Anisotropic case data
LEPOTIER_CENTER = (-0.1, -0.1)
LEPOTIER_EPS = 1e-4


def case_lepotier(eps: float = LEPOTIER_EPS) -> ProblemCase:
    """Strongly anisotropic heterogeneous case with ū = sin(πx₁)sin(πx₂).

    The principal directions of Λ rotate around x̄ = (−0.1, −0.1), its
    eigenvalues are ε|x−x̄|² and |x−x̄|².
    """
    c1, c2 = LEPOTIER_CENTER
    pi = np.pi

    def tensor(x):
        y1, y2 = x[..., 0] - c1, x[..., 1] - c2
        off = -(1 - eps) * y1 * y2
        return np.stack([
            np.stack([y2 ** 2 + eps * y1 ** 2, off], axis=-1),
            np.stack([off, y1 ** 2 + eps * y2 ** 2], axis=-1)], axis=-2)

    def value(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    def gradient(x):
        s1, s2 = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        k1, k2 = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return pi * np.stack([k1 * s2, s1 * k2], axis=-1)

    def source(x):
        y1, y2 = x[..., 0] - c1, x[..., 1] - c2
        s1, s2 = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        k1, k2 = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return (pi ** 2 * (1 + eps) * s1 * s2 * (y1 ** 2 + y2 ** 2)
                + pi * (1 - 3 * eps) * k1 * s2 * y1
                + pi * (1 - 3 * eps) * s1 * k2 * y2
                + 2 * pi ** 2 * (1 - eps) * k1 * k2 * y1 * y2)

    # Smallest |x − x̄|² over the closed unit square is at the origin
    alpha0 = eps * (c1 ** 2 + c2 ** 2)
    return ProblemCase(
        name='lepotier',
        tensor=TensorField(tensor, alpha0=alpha0),
        source=source,
        exact=ExactSolution(value, gradient))


PATCH_TENSOR = ((2.0, 0.5), (0.5, 1.0))
PATCH_OFFSET = 0.5
PATCH_SLOPE = (1.0, -2.0)


def case_patch_affine(
    tensor: ArrayLike = PATCH_TENSOR,
    offset: float = PATCH_OFFSET,
    slope: ArrayLike = PATCH_SLOPE
) -> ProblemCase:
    """Affine ū = a + b·x with constant Λ, no source and g = ū on the boundary."""
    lam = np.array(tensor, dtype=np.float64)
    b = np.array(slope, dtype=np.float64)

    def value(x):
        return offset + x @ b

    def gradient(x):
        return np.broadcast_to(b, np.shape(x)).copy()

    return ProblemCase(
        name='patch-affine',
        tensor=TensorField(constant_tensor(lam), alpha0=float(np.linalg.eigvalsh(lam)[0])),
        source=zero_scalar,
        exact=ExactSolution(value, gradient),
        dirichlet=value,
        homogeneous=False)


CASES: dict[str, Callable[[], ProblemCase]] = {
    'isotropic': case_isotropic,
    'lepotier': case_lepotier,
    'patch-affine': case_patch_affine,
}


def get_case(name: str) -> ProblemCase:
    """Built-in case by name.

    Raises:
        ConfigError: If the name is unknown.
    """
    try:
        return CASES[name]()
    except KeyError:
        raise ConfigError(f"Unknown case '{name}', expected one of {sorted(CASES)}")
