"""
* Utils: Geometry
"""
# Standard Library Imports
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog

# Local Imports
from mfvscheme._errors import GeometryError

# Relative tolerance of geometric predicates, scaled by the local diameter
GEOM_TOL = 1e-12

# Points are plain float arrays of shape (2,)
Point2 = NDArray[np.float64]

"""
* Primitives
"""


def as_point(p: ArrayLike) -> Point2:
    """Converts coordinates into a finite read-only point.

    Args:
        p: Two coordinates.

    Returns:
        Point as a float array of shape (2,).

    Raises:
        GeometryError: If the coordinates are not two finite numbers.
    """
    arr = np.array(p, dtype=np.float64).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise GeometryError(f"Invalid point: {p!r}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Segment:
    """Object representing a straight edge between two distinct points."""
    a: Point2
    b: Point2

    def __post_init__(self):
        object.__setattr__(self, 'a', as_point(self.a))
        object.__setattr__(self, 'b', as_point(self.b))
        if np.array_equal(self.a, self.b):
            raise GeometryError(f"Degenerate segment at {tuple(self.a)}")

    @property
    def length(self) -> float:
        """float: Euclidean length, m(σ)."""
        return float(np.hypot(*(self.b - self.a)))

    def reversed(self) -> 'Segment':
        """Segment: Same segment traversed the other way."""
        return Segment(self.b, self.a)


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Object representing a convex polygon with counterclockwise vertices.

    Consecutive collinear vertices are allowed, they encode hanging nodes.
    """
    vertices: NDArray[np.float64]
    area: float = field(init=False, repr=False)
    diameter: float = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError(f"A polygon needs at least 3 vertices of 2 coordinates, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("Polygon vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, 'vertices', v)

        sides = np.roll(v, -1, axis=0) - v
        if np.any(np.all(sides == 0.0, axis=1)):
            raise GeometryError("Polygon has repeated consecutive vertices")
        diam = _max_pairwise_distance(v)
        area = _shoelace(v)
        if not area > 0.0:
            raise GeometryError(f"Polygon area must be positive, got {area:.6e} (clockwise or degenerate loop)")

        # Left turns only, and a single winding
        nxt = np.roll(sides, -1, axis=0)
        cross = sides[:, 0] * nxt[:, 1] - sides[:, 1] * nxt[:, 0]
        if np.any(cross < -GEOM_TOL * diam * diam):
            raise GeometryError("Polygon is not convex")
        turning = np.arctan2(cross, np.einsum('ij,ij->i', sides, nxt)).sum()
        if abs(turning - 2.0 * np.pi) > 1e-6:
            raise GeometryError("Polygon boundary winds more than once")

        object.__setattr__(self, 'area', area)
        object.__setattr__(self, 'diameter', diam)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def sides(self) -> list[Segment]:
        """list[Segment]: Boundary sides in counterclockwise order, side i runs from vertex i to vertex i+1."""
        v = self.vertices
        return [Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def _shoelace(v: NDArray[np.float64]) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _max_pairwise_distance(v: NDArray[np.float64]) -> float:
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.max(np.einsum('ijk,ijk->ij', d, d))))


"""
* Polygon Measures
"""


def polygon_measure(p: ConvexPolygon) -> float:
    """Area of a polygon by the shoelace formula, m(K).

    Args:
        p: Valid polygon.

    Returns:
        Strictly positive area.
    """
    return p.area


def polygon_centroid(p: ConvexPolygon) -> Point2:
    """Area-weighted centroid of a polygon.

    Args:
        p: Valid polygon.

    Returns:
        Center of gravity, strictly inside a convex polygon.
    """
    v = p.vertices
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
    c = ((v + w) * cross[:, None]).sum(axis=0) / (6.0 * p.area)
    return as_point(c)


def polygon_diameter(p: ConvexPolygon) -> float:
    """Maximum distance between two vertices, diam(K)."""
    return p.diameter


def polygon_chebyshev_center(p: ConvexPolygon) -> tuple[Point2, float]:
    """Largest disk inscribed in a polygon.

    Solves max r subject to n_i·c + r ≤ n_i·a_i over every supporting half-plane of the polygon.

    Args:
        p: Valid polygon.

    Returns:
        Tuple of the disk center and its radius.

    Raises:
        GeometryError: If the linear program has no optimal solution.
    """
    v = p.vertices
    rel = (v - v[0]) / p.diameter
    key = tuple(np.round(rel, 12).ravel().tolist())
    cx, cy, r = _chebyshev_lp(key)
    return as_point(v[0] + p.diameter * np.array([cx, cy])), r * p.diameter


@lru_cache(maxsize=8192)
def _chebyshev_lp(key: tuple[float, ...]) -> tuple[float, float, float]:
    """Chebyshev center of a normalized polygon shape, cached so that repeated cell shapes share one solve."""
    v = np.array(key, dtype=np.float64).reshape(-1, 2)
    d = np.roll(v, -1, axis=0) - v
    length = np.hypot(d[:, 0], d[:, 1])
    keep = length > 0.0
    normals = np.column_stack([d[keep, 1], -d[keep, 0]]) / length[keep, None]
    a_ub = np.column_stack([normals, np.ones(len(normals))])
    b_ub = np.einsum('ij,ij->i', normals, v[keep])
    res = linprog(
        c=np.array([0.0, 0.0, -1.0]),
        A_ub=a_ub, b_ub=b_ub,
        bounds=[(None, None), (None, None), (0.0, None)],
        method='highs')
    if res.status != 0 or res.x is None:
        raise GeometryError(f"Inscribed disk linear program failed: {res.message}")
    return float(res.x[0]), float(res.x[1]), float(res.x[2])


def polygon_inradius(p: ConvexPolygon) -> float:
    """Radius of the largest inscribed disk, ρ_K."""
    return polygon_chebyshev_center(p)[1]


def polygon_circumcenter(p: ConvexPolygon) -> Point2:
    """Circumcenter of a triangle.

    Raises:
        GeometryError: If the polygon is not a triangle.
    """
    if len(p) != 3:
        raise GeometryError(f"Circumcenter requires a triangle, got {len(p)} vertices")
    a, b, c = p.vertices
    ab, ac = b - a, c - a
    det = 2.0 * (ab[0] * ac[1] - ab[1] * ac[0])
    ab2, ac2 = ab @ ab, ac @ ac
    offset = np.array([ac[1] * ab2 - ab[1] * ac2, ab[0] * ac2 - ac[0] * ab2]) / det
    return as_point(a + offset)


def point_in_polygon(p: ConvexPolygon, x: ArrayLike, strict: bool = True) -> bool:
    """Tests whether a point lies inside a convex polygon.

    Args:
        p: Valid polygon.
        x: Point to test.
        strict: Require the point to be in the open polygon, away from the boundary by the tolerance.

    Returns:
        True if the point is inside.
    """
    v = p.vertices
    d = np.roll(v, -1, axis=0) - v
    r = np.asarray(x, dtype=np.float64) - v
    cross = d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]
    tol = GEOM_TOL * p.diameter * p.diameter
    return bool(np.all(cross > tol)) if strict else bool(np.all(cross >= -tol))


"""
* Segments
"""


def segment_midpoint(s: Segment) -> Point2:
    """Midpoint of a segment, the barycenter x_σ of an edge."""
    return as_point(0.5 * (s.a + s.b))


def _point_segment_distance(x: Point2, a: Point2, b: Point2) -> float:
    d = b - a
    t = np.clip(np.dot(x - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.hypot(*(x - (a + t * d))))


def segment_on_boundary(s: Segment, cell: ConvexPolygon) -> Optional[int]:
    """Finds the polygon side holding a segment.

    Args:
        s: Segment to locate.
        cell: Polygon whose boundary is searched.

    Returns:
        Index of the side containing both endpoints, or None.
    """
    v = cell.vertices
    tol = GEOM_TOL * cell.diameter
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        if _point_segment_distance(s.a, a, b) <= tol and _point_segment_distance(s.b, a, b) <= tol:
            return i
    return None


def outward_normal(s: Segment, cell: ConvexPolygon) -> NDArray[np.float64]:
    """Unit normal to a boundary segment pointing away from the cell, n_{K,σ}.

    Args:
        s: Segment lying on the cell boundary.
        cell: Valid polygon.

    Returns:
        Unit vector orthogonal to the segment.

    Raises:
        GeometryError: If the segment is not on the cell boundary.
    """
    if segment_on_boundary(s, cell) is None:
        raise GeometryError(f"Segment {tuple(s.a)}-{tuple(s.b)} is not on the cell boundary")
    d = s.b - s.a
    n = np.array([d[1], -d[0]]) / s.length
    if np.dot(n, segment_midpoint(s) - polygon_centroid(cell)) < 0.0:
        n = -n
    return n


"""
* Reconstruction
"""


def reconstruction_sum(
    p: ConvexPolygon,
    e: ArrayLike,
    x_k: ArrayLike,
    segments: Optional[Sequence[Segment]] = None
) -> NDArray[np.float64]:
    """Evaluates Σ_σ m(σ) (e·n_{K,σ}) (x_σ − x_K) over the boundary of a cell.

    For any point x_K this equals m(K) e, which is what lets the fluxes of a
    constant gradient recover that gradient.

    Args:
        p: Valid polygon.
        e: Constant vector.
        x_k: Any point.
        segments: Boundary edges tiling the polygon boundary, defaults to its sides.

    Returns:
        The sum as a vector of shape (2,).
    """
    e = np.asarray(e, dtype=np.float64)
    x_k = np.asarray(x_k, dtype=np.float64)
    if segments is None:
        a = p.vertices
        b = np.roll(a, -1, axis=0)
    else:
        a = np.array([s.a for s in segments])
        b = np.array([s.b for s in segments])
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    if segments is not None:
        # Orient explicit segments away from the centroid
        flip = np.einsum('ij,ij->i', normals, 0.5 * (a + b) - polygon_centroid(p)) < 0.0
        normals[flip] *= -1.0
    weights = length * (normals @ e)
    return (weights[:, None] * (0.5 * (a + b) - x_k)).sum(axis=0)


def polygon_from_points(points: Union[Sequence[Sequence[float]], NDArray[np.float64]]) -> ConvexPolygon:
    """Builds a polygon, reversing clockwise input loops."""
    v = np.array(points, dtype=np.float64)
    if v.ndim == 2 and v.shape[0] >= 3 and v.shape[1] == 2 and _shoelace(v) < 0.0:
        v = v[::-1].copy()
    return ConvexPolygon(v)
