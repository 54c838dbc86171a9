"""
* Utils: Mesh
"""
# Standard Library Imports
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from logging import getLogger
from typing import Mapping, Optional, Sequence

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray
import shapely

# Local Imports
from mfvscheme._errors import GeometryError, MeshValidationError
from mfvscheme.types.reports import MeshSummary
from mfvscheme.utils.geometry import (
    ConvexPolygon,
    GEOM_TOL,
    Point2,
    Segment,
    as_point,
    point_in_polygon,
    polygon_centroid,
    polygon_circumcenter,
    polygon_from_points,
    polygon_inradius,
    segment_midpoint)

# Edge matching tolerance, relative to the domain diameter
MATCH_TOL = 1e-9

# Supported policies for placing x_K
POINT_POLICIES = ('centroid', 'circumcenter')

"""
* Mesh Entities
"""


class EdgeKind(str, Enum):
    """Location of an edge with respect to the domain boundary."""
    INTERIOR = 'interior'
    BOUNDARY = 'boundary'


@dataclass(frozen=True, eq=False)
class Cell:
    """Object representing a control volume K with its point x_K and its edges E_K in counterclockwise order."""
    polygon: ConvexPolygon
    point: Point2
    edge_ids: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Edge:
    """Object representing an edge σ with its barycenter x_σ and its one or two side cells."""
    segment: Segment
    barycenter: Point2
    side_cells: tuple[int, ...]
    kind: EdgeKind

    @property
    def is_interior(self) -> bool:
        return self.kind is EdgeKind.INTERIOR


@dataclass(frozen=True, eq=False)
class Mesh:
    """Admissible discretization of a polygonal domain.

    Cells, edges and points are immutable once built. Array views used by the
    scheme are computed on first access and cached.
    """
    cells: tuple[Cell, ...]
    edges: tuple[Edge, ...]
    domain_area: float
    size: float
    regularity: float
    labels: Mapping[int, str] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    """
    * Cell Arrays
    """

    @cached_property
    def cell_areas(self) -> NDArray[np.float64]:
        """NDArray: m(K) per cell."""
        return np.array([c.polygon.area for c in self.cells])

    @cached_property
    def cell_points(self) -> NDArray[np.float64]:
        """NDArray: x_K per cell, shape (N, 2)."""
        return np.array([c.point for c in self.cells]).reshape(-1, 2)

    @cached_property
    def cell_diameters(self) -> NDArray[np.float64]:
        """NDArray: diam(K) per cell."""
        return np.array([c.polygon.diameter for c in self.cells])

    @cached_property
    def cell_edge_counts(self) -> NDArray[np.int64]:
        """NDArray: Card(E_K) per cell."""
        return np.array([len(c.edge_ids) for c in self.cells], dtype=np.int64)

    @property
    def is_simplicial(self) -> bool:
        """bool: Whether every cell is a triangle with exactly three edges."""
        return bool(np.all(self.cell_edge_counts == 3))

    """
    * Edge Arrays
    """

    @cached_property
    def edge_centers(self) -> NDArray[np.float64]:
        """NDArray: x_σ per edge, shape (E, 2)."""
        return np.array([e.barycenter for e in self.edges]).reshape(-1, 2)

    @cached_property
    def edge_lengths(self) -> NDArray[np.float64]:
        """NDArray: m(σ) per edge."""
        return np.array([e.segment.length for e in self.edges])

    @cached_property
    def edge_interior(self) -> NDArray[np.bool_]:
        """NDArray: True for interior edges."""
        return np.array([e.is_interior for e in self.edges], dtype=bool)

    @cached_property
    def interior_edges(self) -> NDArray[np.int64]:
        """NDArray: Ids of interior edges in ascending order, the hybrid unknown ordering."""
        return np.flatnonzero(self.edge_interior)

    @cached_property
    def boundary_edges(self) -> NDArray[np.int64]:
        """NDArray: Ids of boundary edges in ascending order."""
        return np.flatnonzero(~self.edge_interior)

    """
    * Incidence Arrays
    """

    @cached_property
    def incidence_ptr(self) -> NDArray[np.int64]:
        """NDArray: Offsets of each cell's (cell, edge) incidences in the flat incidence arrays."""
        return np.concatenate([[0], np.cumsum(self.cell_edge_counts)]).astype(np.int64)

    @cached_property
    def incidence_cell(self) -> NDArray[np.int64]:
        """NDArray: Cell of each incidence."""
        return np.repeat(np.arange(self.n_cells), self.cell_edge_counts)

    @cached_property
    def incidence_edge(self) -> NDArray[np.int64]:
        """NDArray: Edge of each incidence, cells in order and edges in each cell's order."""
        if not self.cells:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.asarray(c.edge_ids, dtype=np.int64) for c in self.cells])

    @cached_property
    def incidence_offsets(self) -> NDArray[np.float64]:
        """NDArray: x_σ − x_K per incidence, shape (I, 2)."""
        return self.edge_centers[self.incidence_edge] - self.cell_points[self.incidence_cell]

    @cached_property
    def incidence_normals(self) -> NDArray[np.float64]:
        """NDArray: n_{K,σ} per incidence, shape (I, 2)."""
        a = np.array([self.edges[e].segment.a for e in self.incidence_edge]).reshape(-1, 2)
        b = np.array([self.edges[e].segment.b for e in self.incidence_edge]).reshape(-1, 2)
        d = b - a
        n = np.column_stack([d[:, 1], -d[:, 0]]) / np.hypot(d[:, 0], d[:, 1])[:, None]
        flip = np.einsum('ij,ij->i', n, self.incidence_offsets) < 0.0
        n[flip] *= -1.0
        return n

    def incidence_index(self, cell: int, edge: int) -> int:
        """Position of the (cell, edge) incidence in the flat incidence arrays.

        Raises:
            KeyError: If the edge is not an edge of the cell.
        """
        start = int(self.incidence_ptr[cell])
        try:
            return start + self.cells[cell].edge_ids.index(edge)
        except ValueError:
            raise KeyError(f"Edge {edge} is not an edge of cell {cell}")

    """
    * Metrics
    """

    @cached_property
    def cell_inradii(self) -> NDArray[np.float64]:
        """NDArray: ρ_K per cell."""
        return np.array([polygon_inradius(c.polygon) for c in self.cells])

    def summary(self) -> MeshSummary:
        """Counts and metrics of this mesh."""
        return MeshSummary(
            cells=self.n_cells,
            edges=self.n_edges,
            interior_edges=int(self.edge_interior.sum()),
            boundary_edges=int((~self.edge_interior).sum()),
            max_cell_edges=int(self.cell_edge_counts.max()) if self.cells else 0,
            size=self.size,
            regularity=self.regularity,
            domain_area=self.domain_area)


"""
* Metrics
"""


def mesh_size(polygons: Sequence[ConvexPolygon]) -> float:
    """size(D): largest cell diameter."""
    return max((p.diameter for p in polygons), default=0.0)


def mesh_regularity(polygons: Sequence[ConvexPolygon], edge_counts: Sequence[int]) -> float:
    """regul(D): max over cells of max(diam(K)²/ρ_K², Card(E_K)) in two dimensions."""
    regul = 0.0
    for p, card in zip(polygons, edge_counts):
        ratio = (p.diameter / polygon_inradius(p)) ** 2
        regul = max(regul, ratio, float(card))
    return regul


"""
* Edge Discovery
"""


@dataclass(eq=False)
class _Side:
    """Polygon side seen from the line it lies on."""
    cell: int
    local: int
    start: Point2
    end: Point2
    left: bool
    t0: float = 0.0
    t1: float = 0.0


@dataclass(eq=False)
class _RawEdge:
    a: Point2
    b: Point2
    cells: tuple[int, ...]
    # (cell, local side index, counterclockwise start point) per side cell
    anchors: list[tuple[int, int, Point2]]


def _line_groups(polygons: Sequence[ConvexPolygon], tol: float) -> list[list[_Side]]:
    """Groups every polygon side with the other sides lying on the same line."""
    starts = np.concatenate([p.vertices for p in polygons])
    ends = np.concatenate([np.roll(p.vertices, -1, axis=0) for p in polygons])
    owner = np.concatenate([np.full(len(p), k) for k, p in enumerate(polygons)])
    local = np.concatenate([np.arange(len(p)) for p in polygons])

    d = ends - starts
    u = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    flip = (u[:, 0] < -1e-12) | ((np.abs(u[:, 0]) <= 1e-12) & (u[:, 1] < 0.0))
    direction = np.where(flip[:, None], -u, u)
    theta = np.arctan2(direction[:, 1], direction[:, 0])
    offset = direction[:, 0] * starts[:, 1] - direction[:, 1] * starts[:, 0]

    # Cluster by angle, then by offset inside each angle cluster
    order = np.argsort(theta, kind='stable')
    tid = np.empty(len(theta), dtype=np.int64)
    tid[order] = np.concatenate([[0], np.cumsum(np.diff(theta[order]) > 1e-9)])
    order = np.lexsort((offset, tid))
    breaks = (np.diff(tid[order]) != 0) | (np.diff(offset[order]) > tol)
    bounds = np.concatenate([[0], np.flatnonzero(breaks) + 1, [len(order)]])

    groups = []
    for g0, g1 in zip(bounds[:-1], bounds[1:]):
        idx = order[g0:g1]
        groups.append([
            _Side(cell=int(owner[i]), local=int(local[i]), start=starts[i], end=ends[i], left=not bool(flip[i]))
            for i in idx])
    return groups


def _match_line(sides: list[_Side], tol: float, overlaps: set[int]) -> list[_RawEdge]:
    """Splits the sides lying on one line into interior and boundary edges."""

    # Fast paths: a lone side, or one side shared exactly by two cells
    if len(sides) == 1:
        s = sides[0]
        return [_RawEdge(s.start, s.end, (s.cell,), [(s.cell, s.local, s.start)])]
    if len(sides) == 2:
        s, r = sides
        if s.left != r.left and s.cell != r.cell and \
                np.array_equal(s.start, r.end) and np.array_equal(s.end, r.start):
            a, b = (s.start, s.end) if s.left else (r.start, r.end)
            return [_RawEdge(a, b, (min(s.cell, r.cell), max(s.cell, r.cell)),
                             [(s.cell, s.local, s.start), (r.cell, r.local, r.start)])]

    # General sweep along the line direction
    ref = sides[0].end - sides[0].start
    ref = ref / np.hypot(*ref)
    if not sides[0].left:
        ref = -ref
    points: list[tuple[float, int, Point2]] = []
    for n, s in enumerate(sides):
        ta, tb = float(ref @ s.start), float(ref @ s.end)
        s.t0, s.t1 = min(ta, tb), max(ta, tb)
        points.append((ta, n, s.start))
        points.append((tb, n, s.end))
    points.sort(key=lambda p: p[0])

    # Merge endpoints closer than the tolerance into breakpoints
    breaks: list[Point2] = []
    positions: list[float] = []
    for t, _, p in points:
        if not positions or t - positions[-1] > tol:
            positions.append(t)
            breaks.append(p)

    def locate(t: float) -> int:
        k = int(np.searchsorted(positions, t - tol))
        return min(k, len(positions) - 1)

    cover: list[list[_Side]] = [[] for _ in range(len(positions) - 1)]
    for s in sides:
        for j in range(locate(s.t0), locate(s.t1)):
            cover[j].append(s)

    # Pieces between consecutive breakpoints, merged while their owner key repeats
    edges: list[_RawEdge] = []
    current_key, current_pieces, j_start = None, [], 0

    def flush(j_end: int):
        if current_key is None:
            return
        cells = tuple(sorted(set(s.cell for s in current_pieces)))
        anchors = []
        for cell in cells:
            own = [s for s in current_pieces if s.cell == cell]
            # Counterclockwise start of this cell's portion
            first = own[0] if own[0].left else own[-1]
            start = breaks[j_start] if first.left else breaks[j_end]
            anchors.append((cell, first.local, start))
        edges.append(_RawEdge(breaks[j_start], breaks[j_end], cells, anchors))

    for j, covering in enumerate(cover):
        lefts = [s for s in covering if s.left]
        rights = [s for s in covering if not s.left]
        if len(lefts) > 1 or len(rights) > 1:
            overlaps.update(s.cell for s in covering)
        if not covering:
            key = None
        elif lefts and rights:
            key = ('interior', lefts[0].cell, rights[0].cell)
        else:
            s = covering[0]
            key = ('boundary', s.cell, s.local)
        if key != current_key:
            flush(j)
            current_key, current_pieces, j_start = key, [], j
        current_pieces.extend(s for s in covering if s not in current_pieces)
    flush(len(cover))
    return edges


def _discover_edges(
    polygons: Sequence[ConvexPolygon],
    tol: float
) -> tuple[list[Edge], list[tuple[int, ...]]]:
    """Discovers the edges of a collection of polygons by geometric matching.

    Args:
        polygons: Cell polygons.
        tol: Absolute matching tolerance.

    Returns:
        Tuple of the ordered edge list and the ordered edge ids of each cell.

    Raises:
        MeshValidationError: If cell interiors overlap along a shared line.
    """
    overlaps: set[int] = set()
    raw: list[_RawEdge] = []
    for group in _line_groups(polygons, tol):
        raw.extend(_match_line(group, tol, overlaps))
    if overlaps:
        raise MeshValidationError("Overlapping cell interiors", cells=overlaps)

    def order_key(e: _RawEdge) -> tuple:
        if len(e.cells) == 2:
            return 0, e.cells[0], e.cells[1], float(e.a[0]), float(e.a[1])
        return 1, e.cells[0], e.anchors[0][1], float(e.a[0]), float(e.a[1])

    raw.sort(key=order_key)
    edges: list[Edge] = []
    per_cell: list[list[tuple[int, float, int]]] = [[] for _ in polygons]
    for eid, e in enumerate(raw):
        try:
            segment = Segment(e.a, e.b)
        except GeometryError:
            raise MeshValidationError("Edge shorter than the matching tolerance", cells=e.cells)
        kind = EdgeKind.INTERIOR if len(e.cells) == 2 else EdgeKind.BOUNDARY
        edges.append(Edge(segment=segment, barycenter=segment_midpoint(segment), side_cells=e.cells, kind=kind))
        for cell, side, start in e.anchors:
            v = polygons[cell].vertices
            origin, axis = v[side], v[(side + 1) % len(v)] - v[side]
            per_cell[cell].append((side, float((start - origin) @ axis / (axis @ axis)), eid))
    cell_edges = [tuple(eid for _, _, eid in sorted(entries)) for entries in per_cell]
    return edges, cell_edges


"""
* Admissibility
"""


def _check_tiling(polygons: Sequence[ConvexPolygon]) -> float:
    """Checks that cells neither overlap nor leave holes, returning the domain area.

    Raises:
        MeshValidationError: On overlapping interiors, holes or disconnected pieces.
    """
    geoms = np.empty(len(polygons), dtype=object)
    geoms[:] = [shapely.Polygon(p.vertices) for p in polygons]
    areas = np.array([p.area for p in polygons])

    # Overlapping interiors
    tree = shapely.STRtree(geoms)
    i, j = tree.query(geoms, predicate='intersects')
    keep = i < j
    i, j = i[keep], j[keep]
    if len(i):
        shared = shapely.area(shapely.intersection(geoms[i], geoms[j]))
        bad = shared > 1e-10 * np.minimum(areas[i], areas[j])
        if np.any(bad):
            raise MeshValidationError("Overlapping cell interiors", cells=np.concatenate([i[bad], j[bad]]))

    # Holes and disconnected pieces
    union = shapely.union_all(geoms)
    total = float(areas.sum())
    if union.geom_type != 'Polygon':
        raise MeshValidationError(f"Cells do not form a connected domain ({union.geom_type})")
    holes = [ring for ring in union.interiors if abs(shapely.Polygon(ring).area) > 1e-12 * total]
    if holes:
        touching = tree.query(shapely.LinearRing(holes[0]), predicate='intersects')
        raise MeshValidationError(f"Gap in the tiling ({len(holes)} hole(s))", cells=touching)
    domain_area = float(union.area)
    if abs(domain_area - total) > 1e-10 * domain_area:
        raise MeshValidationError(f"Cell areas sum to {total:.17g} but the domain area is {domain_area:.17g}")
    return domain_area


def _cell_point(polygon: ConvexPolygon, policy: str) -> Point2:
    if policy == 'centroid':
        return polygon_centroid(polygon)
    if policy == 'circumcenter':
        return polygon_circumcenter(polygon)
    raise MeshValidationError(f"Unknown cell point policy '{policy}', expected one of {POINT_POLICIES}")


"""
* Building Meshes
"""


def build_mesh(
    loops: Sequence[ArrayLike],
    points: Optional[Sequence[Optional[ArrayLike]]] = None,
    point_policy: str = 'centroid',
    labels: Optional[Mapping[int, str]] = None,
    validate: bool = True
) -> Mesh:
    """Builds an admissible discretization from cell vertex loops.

    Edges are discovered geometrically: every overlap of two cells' collinear
    boundary portions becomes one interior edge, remaining boundary portions
    become boundary edges split at vertices.

    Args:
        loops: One vertex loop per cell, clockwise loops are reversed.
        points: Optional x_K per cell, None entries fall back to the policy.
        point_policy: `centroid` or `circumcenter` (triangles only).
        labels: Optional text label per cell index.
        validate: Run the overlap and gap checks.

    Returns:
        Immutable mesh with metrics computed.

    Raises:
        MeshValidationError: Listing the offending cells.
    """
    polygons: list[ConvexPolygon] = []
    bad: dict[int, str] = {}
    for k, loop in enumerate(loops):
        try:
            polygons.append(polygon_from_points(loop))
        except GeometryError as e:
            bad[k] = str(e)
    if bad:
        first = next(iter(bad.values()))
        raise MeshValidationError(f"Invalid cell polygons: {first}", cells=list(bad))
    if not polygons:
        raise MeshValidationError("A mesh needs at least one cell")

    # Cell points
    cell_points: list[Point2] = []
    for k, p in enumerate(polygons):
        given = points[k] if points is not None and k < len(points) else None
        try:
            x = as_point(given) if given is not None else _cell_point(p, point_policy)
        except GeometryError as e:
            bad[k] = str(e)
            continue
        if not point_in_polygon(p, x, strict=True):
            bad[k] = f"x_K {tuple(x)} is not strictly inside the cell"
        cell_points.append(x)
    if bad:
        first = next(iter(bad.values()))
        raise MeshValidationError(f"Invalid cell points: {first}", cells=list(bad))

    # Edges
    all_vertices = np.concatenate([p.vertices for p in polygons])
    extent = float(np.hypot(*(all_vertices.max(axis=0) - all_vertices.min(axis=0))))
    edges, cell_edges = _discover_edges(polygons, MATCH_TOL * extent)
    domain_area = _check_tiling(polygons) if validate else float(sum(p.area for p in polygons))

    cells = tuple(
        Cell(polygon=p, point=x, edge_ids=ids)
        for p, x, ids in zip(polygons, cell_points, cell_edges))
    mesh = Mesh(
        cells=cells,
        edges=tuple(edges),
        domain_area=domain_area,
        size=mesh_size(polygons),
        regularity=mesh_regularity(polygons, [len(ids) for ids in cell_edges]),
        labels=dict(labels or {}))
    getLogger(__name__).debug(
        f"Built mesh: {mesh.n_cells} cells, {mesh.n_edges} edges, "
        f"size={mesh.size:.4g}, regul={mesh.regularity:.4g}")
    return mesh


def validate_mesh(mesh: Mesh) -> None:
    """Runs the full admissibility check on a built mesh.

    Checks the edge/cell incidences both ways, that each cell's edges tile its
    boundary, that every interior edge lies on both side cells, that x_K is
    strictly inside, and that the tiling has no overlap or gap.

    Raises:
        MeshValidationError: Listing the offending cells.
    """
    bad: set[int] = set()
    for k, cell in enumerate(mesh.cells):
        if not point_in_polygon(cell.polygon, cell.point, strict=True):
            bad.add(k)
        perimeter = float(np.sum(np.hypot(*np.diff(
            np.vstack([cell.polygon.vertices, cell.polygon.vertices[:1]]), axis=0).T)))
        covered = sum(mesh.edges[e].segment.length for e in cell.edge_ids)
        if abs(perimeter - covered) > 1e-10 * perimeter:
            bad.add(k)
        for e in cell.edge_ids:
            if k not in mesh.edges[e].side_cells:
                bad.add(k)
    for eid, edge in enumerate(mesh.edges):
        expected = 2 if edge.is_interior else 1
        if len(edge.side_cells) != expected:
            bad.update(edge.side_cells)
        for k in edge.side_cells:
            if eid not in mesh.cells[k].edge_ids:
                bad.add(k)
    if bad:
        raise MeshValidationError("Inconsistent cell/edge incidences", cells=bad)

    # Closed boundaries: Σ m(σ) n_{K,σ} = 0
    weighted = mesh.incidence_normals * mesh.edge_lengths[mesh.incidence_edge][:, None]
    sums = np.zeros((mesh.n_cells, 2))
    np.add.at(sums, mesh.incidence_cell, weighted)
    open_cells = np.flatnonzero(np.hypot(sums[:, 0], sums[:, 1]) > GEOM_TOL * 10 * mesh.cell_diameters)
    if len(open_cells):
        raise MeshValidationError("Cell edges do not close the cell boundary", cells=open_cells)
    _check_tiling([c.polygon for c in mesh.cells])
