"""
* Utils: Mesh Generators
"""
# Standard Library Imports
from dataclasses import dataclass
from typing import Sequence

# Third Party Imports
import numpy as np
from numpy.typing import NDArray

# Local Imports
from mfvscheme._errors import ConfigError, MeshValidationError
from mfvscheme.utils.mesh import Mesh, build_mesh

# Box on the unit square given as (x0, y0, x1, y1)
Box = tuple[float, float, float, float]

TRIANGLE_PATTERNS = ('diagonal', 'crisscross')
DISTORTION_KINDS = ('none', 'jitter', 'smooth')

"""
* Helpers
"""


def _check_count(name: str, n: int) -> None:
    if int(n) != n or n < 1:
        raise ConfigError(f"{name} must be a positive integer, got {n!r}")


def _grid(n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Vertex coordinates of an n×n grid on the unit square, indexed [j, i]."""
    t = np.linspace(0.0, 1.0, n + 1)
    return np.meshgrid(t, t)


def _quad_loops(x: NDArray[np.float64], y: NDArray[np.float64]) -> list[NDArray[np.float64]]:
    """Counterclockwise quadrilateral loops of a structured vertex grid, row by row."""
    rows, cols = x.shape[0] - 1, x.shape[1] - 1
    loops = []
    for j in range(rows):
        for i in range(cols):
            loops.append(np.array([
                (x[j, i], y[j, i]),
                (x[j, i + 1], y[j, i + 1]),
                (x[j + 1, i + 1], y[j + 1, i + 1]),
                (x[j + 1, i], y[j + 1, i])]))
    return loops


def _square_loops(x0: float, y0: float, width: float, m: int) -> list[NDArray[np.float64]]:
    """Loops of an m×m grid of squares covering [x0, x0+width]×[y0, y0+width]."""
    xs = x0 + width * np.arange(m + 1) / m
    ys = y0 + width * np.arange(m + 1) / m
    xs[-1], ys[-1] = x0 + width, y0 + width
    gx, gy = np.meshgrid(xs, ys)
    return _quad_loops(gx, gy)


"""
* Generators
"""


def gen_uniform_squares(n: int) -> Mesh:
    """Uniform n×n squares on the unit square with x_K at the centroids.

    Args:
        n: Squares per side.

    Returns:
        Mesh of n² cells numbered row by row from the bottom left.
    """
    _check_count('n', n)
    x, y = _grid(n)
    return build_mesh(_quad_loops(x, y))


def gen_uniform_triangles(n: int, pattern: str = 'diagonal', point_policy: str = 'centroid') -> Mesh:
    """Triangulation of the unit square built from n×n squares.

    Args:
        n: Squares per side.
        pattern: `diagonal` splits each square in 2 along its rising diagonal,
            `crisscross` in 4 through its center.
        point_policy: `centroid` or `circumcenter`. Both patterns produce right
            triangles whose circumcenter lies on an edge, so `circumcenter` is
            rejected by the mesh validation.

    Returns:
        Simplicial mesh of 2n² or 4n² cells.
    """
    _check_count('n', n)
    if pattern not in TRIANGLE_PATTERNS:
        raise ConfigError(f"Unknown triangle pattern '{pattern}', expected one of {TRIANGLE_PATTERNS}")
    x, y = _grid(n)
    loops = []
    for j in range(n):
        for i in range(n):
            p00 = (x[j, i], y[j, i])
            p10 = (x[j, i + 1], y[j, i + 1])
            p11 = (x[j + 1, i + 1], y[j + 1, i + 1])
            p01 = (x[j + 1, i], y[j + 1, i])
            if pattern == 'diagonal':
                loops += [[p00, p10, p11], [p00, p11, p01]]
            else:
                c = (0.5 * (p00[0] + p11[0]), 0.5 * (p00[1] + p11[1]))
                loops += [[p00, p10, c], [p10, p11, c], [p11, p01, c], [p01, p00, c]]
    return build_mesh(loops, point_policy=point_policy)


def gen_refined_nonconforming(base_n: int, refine_boxes: Sequence[tuple[Box, int]]) -> Mesh:
    """Uniform squares with some regions refined, leaving hanging nodes at their borders.

    Args:
        base_n: Base squares per side.
        refine_boxes: Regions and refinement factors. A base square is refined
            by `factor`×`factor` when its center lies in the region.

    Returns:
        Nonconforming mesh, base cells in row order with refined cells in place.

    Raises:
        ConfigError: On factors below 2 or boxes not aligned with the base grid.
        MeshValidationError: If overlapping regions ask for different factors.
    """
    _check_count('base_n', base_n)
    h = 1.0 / base_n
    for box, factor in refine_boxes:
        if int(factor) != factor or factor < 2:
            raise ConfigError(f"Refinement factors must be integers >= 2, got {factor!r}")
        scaled = np.asarray(box, dtype=np.float64) * base_n
        if len(scaled) != 4 or np.any(np.abs(scaled - np.round(scaled)) > 1e-9):
            raise ConfigError(f"Refinement box {box} is not a union of base cells")

    loops: list[NDArray[np.float64]] = []
    conflicts: list[int] = []
    for j in range(base_n):
        for i in range(base_n):
            cx, cy = (i + 0.5) * h, (j + 0.5) * h
            factors = {
                int(f) for (x0, y0, x1, y1), f in refine_boxes
                if x0 <= cx <= x1 and y0 <= cy <= y1}
            if len(factors) > 1:
                conflicts.append(j * base_n + i)
                continue
            m = factors.pop() if factors else 1
            x0, y0 = i / base_n, j / base_n
            xs = x0 + h * np.arange(m + 1) / m
            ys = y0 + h * np.arange(m + 1) / m
            xs[-1], ys[-1] = (i + 1) / base_n, (j + 1) / base_n
            gx, gy = np.meshgrid(xs, ys)
            loops += _quad_loops(gx, gy)
    if conflicts:
        raise MeshValidationError("Overlapping refinement regions with conflicting factors", cells=conflicts)
    return build_mesh(loops)


def gen_quadrant_squares(counts: Sequence[int] = (4, 12, 7, 5), level: int = 1) -> Mesh:
    """Unit square split in four quadrants, each tiled by its own uniform squares.

    Args:
        counts: Squares per quadrant side for the SW, SE, NE and NW quadrants.
        level: Extra division of every edge, 1 for none.

    Returns:
        Nonconforming mesh with hanging nodes along the quadrant borders.
    """
    _check_count('level', level)
    if len(counts) != 4:
        raise ConfigError(f"Exactly 4 quadrant counts are required, got {len(counts)}")
    for c in counts:
        _check_count('quadrant count', c)
    origins = ((0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5))
    loops: list[NDArray[np.float64]] = []
    for (x0, y0), c in zip(origins, counts):
        loops += _square_loops(x0, y0, 0.5, int(c) * level)
    return build_mesh(loops)


@dataclass(frozen=True)
class Distortion:
    """Object representing a vertex displacement applied to a uniform quad grid.

    Attributes:
        kind: `none`, `jitter` (seeded uniform random displacement of interior
            vertices by up to `amplitude`·h per coordinate) or `smooth`
            (x ↦ x + amplitude·sin(2πx₁)sin(2πx₂) on both coordinates).
        amplitude: Jitter fraction of h, or smooth map amplitude.
        seed: Random seed for jitter.
    """
    kind: str = 'none'
    amplitude: float = 0.0
    seed: int = 0


def gen_distorted_quads(n: int, distortion: Distortion = Distortion()) -> Mesh:
    """Uniform n×n quadrilaterals with displaced vertices.

    Boundary vertices stay fixed so the domain remains the unit square.

    Args:
        n: Quads per side.
        distortion: Displacement applied to the vertices.

    Returns:
        Mesh of n² convex quadrilaterals.

    Raises:
        MeshValidationError: Naming the cells the displacement made non-convex.
    """
    _check_count('n', n)
    if distortion.kind not in DISTORTION_KINDS:
        raise ConfigError(f"Unknown distortion '{distortion.kind}', expected one of {DISTORTION_KINDS}")
    x, y = _grid(n)
    x, y = x.copy(), y.copy()
    interior = np.zeros(x.shape, dtype=bool)
    interior[1:-1, 1:-1] = True

    if distortion.kind == 'jitter':
        rng = np.random.default_rng(distortion.seed)
        shift = rng.uniform(-1.0, 1.0, size=(2,) + x.shape) * (distortion.amplitude / n)
        x[interior] += shift[0][interior]
        y[interior] += shift[1][interior]
    elif distortion.kind == 'smooth':
        bump = distortion.amplitude * np.sin(2.0 * np.pi * x) * np.sin(2.0 * np.pi * y)
        x[interior] += bump[interior]
        y[interior] += bump[interior]
    return build_mesh(_quad_loops(x, y))
