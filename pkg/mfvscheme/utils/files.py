"""
* Utils: Mesh and Solution Files
"""
# Standard Library Imports
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

# Third Party Imports
import numpy as np
from numpy.typing import ArrayLike, NDArray
import pandas as pd
from omnitils.files import dump_data_file, load_data_file, mkdir_full_perms

# Local Imports
from mfvscheme._errors import ConfigError, MeshFormatError
from mfvscheme.utils.mesh import Mesh, build_mesh
from mfvscheme.utils.scheme import Solution

MESH_HEADER = 'mfv-mesh v1'
SOLUTION_HEADER = 'mfv-sol v1'
CSV_COLUMNS = ['case', 'mesh', 'cells', 'h', 'regul', 'e2_u', 'e2_grad', 'u_min', 'u_max']
CONVERGENCE_COLUMNS = CSV_COLUMNS + ['order_u', 'order_grad']

"""
* Text Helpers
"""


def _fmt(x: float) -> str:
    """Float with 17 significant digits, enough to round-trip a double."""
    return f"{float(x):.17g}"


def _lines(path: Path) -> Iterator[tuple[int, list[str]]]:
    """Yields (line number, fields) of non-empty lines with `#` comments removed."""
    with open(path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            text = raw.split('#', 1)[0].strip()
            if text:
                yield number, text.split()


def _float(value: str, line: int, name: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise MeshFormatError(f"'{value}' is not a number", line=line, field=name)
    if not np.isfinite(x):
        raise MeshFormatError(f"'{value}' is not finite", line=line, field=name)
    return x


def _int(value: str, line: int, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise MeshFormatError(f"'{value}' is not an integer", line=line, field=name)


def _expect_header(rows: Iterator[tuple[int, list[str]]], header: str) -> None:
    try:
        number, fields = next(rows)
    except StopIteration:
        raise MeshFormatError(f"Empty file, expected header '{header}'", line=1)
    if ' '.join(fields) != header:
        raise MeshFormatError(f"Expected header '{header}', got '{' '.join(fields)}'", line=number, field='header')


def _check_ids(seen: Sequence[int], section: str, line: int) -> None:
    if list(seen) != list(range(len(seen))):
        raise MeshFormatError(f"Indices of section '{section}' must run 0..{len(seen) - 1} in order", line=line)


"""
* Mesh Files
"""


def _mesh_vertices(mesh: Mesh) -> tuple[NDArray[np.float64], list[list[int]]]:
    """Distinct vertices in first-seen order and each cell's loop as vertex indices."""
    index: dict[tuple[float, float], int] = {}
    loops = []
    for cell in mesh.cells:
        loop = []
        for x, y in cell.polygon.vertices:
            loop.append(index.setdefault((float(x), float(y)), len(index)))
        loops.append(loop)
    return np.array(list(index), dtype=np.float64).reshape(-1, 2), loops


def write_mesh(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Writes a mesh in the `mfv-mesh v1` text format.

    Every cell line carries its point, so reading the file back reproduces the
    cells, their points and, through edge discovery, the same edges.

    Args:
        mesh: Mesh to write.
        path: Destination file, parent directories are created.

    Returns:
        The written path.
    """
    path = Path(path)
    mkdir_full_perms(path.parent)
    vertices, loops = _mesh_vertices(mesh)
    out = [MESH_HEADER, f"vertices {len(vertices)}"]
    out += [f"{i} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(vertices)]
    out.append(f"cells {mesh.n_cells}")
    for k, (cell, loop) in enumerate(zip(mesh.cells, loops)):
        px, py = cell.point
        out.append(f"{k} {' '.join(str(i) for i in loop)} point {_fmt(px)} {_fmt(py)}")
    if mesh.labels:
        out.append(f"labels {len(mesh.labels)}")
        out += [f"{k} {label}" for k, label in sorted(mesh.labels.items())]
    path.write_text('\n'.join(out) + '\n', encoding='utf-8')
    getLogger(__name__).debug(f"Wrote {mesh.n_cells} cells to {path}")
    return path


def read_mesh(path: Union[str, Path], point_policy: str = 'centroid', validate: bool = True) -> Mesh:
    """Reads a mesh in the `mfv-mesh v1` text format and builds it.

    Args:
        path: Mesh file.
        point_policy: x_K policy for cells without a `point`.
        validate: Run the tiling checks of `build_mesh`.

    Returns:
        Built mesh.

    Raises:
        MeshFormatError: With the line and field of the first parse error.
        MeshValidationError: If the mesh is not admissible.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Mesh file not found: {path}")
    rows = _lines(path)
    _expect_header(rows, MESH_HEADER)

    vertices: list[tuple[float, float]] = []
    loops: list[list[int]] = []
    points: list[Optional[tuple[float, float]]] = []
    labels: dict[int, str] = {}
    section, expected, section_line = None, 0, 1
    counts: dict[str, int] = {}

    def close(line: int) -> None:
        if section is not None and counts[section] != expected:
            raise MeshFormatError(
                f"Section '{section}' declares {expected} entries but has {counts[section]}", line=line)

    for number, fields in rows:
        if fields[0] in ('vertices', 'cells', 'labels') and len(fields) == 2:
            close(number)
            section, section_line = fields[0], number
            if section in counts:
                raise MeshFormatError(f"Duplicate section '{section}'", line=number, field=section)
            expected = _int(fields[1], number, 'count')
            counts[section] = 0
            continue
        if section is None:
            raise MeshFormatError(f"Entry outside of a section: '{' '.join(fields)}'", line=number)
        counts[section] += 1
        index = _int(fields[0], number, 'index')
        if section != 'labels' and index != counts[section] - 1:
            raise MeshFormatError(f"Expected index {counts[section] - 1}", line=number, field='index')

        if section == 'vertices':
            if len(fields) != 3:
                raise MeshFormatError("Vertex lines are 'index x y'", line=number)
            vertices.append((_float(fields[1], number, 'x'), _float(fields[2], number, 'y')))
        elif section == 'cells':
            body, point = fields[1:], None
            if 'point' in body:
                at = body.index('point')
                if len(body) != at + 3:
                    raise MeshFormatError("Cell point is 'point x y' at the end of the line", line=number, field='point')
                point = (_float(body[at + 1], number, 'point.x'), _float(body[at + 2], number, 'point.y'))
                body = body[:at]
            if len(body) < 3:
                raise MeshFormatError("A cell needs at least 3 vertices", line=number, field='loop')
            loop = [_int(v, number, 'loop') for v in body]
            bad = [v for v in loop if not 0 <= v < len(vertices)]
            if bad:
                raise MeshFormatError(f"Unknown vertex {bad[0]}", line=number, field='loop')
            loops.append(loop)
            points.append(point)
        else:
            if len(fields) < 2:
                raise MeshFormatError("Label lines are 'cell label'", line=number)
            labels[index] = ' '.join(fields[1:])
    close(section_line)

    if 'vertices' not in counts or 'cells' not in counts:
        raise MeshFormatError("Sections 'vertices' and 'cells' are required")
    stray = [k for k in labels if not 0 <= k < len(loops)]
    if stray:
        raise MeshFormatError(f"Label for unknown cell {stray[0]}", field='labels')
    coords = np.array(vertices, dtype=np.float64).reshape(-1, 2)
    mesh = build_mesh(
        [coords[loop] for loop in loops],
        points=points,
        point_policy=point_policy,
        labels=labels,
        validate=validate)
    getLogger(__name__).info(f"Read mesh {path.name}: {mesh.n_cells} cells, {mesh.n_edges} edges")
    return mesh


"""
* Solution Files
"""


@dataclass(frozen=True, eq=False)
class SolutionDump:
    """Object representing the contents of a solution file."""
    solution: Solution
    errors: Optional[NDArray[np.float64]] = None


def write_solution(
    mesh: Mesh,
    solution: Solution,
    path: Union[str, Path],
    errors: Optional[ArrayLike] = None
) -> Path:
    """Writes a solution in the `mfv-sol v1` text format.

    Lines are `cell k u vx vy`, `edge e trace`, `flux k e F` and, when an
    error field is given, `error k e_K`.

    Args:
        mesh: Mesh the solution lives on.
        solution: Discrete solution.
        path: Destination file, parent directories are created.
        errors: Optional normalized per-cell error field.

    Returns:
        The written path.
    """
    path = Path(path)
    mkdir_full_perms(path.parent)
    out = [SOLUTION_HEADER, f"# cells {mesh.n_cells} edges {mesh.n_edges} incidences {len(solution.flux)}"]
    out += [
        f"cell {k} {_fmt(u)} {_fmt(v[0])} {_fmt(v[1])}"
        for k, (u, v) in enumerate(zip(solution.u, solution.v))]
    out += [f"edge {e} {_fmt(t)}" for e, t in enumerate(solution.traces)]
    out += [
        f"flux {k} {e} {_fmt(f)}"
        for k, e, f in zip(mesh.incidence_cell, mesh.incidence_edge, solution.flux)]
    if errors is not None:
        out += [f"error {k} {_fmt(x)}" for k, x in enumerate(np.asarray(errors, dtype=np.float64))]
    path.write_text('\n'.join(out) + '\n', encoding='utf-8')
    return path


def read_solution(path: Union[str, Path]) -> SolutionDump:
    """Reads a solution file written by `write_solution`.

    Fluxes are returned in file order, which is the flat incidence order of the
    mesh they were written from.

    Raises:
        MeshFormatError: With the line and field of the first parse error.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Solution file not found: {path}")
    rows = _lines(path)
    _expect_header(rows, SOLUTION_HEADER)
    arity = {'cell': 5, 'edge': 3, 'flux': 4, 'error': 3}
    cells, edges, fluxes, errors = [], [], [], []
    cell_ids, edge_ids, error_ids = [], [], []
    last = 1
    for number, fields in rows:
        last = number
        kind = fields[0]
        if kind not in arity:
            raise MeshFormatError(f"Unknown line kind '{kind}'", line=number, field='kind')
        if len(fields) != arity[kind]:
            raise MeshFormatError(f"'{kind}' lines have {arity[kind] - 1} fields", line=number)
        if kind == 'cell':
            cell_ids.append(_int(fields[1], number, 'cell'))
            cells.append([_float(x, number, n) for x, n in zip(fields[2:], ('u', 'vx', 'vy'))])
        elif kind == 'edge':
            edge_ids.append(_int(fields[1], number, 'edge'))
            edges.append(_float(fields[2], number, 'trace'))
        elif kind == 'flux':
            _int(fields[1], number, 'cell')
            _int(fields[2], number, 'edge')
            fluxes.append(_float(fields[3], number, 'F'))
        else:
            error_ids.append(_int(fields[1], number, 'cell'))
            errors.append(_float(fields[2], number, 'e_K'))
    _check_ids(cell_ids, 'cell', last)
    _check_ids(edge_ids, 'edge', last)
    if errors:
        _check_ids(error_ids, 'error', last)
    cell_values = np.array(cells, dtype=np.float64).reshape(-1, 3)
    solution = Solution(
        u=cell_values[:, 0].copy(),
        v=cell_values[:, 1:].copy(),
        flux=np.array(fluxes, dtype=np.float64),
        traces=np.array(edges, dtype=np.float64))
    return SolutionDump(solution=solution, errors=np.array(errors) if errors else None)


"""
* Tables and Reports
"""


def write_csv(rows: Sequence[dict], path: Optional[Union[str, Path]] = None, columns: Sequence[str] = CSV_COLUMNS) -> str:
    """Formats result rows as CSV, optionally writing them to a file.

    Args:
        rows: One mapping per solve, missing columns are left empty.
        path: Optional destination file.
        columns: Column order.

    Returns:
        The CSV text.
    """
    df = pd.DataFrame(list(rows), columns=list(columns))
    text = df.to_csv(index=False, float_format='%.10g', lineterminator='\n')
    if path is not None:
        path = Path(path)
        mkdir_full_perms(path.parent)
        path.write_text(text, encoding='utf-8')
    return text


def load_run_file(path: Union[str, Path]) -> dict:
    """Loads a declarative run config file.

    Raises:
        ConfigError: If the file is missing, unreadable or not a mapping.
    """
    path = Path(path)
    try:
        data = load_data_file(path)
    except (FileNotFoundError, OSError, ValueError) as e:
        raise ConfigError(f"Could not load run config {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Run config {path} must be a mapping of keys to values")
    return data


def write_report(report: dict, path: Union[str, Path]) -> Path:
    """Dumps a preset report as YAML."""
    path = Path(path)
    mkdir_full_perms(path.parent)
    dump_data_file(obj=report, path=path)
    return path
