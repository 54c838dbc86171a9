"""
* Utils: Run Drivers
"""
# Standard Library Imports
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

# Third Party Imports
import numpy as np
from tqdm import tqdm

# Local Imports
from mfvscheme._errors import ConfigError
from mfvscheme.types.config import ConvergenceConfig, PresetDefaults, Preset, RunConfig, SolverOptions
from mfvscheme.types.reports import ConvergenceOrders, ErrorReport
from mfvscheme.utils.analysis import (
    ConvergenceTable,
    cell_errors,
    compare_reference,
    convergence_order,
    convergence_rows,
    error_report,
    error_row)
from mfvscheme.utils.files import CONVERGENCE_COLUMNS, CSV_COLUMNS, read_mesh, write_csv, write_report, write_solution
from mfvscheme.utils.generators import (
    Distortion,
    gen_distorted_quads,
    gen_quadrant_squares,
    gen_refined_nonconforming,
    gen_uniform_squares,
    gen_uniform_triangles)
from mfvscheme.utils.mesh import POINT_POLICIES, Mesh
from mfvscheme.utils.problem import get_case
from mfvscheme.utils.scheme import PenalizationPolicy, Solution, solve_mfv

MESH_FAMILIES = ('squares', 'triangles', 'refined', 'quadrants', 'distorted')
RUN_KEYS = (
    'case', 'mesh', 'nu', 'nu0', 'beta', 'points', 'quad_order',
    'solver', 'tol', 'max_iter', 'ordering', 'solution', 'csv')

"""
* Mesh Specs
"""


def _spec_options(parts: Sequence[str], spec: str) -> dict[str, list[str]]:
    """Parses `key=value` parts, keys may repeat."""
    options: dict[str, list[str]] = {}
    for part in parts:
        key, sep, value = part.partition('=')
        if not sep or not key or not value:
            raise ConfigError(f"Mesh spec '{spec}': expected key=value, got '{part}'")
        options.setdefault(key, []).append(value)
    return options


def _only(options: dict[str, list[str]], key: str, default: Optional[str], spec: str) -> Optional[str]:
    values = options.pop(key, [])
    if len(values) > 1:
        raise ConfigError(f"Mesh spec '{spec}': '{key}' given more than once")
    return values[0] if values else default


def _floats(text: str, spec: str) -> list[float]:
    try:
        return [float(x) for x in text.split(',')]
    except ValueError:
        raise ConfigError(f"Mesh spec '{spec}': '{text}' is not a list of numbers")


def _positive_int(text: str, spec: str) -> int:
    if not text.isdigit() or int(text) < 1:
        raise ConfigError(f"Mesh spec '{spec}': '{text}' is not a positive integer")
    return int(text)


def parse_mesh_spec(spec: str, point_policy: str = 'centroid') -> Mesh:
    """Builds a mesh from a generator spec or reads it from a file.

    Specs are `squares:N`, `triangles:N[:pattern=diagonal|crisscross]`,
    `refined:N:box=x0,y0,x1,y1[:box=...][:factor=F]`,
    `quadrants:L[:counts=a,b,c,d]` and
    `distorted:N[:seed=S][:amplitude=A][:map=jitter|smooth]`. Anything else
    is read as a mesh file path.

    Args:
        spec: Mesh spec or path.
        point_policy: x_K policy, `circumcenter` only for triangles and files.

    Returns:
        Built mesh.

    Raises:
        ConfigError: On malformed specs or unknown families.
    """
    if point_policy not in POINT_POLICIES:
        raise ConfigError(f"Unknown point policy '{point_policy}', expected one of {POINT_POLICIES}")
    family, _, rest = spec.partition(':')
    if family not in MESH_FAMILIES:
        path = Path(spec)
        if path.suffix or path.exists():
            return read_mesh(path, point_policy=point_policy)
        raise ConfigError(f"Unknown mesh family '{family}', expected one of {MESH_FAMILIES} or a file path")
    if point_policy == 'circumcenter' and family != 'triangles':
        raise ConfigError("Point policy 'circumcenter' is only available for triangle meshes")

    parts = [p for p in rest.split(':') if p]
    if not parts:
        raise ConfigError(f"Mesh spec '{spec}' needs a size, e.g. '{family}:8'")
    n = _positive_int(parts[0], spec)
    options = _spec_options(parts[1:], spec)

    if family == 'squares':
        mesh = gen_uniform_squares(n)
    elif family == 'triangles':
        pattern = _only(options, 'pattern', 'diagonal', spec)
        mesh = gen_uniform_triangles(n, pattern=pattern, point_policy=point_policy)
    elif family == 'refined':
        factor = _positive_int(_only(options, 'factor', '2', spec), spec)
        boxes = options.pop('box', [])
        if not boxes:
            raise ConfigError(f"Mesh spec '{spec}' needs at least one box=x0,y0,x1,y1")
        regions = []
        for text in boxes:
            box = _floats(text, spec)
            if len(box) != 4:
                raise ConfigError(f"Mesh spec '{spec}': a box has 4 coordinates, got '{text}'")
            regions.append((tuple(box), factor))
        mesh = gen_refined_nonconforming(n, regions)
    elif family == 'quadrants':
        counts = _only(options, 'counts', None, spec)
        if counts is None:
            mesh = gen_quadrant_squares(level=n)
        else:
            mesh = gen_quadrant_squares(counts=[_positive_int(c, spec) for c in counts.split(',')], level=n)
    else:
        kind = _only(options, 'map', 'jitter', spec)
        seed = _only(options, 'seed', '0', spec)
        amplitude = _floats(_only(options, 'amplitude', '0.2', spec), spec)[0]
        if not seed.isdigit():
            raise ConfigError(f"Mesh spec '{spec}': seed must be a non-negative integer")
        mesh = gen_distorted_quads(n, Distortion(kind=kind, amplitude=amplitude, seed=int(seed)))
    if options:
        raise ConfigError(f"Mesh spec '{spec}': unknown option(s) {sorted(options)}")
    return mesh


def mesh_family(spec: str) -> str:
    """Family name of a mesh spec, `file` for paths."""
    family = spec.partition(':')[0]
    return family if family in MESH_FAMILIES else 'file'


"""
* Run Configs
"""


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in ('nu0', 'beta', 'tol'):
            return float(value)
        if key in ('quad_order', 'max_iter'):
            return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid value for '{key}': {value!r}")
    return None if value is None else str(value)


def merge_run_config(
    defaults: Mapping[str, Any],
    file_values: Optional[Mapping[str, Any]] = None,
    flags: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Merges run settings, flags over file values over defaults.

    Args:
        defaults: Environment defaults.
        file_values: Values from a run config file.
        flags: Command line values, None meaning not given.

    Returns:
        Complete run config.

    Raises:
        ConfigError: On unknown keys or malformed values.
    """
    unknown = sorted(set(file_values or {}) - set(RUN_KEYS))
    if unknown:
        raise ConfigError(f"Unknown run config key(s): {', '.join(unknown)}")
    merged: dict[str, Any] = {}
    for source in (defaults, file_values or {}, flags or {}):
        merged.update({k: v for k, v in source.items() if v is not None and k in RUN_KEYS})
    missing = [k for k in ('case', 'mesh') if k not in merged]
    if missing:
        raise ConfigError(f"Missing run setting(s): {', '.join(missing)}")
    return RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})


def policy_from_config(config: Mapping[str, Any]) -> PenalizationPolicy:
    """Penalization policy of a run or convergence config."""
    return PenalizationPolicy.parse(config.get('nu', 'fixed'), nu0=config.get('nu0'), beta=config.get('beta'))


def options_from_config(config: Mapping[str, Any], **extra) -> SolverOptions:
    """Solver options of a run or convergence config."""
    options = SolverOptions(
        method=config.get('solver', 'auto'),
        tol=float(config.get('tol', 1e-12)),
        max_iter=int(config.get('max_iter', 20000)),
        quad_order=int(config.get('quad_order', 2)))
    if config.get('ordering'):
        options['ordering'] = config['ordering']
    options.update(extra)
    return options


"""
* Single Runs
"""


@dataclass(frozen=True, eq=False)
class RunResult:
    """Object representing the outcome of one solve."""
    label: str
    mesh: Mesh
    solution: Solution
    report: Optional[ErrorReport]
    row: Optional[dict]


def run_case(config: RunConfig, solver_extra: Optional[Mapping[str, Any]] = None) -> RunResult:
    """Builds the mesh, solves the case and writes the requested outputs.

    Args:
        config: Complete run config.
        solver_extra: Extra solver options, e.g. from the environment.

    Returns:
        Result with the error report when the case has an exact solution.
    """
    log = getLogger(__name__)
    case = get_case(config['case'])
    policy = policy_from_config(config)
    mesh = parse_mesh_spec(config['mesh'], point_policy=config.get('points', 'centroid'))
    log.info(f"Mesh {config['mesh']}: {mesh.n_cells} cells, {mesh.n_edges} edges, regul={mesh.regularity:.4g}")
    solution = solve_mfv(mesh, case, policy, options_from_config(config, **(solver_extra or {})))

    report, row, errors = None, None, None
    if case.exact is not None:
        report = error_report(mesh, solution, case)
        row = error_row(case.name, config['mesh'], report)
        errors = cell_errors(mesh, solution, case)
    if config.get('solution'):
        write_solution(mesh, solution, config['solution'], errors=errors)
        log.info(f"Wrote solution to {config['solution']}")
    if config.get('csv') and row is not None:
        write_csv([row], config['csv'])
    return RunResult(label=config['mesh'], mesh=mesh, solution=solution, report=report, row=row)


"""
* Convergence Studies
"""


def _solve_level(args: tuple[str, str, PenalizationPolicy, SolverOptions, str]) -> tuple[str, ErrorReport]:
    """Solves one refinement level, run in worker processes."""
    case_name, spec, policy, options, points = args
    case = get_case(case_name)
    mesh = parse_mesh_spec(spec, point_policy=points)
    return spec, error_report(mesh, solve_mfv(mesh, case, policy, options), case)


def family_specs(family: str, levels: Sequence[int]) -> list[str]:
    """Mesh specs of a refinement series, e.g. `squares` with levels 8, 16 → squares:8, squares:16.

    A family may carry options after the name, as in `triangles:pattern=crisscross`.
    """
    name, _, options = family.partition(':')
    if name not in MESH_FAMILIES:
        raise ConfigError(f"Unknown mesh family '{name}', expected one of {MESH_FAMILIES}")
    suffix = f":{options}" if options else ''
    return [f"{name}:{int(n)}{suffix}" for n in levels]


def run_series(
    case_name: str,
    specs: Sequence[str],
    policy: PenalizationPolicy,
    options: SolverOptions,
    points: str = 'centroid',
    jobs: int = 1,
    progress: bool = True
) -> tuple[ConvergenceTable, ConvergenceOrders]:
    """Solves a case on a list of meshes and fits the convergence orders.

    Args:
        case_name: Built-in case with an exact solution.
        specs: Mesh specs, one per level.
        policy: Penalization.
        options: Solver options.
        points: x_K policy.
        jobs: Worker processes, levels are independent.
        progress: Show a progress bar.

    Returns:
        Table sorted by decreasing h and its orders.
    """
    if get_case(case_name).exact is None:
        raise ConfigError(f"Case '{case_name}' has no exact solution, convergence orders are undefined")
    tasks = [(case_name, spec, policy, options, points) for spec in specs]
    table = ConvergenceTable()
    bar = tqdm(total=len(tasks), desc=f"[{case_name}]", unit='mesh', disable=not progress)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for spec, report in pool.map(_solve_level, tasks):
                table.add(spec, report)
                bar.update(1)
    else:
        for task in tasks:
            spec, report = _solve_level(task)
            table.add(spec, report)
            bar.update(1)
    bar.close()
    orders = convergence_order(table)
    getLogger(__name__).info(f"Orders for '{case_name}': u {orders['order_u']}, gradient {orders['order_grad']}")
    return table, orders


def run_convergence(config: ConvergenceConfig, solver_extra: Optional[Mapping[str, Any]] = None) -> tuple[str, ConvergenceOrders]:
    """Runs a refinement series and returns its CSV text and orders.

    Raises:
        ConfigError: With fewer than 2 levels.
    """
    if len(config['levels']) < 2:
        raise ConfigError("A convergence study needs at least 2 refinement levels")
    table, orders = run_series(
        config['case'],
        family_specs(config['family'], config['levels']),
        policy_from_config(config),
        options_from_config(config, **(solver_extra or {})),
        points=config.get('points', 'centroid'),
        jobs=max(1, int(config.get('jobs', 1))))
    text = write_csv(convergence_rows(config['case'], table, orders), config.get('csv'), columns=CONVERGENCE_COLUMNS)
    return text, orders


"""
* Presets
"""


def get_preset(name: str) -> Preset:
    """Preset by name.

    Raises:
        ConfigError: If the name is unknown.
    """
    try:
        return PresetDefaults[name]
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}', expected one of {sorted(PresetDefaults)}")


def _python(value: Any) -> Any:
    """Plain Python values for YAML output."""
    if isinstance(value, dict):
        return {k: _python(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_python(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def run_preset(
    name: str,
    output_dir: Optional[Union[str, Path]] = None,
    solver_extra: Optional[Mapping[str, Any]] = None,
    jobs: int = 1
) -> tuple[str, dict]:
    """Runs a named reproduction and compares it with its published values.

    Args:
        name: Preset name.
        output_dir: Directory receiving `<name>.yml` and `<name>.csv`, nothing written when None.
        solver_extra: Extra solver options.
        jobs: Worker processes for multi-mesh presets.

    Returns:
        Tuple of the CSV text and the report.
    """
    preset = get_preset(name)
    policy = PenalizationPolicy.parse(preset['nu'])
    options = options_from_config({}, **(solver_extra or {}))
    table, orders = run_series(
        preset['case'], preset['meshes'], policy, options, points=preset['points'], jobs=jobs)
    multi = len(table) > 1
    rows = convergence_rows(preset['case'], table, orders) if multi else [
        error_row(preset['case'], label, report) for label, report in table.rows]

    reference = preset['reference']
    comparisons: dict[str, dict] = {}
    for label, report in table.rows:
        for key in ('e2_u', 'e2_grad', 'u_min', 'u_max'):
            published = reference.get(key, {}).get(label)
            if published is not None:
                comparisons.setdefault(label, {})[key] = compare_reference(report[key], published)
    for key in ('order_u', 'order_grad'):
        if key in reference and orders[key] is not None:
            comparisons.setdefault('orders', {})[key] = compare_reference(orders[key], reference[key])

    report = _python({
        'preset': name,
        'description': preset['description'],
        'case': preset['case'],
        'penalization': policy.describe(),
        'rows': rows,
        'orders': dict(orders) if multi else None,
        'comparisons': comparisons})
    text = write_csv(rows, columns=CONVERGENCE_COLUMNS if multi else CSV_COLUMNS)
    if output_dir is not None:
        out = Path(output_dir)
        write_report(report, out / f"{name}.yml")
        (out / f"{name}.csv").write_text(text, encoding='utf-8')
    return text, report
