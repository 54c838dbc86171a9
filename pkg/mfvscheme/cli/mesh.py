"""
* Commands: Mesh Group
"""
# Standard Library Imports
from pathlib import Path
from typing import Optional

# Third Party Imports
import click

# Local Imports
from mfvscheme._constants import initialize_environment
from mfvscheme.types.reports import MeshSummary
from mfvscheme.utils.files import read_mesh, write_mesh
from mfvscheme.utils.mesh import POINT_POLICIES, validate_mesh
from mfvscheme.utils.runner import MESH_FAMILIES, parse_mesh_spec

"""
* Helpers
"""


def echo_summary(summary: MeshSummary) -> None:
    """Prints a mesh summary as `key: value` lines."""
    for key, value in summary.items():
        click.echo(f"{key}: {value:.10g}" if isinstance(value, float) else f"{key}: {value}")


"""
* Commands
"""


@click.command(
    name='gen',
    help='Generate a mesh of a built-in family and write it to a mesh file.'
)
@click.argument('family', type=click.Choice(MESH_FAMILIES))
@click.option('--n', 'n', type=click.IntRange(min=1), required=True,
              help='Cells per side, or the refinement level of the quadrants family.')
@click.option('--pattern', type=click.Choice(['diagonal', 'crisscross']), default=None,
              help='Triangle split pattern.')
@click.option('--box', 'boxes', multiple=True,
              help='Refined region x0,y0,x1,y1 of the refined family, repeatable.')
@click.option('--factor', type=click.IntRange(min=2), default=None, help='Split factor of refined regions.')
@click.option('--counts', default=None, help='Cells per side of the four quadrants, a,b,c,d.')
@click.option('--seed', type=click.IntRange(min=0), default=None, help='Seed of the distorted family.')
@click.option('--amplitude', type=float, default=None, help='Vertex displacement of the distorted family.')
@click.option('--map', 'kind', type=click.Choice(['jitter', 'smooth']), default=None,
              help='Distortion kind.')
@click.option('--points', type=click.Choice(POINT_POLICIES), default='centroid', help='Cell point policy.')
@click.option('-o', '--output', type=click.Path(dir_okay=False), default=None,
              help='Mesh file to write, defaults to <output dir>/<family>-<n>.mesh.')
def mesh_gen(
    family: str,
    n: int,
    pattern: Optional[str],
    boxes: tuple[str, ...],
    factor: Optional[int],
    counts: Optional[str],
    seed: Optional[int],
    amplitude: Optional[float],
    kind: Optional[str],
    points: str,
    output: Optional[str]
):
    """Builds the mesh spec from the family options and writes the mesh."""
    ENV = initialize_environment()
    parts = [family, str(n)]
    parts += [f"pattern={pattern}"] if pattern else []
    parts += [f"box={b}" for b in boxes]
    parts += [f"factor={factor}"] if factor else []
    parts += [f"counts={counts}"] if counts else []
    parts += [f"seed={seed}"] if seed is not None else []
    parts += [f"amplitude={amplitude}"] if amplitude is not None else []
    parts += [f"map={kind}"] if kind else []
    mesh = parse_mesh_spec(':'.join(parts), point_policy=points)

    path = Path(output) if output else ENV.PATH_OUTPUT / f"{family}-{n}.mesh"
    write_mesh(mesh, path)
    ENV.LOGR.info(f"Wrote {mesh.n_cells} cells to {path}")
    click.echo(f"mesh: {path}")
    echo_summary(mesh.summary())


@click.command(
    name='inspect',
    help='Print the counts and metrics of a mesh file or generator spec.'
)
@click.argument('mesh_spec')
@click.option('--points', type=click.Choice(POINT_POLICIES), default='centroid', help='Cell point policy.')
def mesh_inspect(mesh_spec: str, points: str):
    echo_summary(parse_mesh_spec(mesh_spec, point_policy=points).summary())


@click.command(
    name='validate',
    help='Check that a mesh file is admissible, exits with status 2 when it is not.'
)
@click.argument('path', type=click.Path(dir_okay=False))
def mesh_validate(path: str):
    """Reads the file without validation, then runs the full check to report every offending cell."""
    mesh = read_mesh(path, validate=False)
    validate_mesh(mesh)
    echo_summary(mesh.summary())
    click.echo('valid')


"""
* Command Group
"""


@click.group(
    name='mesh',
    commands={
        'gen': mesh_gen,
        'inspect': mesh_inspect,
        'validate': mesh_validate
    },
    help='Commands that generate and check meshes.',
)
def MeshCLIGroup():
    """CLI group for mesh generation and validation."""
    pass


# Export command group
__all__ = ['MeshCLIGroup']
