"""
* Commands: Convergence
"""
# Standard Library Imports
from typing import Optional

# Third Party Imports
import click

# Local Imports
from mfvscheme._constants import initialize_environment
from mfvscheme._errors import ConfigError
from mfvscheme.types.config import ConvergenceConfig
from mfvscheme.utils.mesh import POINT_POLICIES
from mfvscheme.utils.problem import CASES
from mfvscheme.utils.runner import run_convergence

"""
* Helpers
"""


def parse_levels(text: str) -> list[int]:
    """Comma separated refinement levels, e.g. `8,16,32`."""
    try:
        levels = [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ConfigError(f"Levels must be comma separated integers, got '{text}'")
    if any(n < 1 for n in levels):
        raise ConfigError(f"Levels must be positive, got '{text}'")
    return levels


def format_order(value: Optional[float]) -> str:
    return 'undefined' if value is None else f"{value:.4f}"


"""
* Commands
"""


@click.command(
    name='convergence',
    help='Solve a case on a refinement series and print the error table with its orders.'
)
@click.option('--case', type=click.Choice(sorted(CASES)), required=True, help='Built-in problem.')
@click.option('--family', required=True,
              help='Mesh family, optionally with options, e.g. triangles:pattern=crisscross.')
@click.option('--levels', required=True, help='Comma separated levels, e.g. 8,16,32,64.')
@click.option('--nu', default='fixed', help='Penalization: a number, fixed, power or zero.')
@click.option('--nu0', type=float, default=None, help='Penalization scale.')
@click.option('--beta', type=float, default=None, help='Exponent of the power penalization.')
@click.option('--points', type=click.Choice(POINT_POLICIES), default='centroid', help='Cell point policy.')
@click.option('--quad-order', type=click.Choice(['1', '2', '4']), default=None, help='Cell average quadrature degree.')
@click.option('--solver', type=click.Choice(['auto', 'cholesky', 'pcg']), default=None, help='Hybrid system solver.')
@click.option('--tol', type=float, default=None, help='Conjugate gradient relative residual.')
@click.option('--max-iter', type=click.IntRange(min=1), default=None, help='Conjugate gradient iteration cap.')
@click.option('--jobs', type=click.IntRange(min=1), default=None, help='Worker processes.')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), default=None, help='CSV file to write.')
def convergence_command(
    case: str,
    family: str,
    levels: str,
    nu: str,
    nu0: Optional[float],
    beta: Optional[float],
    points: str,
    quad_order: Optional[str],
    solver: Optional[str],
    tol: Optional[float],
    max_iter: Optional[int],
    jobs: Optional[int],
    csv_path: Optional[str]
):
    """Prints the CSV table on stdout and the fitted orders on stderr."""
    ENV = initialize_environment()
    config = ConvergenceConfig(
        case=case,
        family=family,
        levels=parse_levels(levels),
        nu=nu,
        points=points,
        quad_order=int(quad_order) if quad_order else ENV.MFV_QUAD_ORDER,
        solver=solver or ENV.MFV_SOLVER,
        tol=tol if tol is not None else ENV.MFV_SOLVER_TOL,
        max_iter=max_iter or ENV.MFV_MAX_ITER,
        jobs=jobs or ENV.MFV_JOBS,
        csv=csv_path)
    if nu0 is not None:
        config['nu0'] = nu0
    if beta is not None:
        config['beta'] = beta
    text, orders = run_convergence(config, solver_extra=ENV.SOLVER_EXTRA)
    click.echo(text, nl=False)
    click.echo(
        f"order_u: {format_order(orders['order_u'])}, "
        f"order_grad: {format_order(orders['order_grad'])}", err=True)


# Export command
__all__ = ['convergence_command']
