"""
* Commands: Run
"""
# Standard Library Imports
from typing import Optional

# Third Party Imports
import click

# Local Imports
from mfvscheme._constants import initialize_environment
from mfvscheme.utils.files import load_run_file, write_csv
from mfvscheme.utils.mesh import POINT_POLICIES
from mfvscheme.utils.problem import CASES
from mfvscheme.utils.runner import merge_run_config, run_case

"""
* Commands
"""


@click.command(
    name='run',
    help='Solve one case on one mesh and print its error row as CSV.'
)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Run config file, flags override its values.')
@click.option('--case', type=click.Choice(sorted(CASES)), default=None, help='Built-in problem.')
@click.option('--mesh', default=None, help='Generator spec such as squares:40, or a mesh file.')
@click.option('--nu', default=None, help='Penalization: a number, fixed, power or zero.')
@click.option('--nu0', type=float, default=None, help='Penalization scale.')
@click.option('--beta', type=float, default=None, help='Exponent of the power penalization.')
@click.option('--points', type=click.Choice(POINT_POLICIES), default=None, help='Cell point policy.')
@click.option('--quad-order', type=click.Choice(['1', '2', '4']), default=None, help='Cell average quadrature degree.')
@click.option('--solver', type=click.Choice(['auto', 'cholesky', 'pcg']), default=None, help='Hybrid system solver.')
@click.option('--tol', type=float, default=None, help='Conjugate gradient relative residual.')
@click.option('--max-iter', type=click.IntRange(min=1), default=None, help='Conjugate gradient iteration cap.')
@click.option('--ordering', type=click.Choice(['mmd', 'rcm']), default=None, help='Fill-reducing ordering.')
@click.option('--solution', type=click.Path(dir_okay=False), default=None, help='Solution file to write.')
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), default=None, help='CSV file to write.')
def run_command(config_path: Optional[str], csv_path: Optional[str], **flags):
    """Merges flags over the run config file over the environment defaults, then solves."""
    ENV = initialize_environment()
    flags['csv'] = csv_path
    config = merge_run_config(
        ENV.RUN_DEFAULTS,
        load_run_file(config_path) if config_path else None,
        flags)
    result = run_case(config, solver_extra=ENV.SOLVER_EXTRA)
    if result.row is None:
        diagnostics = result.solution.diagnostics
        click.echo(f"case {config['case']} has no exact solution, solved {result.mesh.n_cells} cells")
        if diagnostics is not None:
            ENV.LOGR.info(f"Solver: {diagnostics['solver']}")
        return
    click.echo(write_csv([result.row]), nl=False)


# Export command
__all__ = ['run_command']
