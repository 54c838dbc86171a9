"""
* Commands: Preset
"""
# Standard Library Imports
from pathlib import Path
from typing import Optional

# Third Party Imports
import click

# Local Imports
from mfvscheme._constants import initialize_environment
from mfvscheme.types.config import PresetDefaults
from mfvscheme.utils.runner import run_preset

"""
* Commands
"""


@click.command(
    name='preset',
    help='Run a named reproduction, e.g. `preset lepotier-dq4`. `preset list` prints the names.'
)
@click.argument('name')
@click.option('--output-dir', type=click.Path(file_okay=False), default=None,
              help='Directory receiving <name>.csv and <name>.yml, defaults to the output dir.')
@click.option('--jobs', type=click.IntRange(min=1), default=None, help='Worker processes.')
def preset_command(name: str, output_dir: Optional[str], jobs: Optional[int]):
    """Prints the CSV table on stdout, then one line per published value on stderr."""
    if name == 'list':
        for key, preset in PresetDefaults.items():
            click.echo(f"{key}: {preset['description']}")
        return

    ENV = initialize_environment()
    text, report = run_preset(
        name,
        output_dir=Path(output_dir) if output_dir else ENV.PATH_OUTPUT,
        solver_extra=ENV.SOLVER_EXTRA,
        jobs=jobs or ENV.MFV_JOBS)
    click.echo(text, nl=False)
    for label, values in report['comparisons'].items():
        for key, cmp in values.items():
            click.echo(
                f"{label} {key}: measured {cmp['measured']:.4g}, published {cmp['reference']:.4g}",
                err=True)


# Export command
__all__ = ['preset_command']
