"""
* MFV Scheme CLI Application
"""
# Third Party Imports
import click

# Local Imports
from mfvscheme._errors import EXIT_USAGE, MFVError
from mfvscheme.cli.convergence import convergence_command
from mfvscheme.cli.mesh import MeshCLIGroup
from mfvscheme.cli.preset import preset_command
from mfvscheme.cli.run import run_command

"""
* Root Group
"""


class MfvGroup(click.Group):
    """Root group mapping package errors and usage errors to exit codes.

    Subcommands run inside the root `invoke`, so their errors surface here too.
    """

    def make_context(self, *args, **kwargs) -> click.Context:
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise
        except MFVError as e:
            click.echo(f"error[{e.category}]: {e}", err=True)
            ctx.exit(e.exit_code)


"""
* CLI Application
"""


@click.group(
    cls=MfvGroup,
    commands={
        'mesh': MeshCLIGroup,
        'run': run_command,
        'convergence': convergence_command,
        'preset': preset_command
    },
    invoke_without_command=True,
    help='Mixed finite volume solver for anisotropic diffusion on polygonal meshes.'
)
@click.pass_context
def CLI(ctx: click.Context):
    """CLI application entry point.

    Args:
        ctx: Click command context.
    """
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# Export CLI
MfvCLI = CLI
__all__ = ['MfvCLI']
