import rich_click as click

from .settings import CONTEXT_SETTINGS
from .simulate import simulate
from .classify import classify
from .analyze import analyze
from .mincut import mincut
from .resilience import resilience
from .verify import verify_policy


@click.group(context_settings=CONTEXT_SETTINGS)
def cli():
    # Initialize the CLI group
    pass


cli.add_command(simulate)
cli.add_command(classify)
cli.add_command(analyze)
cli.add_command(mincut)
cli.add_command(resilience)
cli.add_command(verify_policy)

if __name__ == "__main__":
    cli()
