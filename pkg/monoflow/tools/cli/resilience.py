import io
import logging
from dataclasses import replace

import rich_click as click

from monoflow.analysis import resilience_curve

from .common import configure_logging, dumps, handle_errors, load_scenario, make_console, scenario_options, write_json
from .utils import DeltaGridParamType, PositiveFloatParamType


logger = logging.getLogger("monoflow.cli.resilience")


@click.command(short_help="Measure how much capacity loss a policy tolerates")
@scenario_options()
@click.option(
    "-d",
    "--delta",
    type=DeltaGridParamType(),
    default=None,
    help="Throughput losses to test, as [bold]0,0.1,0.5[/] or [bold]start:stop:step[/]. Defaults to the scenario's grid.",
)
@click.option("--horizon", type=PositiveFloatParamType(), default=None, help="Length of every perturbed run.")
@click.option("-j", "--workers", type=click.IntRange(min=1), default=None, help="Parallel perturbed runs.")
@handle_errors
def resilience(scenario, out, seed, fmt, t_max, tol_step, tol_buffer, tol_equilibrium, verbose, color, delta,
               horizon, workers):
    """Smallest total capacity reduction that costs more than delta throughput.

    Starting from the equilibrium of the nominal network, every member of the perturbation family
    is bisected for the reduction at which the throughput drops below lambda - delta. Writes
    [bold]resilience.csv[/] with the simulated value next to C_G - lambda + delta.
    """
    configure_logging(verbose, make_console(color))
    sc = load_scenario(scenario, seed, t_max, tol_step, tol_buffer, tol_equilibrium)
    config = sc.resilience
    if horizon is not None:
        config = replace(config, horizon=horizon)
    if workers is not None:
        config = replace(config, workers=workers)
    grid = delta if delta is not None else list(sc.delta_grid)

    curve = resilience_curve(sc.network, sc.make_policy(), sc.family, grid, config)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        curve.to_csv(out / "resilience.csv")
        write_json(out, "resilience.json", curve.asdict())

    if fmt == "csv":
        buffer = io.StringIO()
        curve.to_csv(buffer)
        click.echo(buffer.getvalue(), nl=False)
    else:
        click.echo(dumps(curve.asdict()))
