import logging

import rich_click as click

from monoflow.analysis import classify_links
from monoflow.dynamics import integrate, integrate_schedule

from .common import configure_logging, dumps, handle_errors, load_scenario, make_console, scenario_options, write_json


logger = logging.getLogger("monoflow.cli.classify")


@click.command(short_help="Tag every link with its limit behaviour")
@scenario_options()
@handle_errors
def classify(scenario, out, seed, fmt, t_max, tol_step, tol_buffer, tol_equilibrium, verbose, color):
    """Simulate a scenario with the analysis settings and tag every link.

    Density tags are [bold]B[/] (at or growing towards the buffer), [bold]W[/] (below the buffer)
    or inconclusive; flow tags are [bold]C[/] (outflow at capacity), [bold]Z_o[/] (no outflow)
    and [bold]Z_i[/] (no inflow).
    """
    configure_logging(verbose, make_console(color))
    sc = load_scenario(scenario, seed, t_max, tol_step, tol_buffer, tol_equilibrium)
    config = sc.analysis.integration

    if sc.staged:
        trajectory = integrate_schedule(sc.schedule(), sc.make_policy, sc.initial_state(), config)
        network = sc.final_network()
    else:
        network = sc.effective_network()
        trajectory = integrate(network, sc.make_policy(network), sc.initial_state(network), config)

    classification = classify_links(trajectory, network, sc.analysis.thresholds)
    result = classification.asdict()
    result["termination"] = trajectory.termination_dict()
    write_json(out, "classification.json", result)

    if fmt == "csv":
        click.echo("link,density,flow")
        for link in network.link_ids:
            click.echo(f"{link},{classification.density[link]},{' '.join(sorted(classification.flows[link]))}")
    else:
        click.echo(dumps(result))
