import logging

import rich_click as click

from monoflow.analysis import dichotomy_verdict

from .common import configure_logging, dumps, handle_errors, load_scenario, make_console, scenario_options, write_json


logger = logging.getLogger("monoflow.cli.analyze")


@click.command(short_help="Predict and observe the long-run behaviour of a scenario")
@scenario_options()
@handle_errors
def analyze(scenario, out, seed, fmt, t_max, tol_step, tol_buffer, tol_equilibrium, verbose, color):
    """Predict the long-run behaviour of a scenario from its cuts and check it by simulation.

    The verdict is one of [bold]equilibrium[/], [bold]overload_finite[/],
    [bold]overload_infinite[/] or [bold]indeterminate[/]. Staged scenarios are analysed with
    the capacities of their last stage. The report is written to [bold]analysis.json[/].
    """
    configure_logging(verbose, make_console(color))
    sc = load_scenario(scenario, seed, t_max, tol_step, tol_buffer, tol_equilibrium)
    network = sc.final_network()

    report = dichotomy_verdict(network, sc.make_policy(network), sc.initial_state(network), sc.analysis)
    result = report.asdict()
    logger.info("verdict %s (predicted %s, observed %s)", report.verdict.value, report.predicted.value,
                report.observed.value)
    write_json(out, "analysis.json", result)

    if fmt == "csv":
        click.echo("check,passed")
        for name, passed in sorted(report.checks.items()):
            click.echo(f"{name},{str(passed).lower()}")
    else:
        click.echo(dumps(result))
