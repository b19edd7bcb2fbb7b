import logging

import rich_click as click

from monoflow.cuts import enumerate_violations, maxflow_report, min_cut_capacity
from monoflow.util import json_number

from .common import configure_logging, dumps, handle_errors, load_scenario, make_console, scenario_options, write_json


logger = logging.getLogger("monoflow.cli.mincut")


@click.command(short_help="Find the cuts with the largest inflow surplus")
@scenario_options(integration=False)
@click.option(
    "-m",
    "--method",
    type=click.Choice(["auto", "enumerate", "maxflow"]),
    default="auto",
    help="Exhaustive enumeration (exact, every maximizer), max-flow (one maximizer) or whichever fits the network.",
)
@click.option("--records", is_flag=True, help="Report every cut with its inflow and capacity (at most 16 nodes).")
@handle_errors
def mincut(scenario, out, seed, fmt, verbose, color, method, records):
    """Compute max over non-empty cuts U of lambda_U - C_U for the scenario's network.

    Prints the best value, one maximizer and, when every maximizer is known, their union U*.
    Perturbed capacities of the scenario apply. Also reports C_G, the smallest capacity of a
    cut around the origins.
    """
    configure_logging(verbose, make_console(color))
    sc = load_scenario(scenario, seed, None, None, None, None)
    network = sc.final_network()
    limit = sc.analysis.enumeration_limit

    if method == "auto":
        method = "enumerate" if len(network.non_destinations) <= limit or records else "maxflow"
    if method == "enumerate":
        report = enumerate_violations(network, limit=max(limit, len(network.non_destinations)) if records else limit,
                                      records=records, workers=sc.analysis.workers)
    else:
        report = maxflow_report(network)
    logger.info("%s: best value %s", method, report.best_value)

    capacity, around = min_cut_capacity(network)
    result = report.asdict()
    result.update(method=method, min_cut_capacity=json_number(capacity), min_cut=sorted(around.nodes),
                  total_inflow=json_number(network.total_inflow))
    write_json(out, "mincut.json", result)

    if fmt == "csv":
        click.echo("cut,inflow,capacity,value")
        for record in report.records or ():
            row = record.asdict()
            click.echo(f"{' '.join(row['cut'])},{row['inflow']},{row['capacity']},{row['value']}")
        if report.records is None:
            click.echo(f"{' '.join(result['maximizer'])},,,{result['best_value']}")
    else:
        click.echo(dumps(result))
