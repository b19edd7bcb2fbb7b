import logging
import sys
from dataclasses import replace
from pathlib import Path

import rich_click as click

from monoflow.core import FlowNetworkException
from monoflow.networks import motivating_network
from monoflow.properties import SUITES, PropertyRunConfig, run_suite
from monoflow.scenario import Scenario

from .common import color_option, configure_logging, dumps, handle_errors, make_console, verbose_option, write_json
from .utils import SeedParamType


logger = logging.getLogger("monoflow.cli.verify")


@click.command(name="verify-policy", short_help="Run seeded property suites against a routing policy")
@click.option(
    "--suite",
    type=click.Choice(list(SUITES) + ["all"]),
    multiple=True,
    default=["all"],
    help="Property suite to run, repeatable.",
)
@click.option(
    "-p",
    "--policy",
    type=click.Choice(["softmax", "R1", "R2", "R3"]),
    default="softmax",
    help="Policy under test; R1, R2 and R3 run on the five-link example network.",
)
@click.option("-s", "--scenario", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Test the scenario's network and policy instead of random networks.")
@click.option("-n", "--instances", type=click.IntRange(min=1), default=None, help="Number of seeded instances.")
@click.option("--seed", type=SeedParamType(), default=0, help="Seed of every random choice.")
@click.option("--non-strict", is_flag=True, help="Accept non-decreasing distances instead of strict contraction.")
@click.option("--junit", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write a JUnit XML report.")
@click.option("-o", "--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for verification.json.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              help="Format of the result printed on stdout.")
@click.option("-j", "--workers", type=click.IntRange(min=1), default=None, help="Parallel instances.")
@verbose_option
@color_option
@handle_errors
def verify_policy(suite, policy, scenario, instances, seed, non_strict, junit, out, fmt, workers, verbose, color):
    """Check the routing axioms, monotonicity, l1 contraction, order preservation and the sign
    inequality on seeded instances.

    Exits with code 0 when every check passes and 5 otherwise.
    """
    configure_logging(verbose, make_console(color))
    config = PropertyRunConfig(seed=seed, strict=not non_strict, workers=workers)
    if instances is not None:
        config = replace(config, instances=instances)

    network = None
    if scenario is not None:
        sc = Scenario.load(scenario)
        network = sc.network
        config = replace(config, policy=dict(sc.policy))
    elif policy != "softmax":
        network = motivating_network()
        config = replace(config, policy={"type": "section2", "variant": policy})

    report = run_suite(list(suite), config, network=network)
    result = report.asdict()
    write_json(out, "verification.json", result)
    if junit is not None:
        report.write_junit(junit)

    if fmt == "csv":
        click.echo("check,instance,passed")
        for outcome in report.outcomes:
            click.echo(f"{outcome.check},{outcome.instance},{str(outcome.passed).lower()}")
    else:
        click.echo(dumps(result))

    if not report.passed:
        for outcome in report.failures:
            logger.warning("%s failed on instance %d", outcome.check, outcome.instance)
        sys.exit(FlowNetworkException(FlowNetworkException.FLOW_PROPERTY_FAILURE).exit_code)
