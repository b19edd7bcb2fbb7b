import io
import logging

import rich_click as click

from monoflow.core import FlowNetworkException
from monoflow.dynamics import integrate, integrate_cascade, integrate_schedule, throughput

from .common import configure_logging, dumps, handle_errors, load_scenario, make_console, scenario_options, write_json
from .utils import PositiveFloatParamType


logger = logging.getLogger("monoflow.cli.simulate")


@click.command(short_help="Integrate the flow dynamics of a scenario")
@scenario_options()
@click.option("--failures", is_flag=True, default=False,
              help="Remove links irreversibly when they reach their buffer, as the scenario's 'failures' switch.")
@click.option("--simultaneous", type=PositiveFloatParamType(), default=None,
              help="Group failures less than this far apart in time into one step of the failure sequence.")
@handle_errors
def simulate(scenario, out, seed, fmt, t_max, tol_step, tol_buffer, tol_equilibrium, verbose, color, failures,
             simultaneous):
    """Integrate the flow dynamics of a scenario.

    Writes [bold]trajectory.csv[/] and [bold]termination.json[/] to the output directory. Staged
    perturbations restart the integration at every switch time with the new capacities,
    continuing from the current densities.

    With [bold]--failures[/] a link that reaches its buffer is removed for good and its flow goes
    to the surviving links; the run ends once an origin has no link left. The failure sequence
    is written to [bold]failures.json[/].
    """
    configure_logging(verbose, make_console(color))
    sc = load_scenario(scenario, seed, t_max, tol_step, tol_buffer, tol_equilibrium)
    cascade = None

    if failures or sc.failures:
        if sc.staged:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, "--failures needs a scenario without switch times."
            )
        network = sc.effective_network()
        cascade = integrate_cascade(network, sc.make_policy(network), sc.initial_state(network), sc.integration)
        trajectory = cascade.trajectory
        logger.info("failure sequence %s", cascade.sequence(simultaneous or 0.0))
    elif sc.staged:
        logger.info("staged run with %d stages", len(sc.schedule()))
        trajectory = integrate_schedule(sc.schedule(), sc.make_policy, sc.initial_state(), sc.integration)
        network = sc.final_network()
    else:
        network = sc.effective_network()
        trajectory = integrate(network, sc.make_policy(network), sc.initial_state(network), sc.integration)

    rate = throughput(trajectory, network)
    logger.info("%s at t=%g", trajectory.termination.value, trajectory.t_end)
    if out is not None:
        trajectory.write(out, rate)
        if cascade is not None:
            write_json(out, "failures.json", cascade.asdict(simultaneous or 0.0))

    if fmt == "csv":
        buffer = io.StringIO()
        trajectory.to_csv(buffer)
        click.echo(buffer.getvalue(), nl=False)
    elif cascade is not None:
        click.echo(dumps({**trajectory.termination_dict(rate), **cascade.asdict(simultaneous or 0.0)}))
    else:
        click.echo(dumps(trajectory.termination_dict(rate)))
