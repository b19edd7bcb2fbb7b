import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import rich_click as click
from rich.console import Console
from rich.logging import RichHandler

from monoflow.core import FlowNetworkException
from monoflow.scenario import Scenario
from monoflow.util import json_number
from .utils import PositiveFloatParamType, SeedParamType


logger = logging.getLogger("monoflow.cli")


def color_option(f: Callable) -> Callable:
    return click.option(
        "--color",
        type=click.Choice(["auto", "standard", "256", "truecolor", "windows", "none"]),
        default="auto",
        help="""Force the command to output with/without terminal colors. By default output colours if the terminal supports it.
See the [underline blue][link=https://rich.readthedocs.io/en/stable/console.html#color-systems]Rich documentation[/link][/] for more info on what the options mean.""",
    )(f)


def verbose_option(f: Callable) -> Callable:
    return click.option(
        "-v", "--verbose", count=True, help="Log progress to stderr, repeat for debug output."
    )(f)


def scenario_options(required: bool = True, integration: bool = True) -> Callable:
    """The options every scenario driven command shares; ``integration`` adds the integrator overrides."""

    def decorate(f: Callable) -> Callable:
        options = [
            click.option("-s", "--scenario", type=click.Path(dir_okay=False, path_type=Path), required=required,
                         help="Scenario file, JSON or TOML (by extension)."),
            click.option("-o", "--out", type=click.Path(file_okay=False, path_type=Path), default=None,
                         help="Directory for the output artifacts. Nothing is written when omitted."),
            click.option("--seed", type=SeedParamType(), default=None,
                         help="Seed of every random choice, overrides the scenario."),
            click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                         help="Format of the result printed on stdout."),
        ]
        if integration:
            options += [
                click.option("--t-max", type=PositiveFloatParamType(), default=None, help="Integration horizon."),
                click.option("--tol-step", type=PositiveFloatParamType(), default=None,
                             help="Local error tolerance of the integrator."),
                click.option("--tol-buffer", type=PositiveFloatParamType(), default=None,
                             help="Distance to a buffer that counts as hitting it."),
                click.option("--tol-equilibrium", type=PositiveFloatParamType(), default=None,
                             help="Drift below which the state counts as an equilibrium."),
            ]
        options += [verbose_option, color_option]
        for option in reversed(options):
            f = option(f)
        return f

    return decorate


def make_console(color: str) -> Console:
    return Console(stderr=True, color_system=None if color == "none" else color)


def configure_logging(verbose: int, console: Console) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(message)s", datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)], force=True
    )
    logging.captureWarnings(True)


def handle_errors(f: Callable) -> Callable:
    """Print library errors as JSON on stdout and exit with the matching exit code."""

    @functools.wraps(f)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return f(*args, **kwargs)
        except FlowNetworkException as e:
            logger.error(str(e))
            click.echo(dumps(e.asdict()))
            sys.exit(e.exit_code)

    return wrapper


def load_scenario(path: Path, seed: Optional[int], t_max: Optional[float], tol_step: Optional[float],
                  tol_buffer: Optional[float], tol_equilibrium: Optional[float]) -> Scenario:
    """Load a scenario and apply the command line overrides, which take precedence over the file."""
    scenario = Scenario.load(path)
    return scenario.with_overrides(seed=seed, t_max=t_max, tol_step=tol_step, tol_buffer=tol_buffer,
                                   tol_equilibrium=tol_equilibrium)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in value]
        return sorted(items) if isinstance(value, (set, frozenset)) else items
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    return json_number(value)


def dumps(data: Any) -> str:
    """Deterministic JSON: sorted keys, non-finite numbers as strings."""
    return json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=False)


def write_json(out: Optional[Path], name: str, data: Any) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(dumps(data) + "\n", encoding="utf-8")
    logger.info("wrote %s", out / name)
