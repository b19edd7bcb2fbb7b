"""
 * Copyright(c) 2026 monoflow contributors
 *
 * This program and the accompanying materials are made available under the
 * terms of the Eclipse Public License v. 2.0 which is available at
 * http://www.eclipse.org/legal/epl-2.0, or the Eclipse Distribution License
 * v. 1.0 which is available at
 * http://www.eclipse.org/org/documents/edl-v10.php.
 *
 * SPDX-License-Identifier: EPL-2.0 OR BSD-3-Clause
"""

import json
import logging
import re
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import AnalysisConfig, Perturbation, ResilienceConfig, perturbation_fromdict
from .core import FlowNetworkException, FlowNetworkWarning
from .dynamics import IntegrationConfig, Stage
from .graph import Network, validate
from .routing import RoutingPolicy, build_policy, sample_interior
from .util import format_quantity, parse_quantity


logger = logging.getLogger(__name__)

InitialSpec = Union[str, List[float], Dict[str, float]]
_RANDOM = re.compile(r"^random(?:\((\d+)\))?$")


@dataclass(frozen=True)
class StageSpec:
    """Capacities in force from ``time`` on, as absolute overrides of the nominal network."""

    time: float
    capacities: Mapping[str, Any]

    def asdict(self) -> Dict[str, Any]:
        return {"time": self.time, "capacities": {k: format_quantity(v) for k, v in self.capacities.items()}}


@dataclass(frozen=True)
class Scenario:
    """Everything one command needs: the network, the policy, the initial state and the settings.

    Examples
    --------
    >>> scenario = Scenario.loads('{"network": {"links": [{"id": "1", "tail": "o", "head": "d", "capacity": 2}],'
    ...                           ' "inflows": {"o": 1}}}')
    >>> scenario.initial
    'zero'
    """

    network: Network
    policy: Mapping[str, Any] = field(default_factory=lambda: {"type": "softmax"})
    initial: InitialSpec = "zero"
    seed: int = 0
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    resilience: ResilienceConfig = field(default_factory=ResilienceConfig)
    family: Optional[Tuple[Perturbation, ...]] = None
    delta_grid: Tuple[float, ...] = (0.0,)
    stages: Tuple[StageSpec, ...] = ()
    failures: bool = False
    name: str = ""

    def __post_init__(self) -> None:
        self.check()

    def check(self) -> None:
        """Raise ``FLOW_VALIDATION_ERROR`` when the scenario is inconsistent."""
        report = validate(self.network)
        if not self.network.origins and report.kinds == {"not_strongly_connected"}:
            # zero inflow: no origins, so the world node has no outgoing links
            warnings.warn("The scenario has no positive inflow.", FlowNetworkWarning)
        else:
            report.raise_if_invalid()
        times = [s.time for s in self.stages]
        if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR, "Stage times must be non-negative and increasing.",
                times=times
            )
        for stage in self.stages:
            self.network.with_capacities(stage.capacities)
        if self.failures and self.staged:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR, "Link failures need a single capacity stage at t=0."
            )
        if isinstance(self.initial, list) and len(self.initial) != len(self.network.links):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR,
                f"Initial state has {len(self.initial)} entries for {len(self.network.links)} links."
            )
        if isinstance(self.initial, dict):
            unknown = set(self.initial) - set(self.network.link_index)
            if unknown:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR, "Initial state names unknown links.",
                    links=sorted(unknown)
                )

    # Derived values

    def make_policy(self, network: Optional[Network] = None) -> RoutingPolicy:
        return build_policy(self.policy, network or self.network)

    @property
    def staged(self) -> bool:
        return len(self.stages) > 1 or (len(self.stages) == 1 and self.stages[0].time > 0)

    def effective_network(self) -> Network:
        """The network of a run without switches: nominal, or perturbed at t=0."""
        if self.stages and self.stages[0].time == 0:
            return self.network.with_capacities(self.stages[0].capacities)
        return self.network

    def final_network(self) -> Network:
        if self.stages:
            return self.network.with_capacities(self.stages[-1].capacities)
        return self.network

    def schedule(self) -> List[Stage]:
        stages = [] if self.stages and self.stages[0].time == 0 else [Stage(0.0, self.network)]
        stages.extend(Stage(float(s.time), self.network.with_capacities(s.capacities)) for s in self.stages)
        return stages

    def initial_state(self, network: Optional[Network] = None) -> np.ndarray:
        network = network or self.network
        spec = self.initial
        if isinstance(spec, list):
            return np.array(spec, dtype=float)
        if isinstance(spec, dict):
            rho = np.zeros(len(network.links))
            for link, value in spec.items():
                rho[network.link_index[link]] = float(value)
            return rho
        if spec == "zero":
            return np.zeros(len(network.links))
        match = _RANDOM.match(spec)
        seed = int(match.group(1)) if match and match.group(1) else self.seed
        return sample_interior(network, np.random.default_rng(seed))

    def with_overrides(self, **overrides: Any) -> "Scenario":
        """Apply command line overrides: ``seed``, ``t_max`` and any ``IntegrationConfig`` field."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        seed = overrides.pop("seed", self.seed)
        integration = replace(self.integration, **overrides) if overrides else self.integration
        analysis = replace(self.analysis, seed=seed,
                           integration=replace(self.analysis.integration, **overrides) if overrides else
                           self.analysis.integration)
        resilience = replace(self.resilience, integration=replace(self.resilience.integration, **overrides)
                             if overrides else self.resilience.integration)
        return replace(self, seed=seed, integration=integration, analysis=analysis, resilience=resilience)

    # Serialization

    def asdict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "name": self.name,
            "network": self.network.asdict(),
            "policy": dict(self.policy),
            "initial": self.initial,
            "seed": self.seed,
            "integration": self.integration.asdict(),
            "analysis": self.analysis.asdict(),
            "resilience": {
                **self.resilience.asdict(),
                "family": [p.asdict() for p in self.family] if self.family is not None else None,
                "delta_grid": list(self.delta_grid),
            },
        }
        if self.stages:
            data["perturbation"] = {"stages": [s.asdict() for s in self.stages]}
        if self.failures:
            data["failures"] = True
        return data

    def dumps(self) -> str:
        return json.dumps(self.asdict(), indent=2, sort_keys=True)

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "Scenario":
        if not isinstance(data, Mapping) or "network" not in data:
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "A scenario needs a 'network' section.")
        known = {"name", "network", "policy", "initial", "seed", "integration", "analysis", "resilience", "perturbation",
                 "failures"}
        unknown = set(data) - known
        if unknown:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_PARSE_ERROR, "Unknown scenario sections.", keys=sorted(unknown)
            )
        network = Network.fromdict(data["network"])
        policy = data.get("policy", {"type": "softmax"})
        if not isinstance(policy, Mapping) or "type" not in policy:
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "The policy needs a 'type'.")

        resilience_data = dict(data.get("resilience") or {})
        family_data = resilience_data.pop("family", None)
        delta_grid = tuple(float(d) for d in resilience_data.pop("delta_grid", (0.0,)))
        family = tuple(perturbation_fromdict(p) for p in family_data) if family_data is not None else None

        try:
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError):
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "The seed must be an integer.") from None
        failures = data.get("failures", False)
        if not isinstance(failures, bool):
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "'failures' must be true or false.")

        return cls(
            network=network,
            policy=dict(policy),
            initial=_parse_initial(data.get("initial", "zero")),
            seed=seed,
            integration=IntegrationConfig.fromdict(data.get("integration", {})),
            analysis=AnalysisConfig.fromdict(data.get("analysis", {})),
            resilience=ResilienceConfig.fromdict(resilience_data),
            family=family,
            delta_grid=delta_grid,
            stages=_parse_stages(data.get("perturbation")),
            failures=failures,
            name=str(data.get("name", "")),
        )

    @classmethod
    def loads(cls, text: str, format: str = "json") -> "Scenario":
        try:
            data = tomllib.loads(text) if format == "toml" else json.loads(text)
        except (ValueError, tomllib.TOMLDecodeError) as e:
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid {format} scenario: {e}") from None
        return cls.fromdict(data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_PARSE_ERROR, f"Cannot read scenario {path}: {e.strerror}", path=str(path)
            ) from None
        scenario = cls.loads(text, "toml" if path.suffix == ".toml" else "json")
        logger.debug("loaded scenario %s from %s", scenario.name or "<unnamed>", path)
        return scenario


def _parse_initial(value: Any) -> InitialSpec:
    if isinstance(value, str):
        text = value.strip().lower()
        if text == "zero" or _RANDOM.match(text):
            return text
    elif isinstance(value, Sequence):
        return [float(parse_quantity(v, allow_unbounded=False, what="initial density")) for v in value]
    elif isinstance(value, Mapping):
        return {str(k): float(parse_quantity(v, allow_unbounded=False, what="initial density")) for k, v in value.items()}
    raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid initial condition {value!r}.")


def _parse_stages(value: Any) -> Tuple[StageSpec, ...]:
    if value is None:
        return ()
    if not isinstance(value, Mapping):
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "The perturbation must be a table.")
    if "stages" in value:
        entries = value["stages"]
    elif "capacities" in value:
        entries = [{"time": value.get("time", 0.0), "capacities": value["capacities"]}]
    else:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PARSE_ERROR, "The perturbation needs 'capacities' or 'stages'."
        )
    stages = []
    for entry in entries:
        if not isinstance(entry, Mapping) or not isinstance(entry.get("capacities"), Mapping):
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid stage {entry!r}.")
        capacities = {str(k): parse_quantity(v, what=f"capacity of link {k}") for k, v in entry["capacities"].items()}
        stages.append(StageSpec(float(entry.get("time", 0.0)), capacities))
    return tuple(stages)
