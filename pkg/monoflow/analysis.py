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

import enum
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import IO, Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import FlowNetworkException, FlowNetworkWarning
from .cuts import CutReport, cut_value, enumerate_violations, maximal_cut, maxflow_report, min_cut_capacity
from .dynamics import IntegrationConfig, Termination, Trajectory, destination_outflow, integrate, rhs, throughput
from .graph import Cut, Network, cut_sets
from .routing import (
    AxiomReport, MonotonicityReport, RoutingPolicy, check_axioms, check_monotonicity, sample_interior
)
from .util import Quantity, as_float, format_float, json_number, time_average


logger = logging.getLogger(__name__)


def _fromdict(cls, data: Mapping[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PARSE_ERROR, f"Unknown {cls.__name__} settings.", keys=sorted(unknown)
        )
    return cls(**data)


# Link classification

@dataclass(frozen=True)
class ClassificationThresholds:
    """Tolerances of the limit classification.

    ``tol_slope`` and ``tol_flow`` default to 1e-4 times the total inflow and 1e-3 times the
    largest finite capacity of the classified network.
    """

    tol_buffer: float = 1e-4
    tol_slope: Optional[float] = None
    r2_min: float = 0.999
    tol_drift: float = 1e-4
    tol_flow: Optional[float] = None
    window_fraction: float = 0.5

    def resolved(self, network: Network) -> "ClassificationThresholds":
        tol_slope = self.tol_slope
        if tol_slope is None:
            tol_slope = 1e-4 * max(float(network.total_inflow), 1e-12)
        tol_flow = self.tol_flow
        if tol_flow is None:
            finite = network.capacities[np.isfinite(network.capacities)]
            tol_flow = 1e-3 * (float(finite.max()) if finite.size else 1.0)
        return replace(self, tol_slope=tol_slope, tol_flow=tol_flow)

    def asdict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "ClassificationThresholds":
        return _fromdict(cls, data)


AT_BUFFER = "B"
BELOW_BUFFER = "W"
INCONCLUSIVE = "inconclusive"


@dataclass
class LinkClassification:
    """Evidence for the limit behaviour of every link.

    ``density`` maps each link to B, W or inconclusive. ``flows`` maps each link to the subset
    of {C, Z_o, Z_i} it was tagged with. ``evidence`` keeps the fitted numbers per link.
    """

    density: Dict[str, str]
    flows: Dict[str, FrozenSet[str]]
    thresholds: ClassificationThresholds
    evidence: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def _density(self, tag: str) -> FrozenSet[str]:
        return frozenset(e for e, t in self.density.items() if t == tag)

    def _flow(self, tag: str) -> FrozenSet[str]:
        return frozenset(e for e, t in self.flows.items() if tag in t)

    @property
    def B(self) -> FrozenSet[str]:
        return self._density(AT_BUFFER)

    @property
    def W(self) -> FrozenSet[str]:
        return self._density(BELOW_BUFFER)

    @property
    def inconclusive(self) -> FrozenSet[str]:
        return self._density(INCONCLUSIVE)

    @property
    def C(self) -> FrozenSet[str]:
        return self._flow("C")

    @property
    def Z_o(self) -> FrozenSet[str]:
        return self._flow("Z_o")

    @property
    def Z_i(self) -> FrozenSet[str]:
        return self._flow("Z_i")

    def asdict(self) -> Dict[str, Any]:
        return {
            "links": {
                e: {"density": self.density[e], "flow": sorted(self.flows[e]), **self.evidence.get(e, {})}
                for e in self.density
            },
            "B": sorted(self.B),
            "W": sorted(self.W),
            "C": sorted(self.C),
            "Z_o": sorted(self.Z_o),
            "Z_i": sorted(self.Z_i),
            "inconclusive": sorted(self.inconclusive),
            "thresholds": self.thresholds.asdict(),
        }


def _time_mean(t: np.ndarray, y: np.ndarray) -> float:
    span = t[-1] - t[0]
    if len(t) < 2 or span <= 0:
        return float(y[-1])
    return time_average(y, t)


def _linear_fit(t: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope and coefficient of determination."""
    if len(t) < 2 or t[-1] == t[0]:
        return 0.0, 0.0
    slope, intercept = np.polyfit(t, y, 1)
    residual = y - (slope * t + intercept)
    total = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((residual ** 2).sum()) / total if total > 0 else 0.0
    return float(slope), r2


def _growth_evidence(t: np.ndarray, y: np.ndarray, th: ClassificationThresholds) -> Tuple[str, Dict[str, Any]]:
    slope, r2 = _linear_fit(t, y)
    quarter = t >= t[-1] - 0.25 * (t[-1] - t[0])
    tail_slope, _ = _linear_fit(t[quarter], y[quarter])
    evidence: Dict[str, Any] = {"slope": slope, "r2": r2, "tail_slope": tail_slope}
    if r2 >= th.r2_min and slope > th.tol_slope:
        evidence["growth"] = "linear"
        return AT_BUFFER, evidence
    edges = np.linspace(t[0], t[-1], 5)
    means = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        part = (t >= lo) & (t <= hi)
        means.append(float(y[part].mean()) if part.any() else math.nan)
    if all(b > a for a, b in zip(means, means[1:])) and tail_slope > th.tol_drift:
        evidence["growth"] = "sublinear"
        return AT_BUFFER, evidence
    if abs(tail_slope) <= th.tol_drift:
        return BELOW_BUFFER, evidence
    return INCONCLUSIVE, evidence


def classify_links(
    trajectory: Trajectory,
    network: Network,
    thresholds: Optional[ClassificationThresholds] = None,
) -> LinkClassification:
    """Tag every link with its limit behaviour along ``trajectory``.

    Finite-buffer links are at-buffer (B) when their final density is within ``tol_buffer`` of
    the buffer. Infinite-buffer links are B when the trailing window shows linear growth
    (R^2 >= ``r2_min``, slope > ``tol_slope``) or steady sublinear growth, and below-buffer (W)
    when the last quarter of the window drifts by at most ``tol_drift``. Flow tags compare the
    trailing time averages of inflow and outflow with 0 and C_e; after a buffer hit the final
    values are used instead. Links meeting no criterion are reported as inconclusive.
    """
    th = (thresholds or ClassificationThresholds()).resolved(network)
    hit = trajectory.termination is Termination.BUFFER_HIT
    window = trajectory.trailing(th.window_fraction)
    t = trajectory.times[window]
    density: Dict[str, str] = {}
    flows: Dict[str, FrozenSet[str]] = {}
    evidence: Dict[str, Dict[str, Any]] = {}

    for i, link in enumerate(network.links):
        final = float(trajectory.states[-1, i])
        if math.isfinite(network.buffers[i]):
            tag = AT_BUFFER if final >= network.buffers[i] - th.tol_buffer else BELOW_BUFFER
            evidence[link.id] = {"final_density": final}
        elif hit:
            # the run stopped at a finite buffer; an infinite buffer is never reached in finite time
            tag = BELOW_BUFFER
            evidence[link.id] = {"final_density": final}
        else:
            tag, evidence[link.id] = _growth_evidence(t, trajectory.states[window, i], th)
            evidence[link.id]["final_density"] = final
        density[link.id] = tag

        if hit:
            out_mean = float(trajectory.outflow[-1, i])
            in_mean = float(trajectory.inflow[-1, i])
        else:
            out_mean = _time_mean(t, trajectory.outflow[window, i])
            in_mean = _time_mean(t, trajectory.inflow[window, i])
        tags = set()
        capacity = network.capacities[i]
        if math.isfinite(capacity) and abs(out_mean - capacity) <= th.tol_flow:
            tags.add("C")
        elif out_mean < th.tol_flow:
            tags.add("Z_o")
        if in_mean < th.tol_flow:
            tags.add("Z_i")
        flows[link.id] = frozenset(tags)
        evidence[link.id].update(mean_outflow=out_mean, mean_inflow=in_mean)

    result = LinkClassification(density, flows, th, evidence)
    if result.inconclusive:
        message = f"Links {sorted(result.inconclusive)} are neither growing nor settled in the trailing window."
        logger.warning(message)
        warnings.warn(message, FlowNetworkWarning)
    return result


@dataclass(frozen=True)
class StructureIssue:
    rule: str
    link: str
    message: str


def check_limit_structure(classification: LinkClassification, network: Network) -> List[StructureIssue]:
    """Check the implications every limit classification must satisfy.

    * a link at its buffer has capacity outflow, or all its downstream links are at their buffers;
    * a link at its buffer has vanishing inflow, or all links leaving its tail are at their buffers;
    * a link below its buffer whose downstream links are all at their buffers has vanishing outflow.

    Violations indicate thresholds that do not fit the run; they are diagnostics, not errors.
    """
    b = classification.B
    issues: List[StructureIssue] = []
    for i, link in enumerate(network.links):
        e = link.id
        down = {network.links[j].id for j in network.downstream[i]}
        siblings = {network.links[j].id for j in network.out_links[link.tail]}
        terminal = bool(network.terminal[i])
        if e in b:
            if e not in classification.C and (terminal or not down <= b):
                issues.append(StructureIssue(
                    "outflow", e, f"Link {e} is at its buffer without capacity outflow or congested successors."
                ))
            if e not in classification.Z_i and not siblings <= b:
                issues.append(StructureIssue(
                    "inflow", e, f"Link {e} is at its buffer while receiving flow and a sibling link is not."
                ))
        elif e in classification.W and not terminal and down <= b and e not in classification.Z_o:
            issues.append(StructureIssue(
                "blocked", e, f"All successors of link {e} are at their buffers but its outflow does not vanish."
            ))
    for issue in issues:
        logger.info("structure: %s", issue.message)
    return issues


@dataclass
class OverloadCut:
    """The cut S of nodes whose outgoing links all reach their buffers, with its consistency checks."""

    cut: Optional[Cut]
    out_links: FrozenSet[str] = frozenset()
    boundary_out: FrozenSet[str] = frozenset()
    boundary_in: FrozenSet[str] = frozenset()
    diagnostics: List[str] = field(default_factory=list)
    structure: List[StructureIssue] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.cut is not None and not self.diagnostics

    def asdict(self) -> Dict[str, Any]:
        return {
            "cut": sorted(self.cut.nodes) if self.cut else None,
            "out_links": sorted(self.out_links),
            "boundary_out": sorted(self.boundary_out),
            "boundary_in": sorted(self.boundary_in),
            "consistent": self.consistent,
            "diagnostics": list(self.diagnostics),
            "structure": [{"rule": s.rule, "link": s.link, "message": s.message} for s in self.structure],
        }


def overload_cut(classification: LinkClassification, network: Network) -> OverloadCut:
    """S = {v not a destination : every link leaving v is at its buffer}.

    Checks that the links leaving S reach capacity, the links entering S lose their flow and
    every other link outside the out-links of S stays below its buffer.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PRECONDITION_NOT_MET`` when no link is at its buffer.
    """
    b = classification.B
    if not b:
        raise FlowNetworkException(FlowNetworkException.FLOW_PRECONDITION_NOT_MET, "No link reaches its buffer.")
    nodes = frozenset(
        v for v in network.non_destinations if all(network.links[j].id in b for j in network.out_links[v])
    )
    structure = check_limit_structure(classification, network)
    if not nodes:
        return OverloadCut(None, diagnostics=["Links reach their buffers but no node has all its out-links there."],
                           structure=structure)
    cut = Cut(nodes)
    sets = cut_sets(network, cut)
    diagnostics = []
    if not sets.boundary_out <= classification.C:
        diagnostics.append(f"Links {sorted(sets.boundary_out - classification.C)} leave S below capacity.")
    zero = classification.Z_i | classification.Z_o
    if not sets.boundary_in <= zero:
        diagnostics.append(f"Links {sorted(sets.boundary_in - zero)} enter S with non-vanishing flow.")
    rest = frozenset(network.link_ids) - sets.out_links - sets.boundary_in
    if not rest <= classification.W:
        diagnostics.append(f"Links {sorted(rest - classification.W)} outside S are not below their buffers.")
    for message in diagnostics:
        logger.info("overload cut: %s", message)
    return OverloadCut(cut, sets.out_links, sets.boundary_out, sets.boundary_in, diagnostics, structure)


@dataclass(frozen=True)
class KappaBound:
    value: Optional[float]
    cut: Optional[Cut]
    violating_cuts: int

    def asdict(self) -> Dict[str, Any]:
        return {
            "value": json_number(self.value),
            "cut": sorted(self.cut.nodes) if self.cut else None,
            "violating_cuts": self.violating_cuts,
        }


def kappa_upper_bound(network: Network, rho0: Union[np.ndarray, Sequence[float]], inflows: Optional[Mapping] = None) -> KappaBound:
    """Upper bound on the buffer-hit time from ``rho0``.

    The minimum over violating cuts U (lambda_U > C_U) of the free buffer space on the links
    leaving U's nodes divided by lambda_U - C_U. ``value`` is None when no cut is violated or
    every violating cut has an unbounded buffer on its out-links.
    """
    if inflows is not None:
        network = network.with_inflows(inflows)
    rho0 = np.asarray(rho0, dtype=float)
    report = enumerate_violations(network, limit=16, records=True)
    best: Optional[Tuple[float, Cut]] = None
    count = 0
    for record in report.records:
        if not record.value > 0:
            continue
        count += 1
        out = cut_sets(network, record.cut).out_links
        space = sum(network.buffers[network.link_index[e]] - rho0[network.link_index[e]] for e in out)
        bound = float(space) / float(record.value)
        if math.isfinite(bound) and (best is None or bound < best[0]):
            best = (bound, record.cut)
    if best is None:
        return KappaBound(None, None, count)
    return KappaBound(best[0], best[1], count)


@dataclass(frozen=True)
class GrowthRate:
    """Fitted growth of the mass on the out-links of a cut against lambda_U - C_U."""

    cut: Cut
    slope: float
    expected: float
    r2: float
    relative_deviation: float
    complement_drift: Dict[str, float]
    complement_limit: Dict[str, float] = field(default_factory=dict)

    def asdict(self) -> Dict[str, Any]:
        return {
            "cut": sorted(self.cut.nodes),
            "slope": self.slope,
            "expected": self.expected,
            "r2": self.r2,
            "relative_deviation": self.relative_deviation,
            "complement_drift": dict(self.complement_drift),
            "complement_limit": dict(self.complement_limit),
        }


def growth_rate(trajectory: Trajectory, cut: Cut, network: Network, window_fraction: float = 0.5) -> GrowthRate:
    """Least-squares slope of the total density on the out-links of ``cut`` over the trailing window.

    The links that are neither out-links of the cut nor enter it should settle; their
    last-quarter slopes are reported as ``complement_drift`` and their last-quarter mean
    densities, the estimate of their limits, as ``complement_limit``.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PRECONDITION_NOT_MET`` when the trailing window holds fewer than three samples.
    """
    window = trajectory.trailing(window_fraction)
    if window.sum() < 3:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PRECONDITION_NOT_MET, "Trajectory too short for a growth fit.",
            samples=int(window.sum())
        )
    sets = cut_sets(network, cut)
    out = [network.link_index[e] for e in sorted(sets.out_links)]
    t = trajectory.times[window]
    mass = trajectory.states[window][:, out].sum(axis=1)
    slope, r2 = _linear_fit(t, mass)
    expected = float(cut_value(network, cut))
    deviation = abs(slope - expected) / max(abs(expected), 1e-12)

    quarter = t >= t[-1] - 0.25 * (t[-1] - t[0])
    drift, limit = {}, {}
    for e in network.link_ids:
        if e in sets.out_links or e in sets.boundary_in:
            continue
        rho_e = trajectory.states[window][quarter, network.link_index[e]]
        drift[e] = _linear_fit(t[quarter], rho_e)[0]
        limit[e] = _time_mean(t[quarter], rho_e)
    return GrowthRate(cut, slope, expected, r2, deviation, drift, limit)


# Equilibria

@dataclass
class EquilibriumComparison:
    equilibria: np.ndarray
    terminations: List[Termination]
    spread: float
    relative_spread: float

    @property
    def all_converged(self) -> bool:
        return all(t is Termination.EQUILIBRIUM for t in self.terminations)

    def asdict(self) -> Dict[str, Any]:
        return {
            "runs": len(self.terminations),
            "all_converged": self.all_converged,
            "terminations": [t.value for t in self.terminations],
            "spread": self.spread,
            "relative_spread": self.relative_spread,
        }


def compare_equilibria(
    network: Network,
    policy: RoutingPolicy,
    initial_states: Sequence[np.ndarray],
    config: Optional[IntegrationConfig] = None,
    workers: Optional[int] = None,
) -> EquilibriumComparison:
    """Integrate several initial conditions concurrently and measure how far apart they end up.

    ``spread`` is the largest componentwise difference of the final states and
    ``relative_spread`` divides it by 1 + the largest final density.
    """
    if not initial_states:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "No initial states given.")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(lambda rho: integrate(network, policy, rho, config), initial_states))
    finals = np.array([run.final_state for run in runs])
    spread = float((finals.max(axis=0) - finals.min(axis=0)).max(initial=0.0))
    scale = 1.0 + float(np.abs(finals).max(initial=0.0))
    return EquilibriumComparison(finals, [run.termination for run in runs], spread, spread / scale)


# Resilience

def _exact(amount: float) -> Fraction:
    return Fraction(amount).limit_denominator(10 ** 9)


@dataclass(frozen=True)
class SequentialReduction:
    """Reduce the listed links in order: each is lowered to zero before the next one is touched."""

    links: Tuple[str, ...]

    @property
    def name(self) -> str:
        return "reduce:" + ">".join(self.links)

    def max_amount(self, network: Network) -> Fraction:
        return sum((network.link(e).capacity for e in self.links), Fraction(0))

    def apply(self, network: Network, amount: float) -> Network:
        left = _exact(amount)
        new: Dict[str, Quantity] = {}
        for e in self.links:
            capacity = network.link(e).capacity
            cut = min(capacity, max(left, Fraction(0)))
            new[e] = capacity - cut
            left -= cut
        return network.with_capacities(new)

    def asdict(self) -> Dict[str, Any]:
        return {"type": "sequential", "links": list(self.links)}


@dataclass(frozen=True)
class UniformScaling:
    """Scale the listed links (all links when empty) by a common factor."""

    links: Tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return "scale:" + (",".join(self.links) if self.links else "all")

    def _targets(self, network: Network) -> Tuple[str, ...]:
        return self.links or network.link_ids

    def max_amount(self, network: Network) -> Fraction:
        return sum((network.link(e).capacity for e in self._targets(network)), Fraction(0))

    def apply(self, network: Network, amount: float) -> Network:
        total = self.max_amount(network)
        share = min(max(_exact(amount) / total, Fraction(0)), Fraction(1)) if total > 0 else Fraction(0)
        return network.with_capacities({e: network.link(e).capacity * (1 - share) for e in self._targets(network)})

    def asdict(self) -> Dict[str, Any]:
        return {"type": "uniform", "links": list(self.links)}


Perturbation = Union[SequentialReduction, UniformScaling]


def perturbation_fromdict(data: Mapping[str, Any]) -> Perturbation:
    kind = data.get("type")
    links = tuple(str(e) for e in data.get("links", ()))
    if kind == "sequential" and links:
        return SequentialReduction(links)
    if kind == "uniform":
        return UniformScaling(links)
    raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid perturbation {dict(data)!r}.")


def default_family(network: Network) -> List[Perturbation]:
    """Single-link reductions of every link, the minimum cut's links in sequence and a uniform scaling."""
    family: List[Perturbation] = [SequentialReduction((e,)) for e in network.link_ids]
    _, cut = min_cut_capacity(network)
    boundary = tuple(e for e in network.link_ids if e in cut_sets(network, cut).boundary_out)
    if len(boundary) > 1:
        family.append(SequentialReduction(boundary))
    family.append(UniformScaling())
    return family


@dataclass(frozen=True)
class ResilienceConfig:
    """Settings of a resilience search.

    ``tol_loss`` is the throughput shortfall a run must exceed to count as a loss, so every
    estimate lies above the exact threshold by the capacity it takes to lose ``tol_loss`` more.
    """

    horizon: float = 600.0
    tol_loss: float = 0.01
    resolution: float = 1e-3
    workers: Optional[int] = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)

    def asdict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["integration"] = self.integration.asdict()
        return data

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "ResilienceConfig":
        data = dict(data)
        if "integration" in data:
            data["integration"] = IntegrationConfig.fromdict(data["integration"])
        return _fromdict(cls, data)


@dataclass(frozen=True)
class ResiliencePoint:
    delta: float
    nu_hat: Optional[float]
    nu_theory: float
    perturbation: Optional[str]
    flagged: Tuple[str, ...] = ()


@dataclass
class ResilienceCurve:
    points: List[ResiliencePoint]
    family: List[str]
    min_cut_capacity: Optional[Quantity] = None

    def to_csv(self, target: Union[str, Path, IO[str]]) -> None:
        lines = ["delta,nu_hat,nu_theory,perturbation"]
        for p in self.points:
            nu_hat = format_float(p.nu_hat) if p.nu_hat is not None else "nan"
            lines.append(f"{format_float(p.delta)},{nu_hat},{format_float(p.nu_theory)},{p.perturbation or ''}")
        text = "\n".join(lines) + "\n"
        if isinstance(target, (str, Path)):
            Path(target).write_text(text, encoding="utf-8")
        else:
            target.write(text)

    def asdict(self) -> Dict[str, Any]:
        return {
            "family": list(self.family),
            "min_cut_capacity": json_number(self.min_cut_capacity),
            "points": [
                {"delta": p.delta, "nu_hat": p.nu_hat, "nu_theory": p.nu_theory, "perturbation": p.perturbation,
                 "flagged": list(p.flagged)}
                for p in self.points
            ],
        }


class _LossSearch:
    """Decides whether a perturbed network loses more than ``delta`` throughput."""

    def __init__(self, network: Network, policy: RoutingPolicy, rho_star: np.ndarray, config: ResilienceConfig):
        self.network = network
        self.policy = policy
        self.rho_star = rho_star
        self.config = config
        self.demand = float(network.total_inflow)
        self.flagged: List[str] = []

    def loses(self, member: Perturbation, amount: float, delta: float) -> bool:
        perturbed = member.apply(self.network, amount)
        run_config = replace(self.config.integration, t_max=self.config.horizon)
        try:
            traj = integrate(perturbed, self.policy.rebind(perturbed), self.rho_star, run_config)
        except FlowNetworkException as e:
            if e.code not in (FlowNetworkException.FLOW_NUMERICAL_ABORT, FlowNetworkException.FLOW_DOMAIN_ERROR):
                raise
            self.flagged.append(f"{member.name}@{amount:.6g}: {e.name}")
            logger.warning("resilience run %s at %.6g aborted: %s", member.name, amount, e)
            return False
        if traj.termination is Termination.BUFFER_HIT:
            return True
        if traj.termination is Termination.EQUILIBRIUM:
            mu = float(destination_outflow(traj, perturbed)[-1])
        else:
            mu = throughput(traj, perturbed)
        return mu < self.demand - delta - self.config.tol_loss

    def threshold(self, member: Perturbation, delta: float) -> Optional[float]:
        top = float(member.max_amount(self.network))
        if not self.loses(member, top, delta):
            return None
        lo, hi = 0.0, top
        if self.loses(member, lo, delta):
            return 0.0
        while hi - lo > self.config.resolution:
            mid = 0.5 * (lo + hi)
            if self.loses(member, mid, delta):
                hi = mid
            else:
                lo = mid
        return hi


def resilience_curve(
    network: Network,
    policy: RoutingPolicy,
    family: Optional[Sequence[Perturbation]] = None,
    delta_grid: Sequence[float] = (0.0,),
    config: Optional[ResilienceConfig] = None,
) -> ResilienceCurve:
    """Smallest total capacity reduction within ``family`` that costs more than ``delta`` throughput.

    Every run starts from the equilibrium of the unperturbed network. A run loses throughput when
    it hits a buffer or when its (equilibrium or trailing half) throughput is below
    lambda - delta - ``tol_loss``. Each family member is bisected to ``resolution``; runs that
    abort numerically count as not reduced and are flagged. The line C_G - lambda + delta is
    reported alongside.

    The estimate is biased upward by about ``tol_loss`` and only covers the reductions in
    ``family``: a destabilizing reduction outside it is never found.
    """
    config = config or ResilienceConfig()
    family = list(family) if family is not None else default_family(network)
    if not family:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "The perturbation family is empty.")

    base = integrate(network, policy, np.zeros(len(network.links)), replace(config.integration, t_max=config.horizon))
    if base.termination is not Termination.EQUILIBRIUM:
        message = f"The unperturbed network did not settle ({base.termination.value}); using its final state."
        logger.warning(message)
        warnings.warn(message, FlowNetworkWarning)
    rho_star = base.final_state
    c_g, _ = min_cut_capacity(network)
    demand = float(network.total_inflow)

    tasks = [(delta, member) for delta in delta_grid for member in family]
    searches = [_LossSearch(network, policy, rho_star, config) for _ in tasks]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        thresholds = list(pool.map(lambda i: searches[i].threshold(tasks[i][1], tasks[i][0]), range(len(tasks))))

    points = []
    for delta in delta_grid:
        best: Optional[Tuple[float, str]] = None
        flagged: List[str] = []
        for (d, member), value, search in zip(tasks, thresholds, searches):
            if d != delta:
                continue
            flagged.extend(search.flagged)
            if value is not None and (best is None or value < best[0]):
                best = (value, member.name)
        theory = as_float(c_g) - demand + float(delta)
        points.append(ResiliencePoint(float(delta), best[0] if best else None, theory,
                                      best[1] if best else None, tuple(flagged)))
        logger.info("resilience delta=%g: nu_hat=%s", delta, best[0] if best else None)
    return ResilienceCurve(points, [m.name for m in family], c_g)


# Dichotomy

class Verdict(enum.Enum):
    EQUILIBRIUM = "equilibrium"
    FINITE_OVERLOAD = "overload_finite"
    INFINITE_OVERLOAD = "overload_infinite"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class AnalysisConfig:
    integration: IntegrationConfig = field(default_factory=lambda: IntegrationConfig(t_max=200.0))
    thresholds: ClassificationThresholds = field(default_factory=ClassificationThresholds)
    axiom_samples: int = 200
    monotonicity_samples: int = 100
    independence_runs: int = 2
    enumeration_limit: int = 22
    seed: int = 0
    workers: Optional[int] = None

    def asdict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["integration"] = self.integration.asdict()
        data["thresholds"] = self.thresholds.asdict()
        return data

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "AnalysisConfig":
        data = dict(data)
        if "integration" in data:
            data["integration"] = IntegrationConfig.fromdict(data["integration"])
        if "thresholds" in data:
            data["thresholds"] = ClassificationThresholds.fromdict(data["thresholds"])
        return _fromdict(cls, data)


@dataclass
class AnalysisReport:
    verdict: Verdict
    predicted: Verdict
    observed: Verdict
    cuts: CutReport
    trajectory: Trajectory
    classification: LinkClassification
    axioms: AxiomReport
    monotonicity: Optional[MonotonicityReport]
    details: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    caveats: List[str] = field(default_factory=list)

    @property
    def agreement(self) -> bool:
        return self.predicted is self.observed

    def asdict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "predicted": self.predicted.value,
            "observed": self.observed.value,
            "agreement": self.agreement,
            "cuts": self.cuts.asdict(),
            "termination": self.trajectory.termination_dict(),
            "classification": self.classification.asdict(),
            "axioms": self.axioms.asdict(),
            "monotonicity": self.monotonicity.asdict() if self.monotonicity else None,
            "details": self.details,
            "checks": dict(self.checks),
            "caveats": list(self.caveats),
        }


def _cut_report(network: Network, limit: int, workers: Optional[int]) -> CutReport:
    if len(network.non_destinations) <= limit:
        return enumerate_violations(network, limit=limit, workers=workers)
    return maxflow_report(network)


def _predict(best, network: Network, monotonicity: Optional[MonotonicityReport]) -> Verdict:
    if best < 0:
        return Verdict.EQUILIBRIUM
    if best == 0 and not (monotonicity and monotonicity.strongly_monotone):
        return Verdict.INDETERMINATE
    if network.finite_buffers.all():
        return Verdict.FINITE_OVERLOAD
    if not network.finite_buffers.any():
        return Verdict.INFINITE_OVERLOAD
    return Verdict.INDETERMINATE


def _observe(trajectory: Trajectory, classification: LinkClassification) -> Verdict:
    if trajectory.termination is Termination.EQUILIBRIUM:
        return Verdict.EQUILIBRIUM
    if trajectory.termination is Termination.BUFFER_HIT:
        return Verdict.FINITE_OVERLOAD
    if classification.B and not classification.inconclusive:
        return Verdict.INFINITE_OVERLOAD
    return Verdict.INDETERMINATE


def dichotomy_verdict(
    network: Network,
    policy: RoutingPolicy,
    rho0: Union[np.ndarray, Sequence[float]],
    config: Optional[AnalysisConfig] = None,
) -> AnalysisReport:
    """Predict the long-run behaviour from the cut values, simulate it and cross-check both.

    A negative best cut value predicts a globally stable equilibrium, a positive one an overload:
    a buffer hit for finite buffers and unbounded growth on the out-links of U* for infinite
    buffers. At best value zero overload is predicted only for a policy sampled as strongly
    monotone. Failed axiom checks are recorded as caveats.
    """
    config = config or AnalysisConfig()
    rho0 = np.asarray(rho0, dtype=float)
    cuts = _cut_report(network, config.enumeration_limit, config.workers)
    axioms = check_axioms(policy, network, n_samples=config.axiom_samples, seed=config.seed)
    caveats = [f"axiom {name} violated" for name in axioms.failed]
    monotonicity = None
    if config.monotonicity_samples > 0:
        monotonicity = check_monotonicity(policy, network, n_samples=config.monotonicity_samples, seed=config.seed)
        if not monotonicity.monotone:
            caveats.append("policy is not monotone at sampled points")

    trajectory = integrate(network, policy, rho0, config.integration)
    classification = classify_links(trajectory, network, config.thresholds)
    predicted = _predict(cuts.best_value, network, monotonicity)
    observed = _observe(trajectory, classification)
    details: Dict[str, Any] = {"best_value": json_number(cuts.best_value)}
    checks: Dict[str, bool] = {}

    if observed is Verdict.EQUILIBRIUM:
        rho_star = trajectory.final_state
        residual = float(np.abs(rhs(network, policy, rho_star)).max(initial=0.0))
        tol_eq = config.integration.equilibrium_threshold(network)
        details.update(
            rho_star=[float(x) for x in rho_star],
            throughput=float(destination_outflow(trajectory, network)[-1]),
            residual=residual,
        )
        checks["residual"] = residual <= 10 * tol_eq
        if config.independence_runs > 0:
            rng = np.random.default_rng(config.seed)
            starts = list(sample_interior(network, rng, config.independence_runs))
            comparison = compare_equilibria(network, policy, [rho0] + starts, config.integration, config.workers)
            details["independence"] = comparison.asdict()
            checks["initial_condition_independence"] = (
                comparison.all_converged and comparison.relative_spread <= 1e-5
            )
    elif classification.B:
        overload = overload_cut(classification, network)
        details["overload_cut"] = overload.asdict()
        checks["cut_structure"] = overload.consistent
        if overload.cut is not None:
            checks["cut_violating"] = cut_value(network, overload.cut) >= 0
        if observed is Verdict.FINITE_OVERLOAD:
            bound = kappa_upper_bound(network, rho0) if len(network.non_destinations) <= 16 else None
            details["kappa_interval"] = list(trajectory.kappa_interval or ())
            if bound is not None:
                details["kappa_bound"] = bound.asdict()
                if bound.value is not None and trajectory.kappa_interval:
                    checks["kappa_bound"] = trajectory.kappa_interval[1] <= bound.value + 1e-3
            if overload.cut is not None:
                tol = config.thresholds.tol_buffer
                final = trajectory.final_state
                checks["simultaneous_hit"] = all(
                    final[network.link_index[e]] >= network.buffers[network.link_index[e]] - tol
                    for e in overload.out_links
                )
        elif observed is Verdict.INFINITE_OVERLOAD:
            u_star = maximal_cut(network, limit=config.enumeration_limit, workers=config.workers).cut
            details["u_star"] = sorted(u_star.nodes)
            checks["cut_matches_u_star"] = overload.cut == u_star
            try:
                rate = growth_rate(trajectory, u_star, network, config.thresholds.window_fraction)
                details["growth"] = rate.asdict()
                checks["growth_rate"] = rate.relative_deviation <= 0.05
            except FlowNetworkException as e:
                caveats.append(str(e))

    verdict = Verdict.INDETERMINATE if predicted is Verdict.INDETERMINATE else observed
    if predicted is not observed and predicted is not Verdict.INDETERMINATE:
        caveats.append(f"predicted {predicted.value} but observed {observed.value}")
    logger.info("dichotomy: predicted %s, observed %s", predicted.value, observed.value)
    return AnalysisReport(verdict, predicted, observed, cuts, trajectory, classification, axioms, monotonicity,
                          details, checks, caveats)
