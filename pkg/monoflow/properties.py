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

import logging
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import FlowNetworkException
from .dynamics import IntegrationConfig, Termination, integrate_pair, rhs
from .graph import Network
from .networks import random_network
from .routing import RoutingPolicy, build_policy, check_axioms, check_monotonicity, sample_interior


logger = logging.getLogger(__name__)

# Below this l1 distance two states count as coinciding.
COINCIDENCE = 1e-6
# Components closer than this count as ties in the sign sum.
TIE = 1e-12


@dataclass
class ContractionReport:
    """l1 distance phi(t) between two solutions on a shared grid."""

    times: np.ndarray
    phi: np.ndarray
    tol: float
    strict: bool
    max_increase: float
    strict_violations: int
    termination: Termination

    @property
    def passed(self) -> bool:
        return self.max_increase <= self.tol and self.strict_violations == 0

    def asdict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "phi_start": float(self.phi[0]),
            "phi_end": float(self.phi[-1]),
            "max_increase": self.max_increase,
            "strict_violations": self.strict_violations,
            "tol": self.tol,
            "strict": self.strict,
            "truncated": self.termination is Termination.BUFFER_HIT,
            "t_end": float(self.times[-1]),
        }


def check_l1_contraction(
    network: Network,
    policy: RoutingPolicy,
    rho_a: Sequence[float],
    rho_b: Sequence[float],
    horizon: float,
    *,
    strict: bool = False,
    tol: Optional[float] = None,
    samples: int = 200,
    config: Optional[IntegrationConfig] = None,
) -> ContractionReport:
    """Integrate two solutions and check that their l1 distance never grows.

    The distance may rise by at most ``tol`` (default 1e-7 (1 + phi(0))) between samples. With
    ``strict`` it must also fall at every sample where it exceeds ``COINCIDENCE``. A buffer hit of
    either solution truncates the comparison.
    """
    rho_a = np.asarray(rho_a, dtype=float)
    rho_b = np.asarray(rho_b, dtype=float)
    times, traj_a, traj_b, termination = integrate_pair(network, policy, rho_a, rho_b, horizon, config, samples)
    phi = np.abs(traj_a - traj_b).sum(axis=1)
    tol = 1e-7 * (1.0 + float(phi[0])) if tol is None else tol
    steps = np.diff(phi)
    max_increase = float(steps.max(initial=0.0))
    strict_violations = int(((phi[:-1] > COINCIDENCE) & (steps >= 0)).sum()) if strict else 0
    if max_increase > tol or strict_violations:
        logger.info("contraction: max increase %.3g, %d non-decreasing steps", max_increase, strict_violations)
    return ContractionReport(times, phi, tol, strict, max_increase, strict_violations, termination)


@dataclass
class OrderReport:
    times: np.ndarray
    max_violation: float
    tol: float
    termination: Termination

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def asdict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "tol": self.tol,
            "truncated": self.termination is Termination.BUFFER_HIT,
            "t_end": float(self.times[-1]),
        }


def check_order_preservation(
    network: Network,
    policy: RoutingPolicy,
    rho_low: Sequence[float],
    rho_high: Sequence[float],
    horizon: float,
    *,
    tol: float = 1e-7,
    samples: int = 200,
    config: Optional[IntegrationConfig] = None,
) -> OrderReport:
    """Check that componentwise ordered initial states stay ordered.

    Raises
    ------
    FlowNetworkException
        ``FLOW_BAD_PARAMETER`` when ``rho_low`` is not below ``rho_high`` componentwise.
    """
    rho_low = np.asarray(rho_low, dtype=float)
    rho_high = np.asarray(rho_high, dtype=float)
    if (rho_low > rho_high).any():
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "Initial states are not ordered.")
    times, low, high, termination = integrate_pair(network, policy, rho_low, rho_high, horizon, config, samples)
    violation = float((low - high).max(initial=0.0))
    return OrderReport(times, max(violation, 0.0), tol, termination)


@dataclass
class SignReport:
    sums: np.ndarray
    tol: float
    strict: bool
    distinct: np.ndarray

    @property
    def max_sum(self) -> float:
        return float(self.sums.max(initial=-np.inf))

    @property
    def violations(self) -> int:
        return int((self.sums > self.tol).sum())

    @property
    def strict_violations(self) -> int:
        if not self.strict:
            return 0
        return int((self.distinct & (self.sums >= 0) & (self.sums <= self.tol)).sum())

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.strict_violations == 0

    def asdict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "pairs": int(len(self.sums)),
            "max_sum": self.max_sum,
            "violations": self.violations,
            "strict_violations": self.strict_violations,
            "tol": self.tol,
        }


def sign_sum(g: Callable[[np.ndarray], np.ndarray], x: np.ndarray, y: np.ndarray) -> float:
    """sum_i sgn(x_i - y_i) (g_i(x) - g_i(y)), with near ties weighted 0."""
    diff = x - y
    sign = np.where(np.abs(diff) < TIE, 0.0, np.sign(diff))
    return float(sign @ (g(x) - g(y)))


def check_sign_inequality(
    g: Callable[[np.ndarray], np.ndarray],
    pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
    *,
    tol: float = 1e-9,
    strict: bool = False,
) -> SignReport:
    """Evaluate the sign sum of the vector field ``g`` on sampled pairs.

    Every sum must be at most ``tol``; with ``strict`` it must be negative whenever the pair
    differs.
    """
    sums = np.array([sign_sum(g, np.asarray(x, float), np.asarray(y, float)) for x, y in pairs])
    distinct = np.array([bool((np.abs(np.asarray(x) - np.asarray(y)) >= TIE).any()) for x, y in pairs], dtype=bool)
    return SignReport(sums, tol, strict, distinct)


def sample_pairs(network: Network, rng: np.random.Generator, n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs of interior densities from the sampling box of :func:`monoflow.routing.sample_interior`."""
    points = sample_interior(network, rng, 2 * n)
    return [(points[2 * k], points[2 * k + 1]) for k in range(n)]


def ordered_pair(network: Network, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    low = sample_interior(network, rng)
    ceiling = np.where(network.finite_buffers, 0.9 * network.buffers, low + 2.0)
    high = low + rng.uniform(0.0, 1.0, size=low.shape) * np.maximum(ceiling - low, 0.0)
    return low, high


SUITES = ("axioms", "monotone", "contraction", "order", "sign")


@dataclass(frozen=True)
class PropertyRunConfig:
    """Settings of a seeded property suite run; identical settings give identical verdicts."""

    seed: int = 0
    instances: int = 10
    min_nodes: int = 3
    max_nodes: int = 8
    policy: Mapping[str, Any] = field(default_factory=lambda: {"type": "softmax"})
    rational: bool = True
    finite_buffers: bool = False
    horizon: float = 20.0
    samples: int = 200
    sign_pairs: int = 50
    axiom_samples: int = 50
    monotonicity_samples: int = 30
    strict: bool = True
    tol_contraction: Optional[float] = None
    tol_order: float = 1e-7
    tol_sign: float = 1e-9
    workers: Optional[int] = None

    def asdict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["policy"] = dict(self.policy)
        return data

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "PropertyRunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_PARSE_ERROR, "Unknown property run settings.", keys=sorted(unknown)
            )
        return cls(**data)


@dataclass
class CheckOutcome:
    check: str
    instance: int
    passed: bool
    detail: Dict[str, Any]


@dataclass
class SuiteReport:
    suite: Tuple[str, ...]
    config: PropertyRunConfig
    outcomes: List[CheckOutcome]
    cross_issues: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    @property
    def failures(self) -> List[CheckOutcome]:
        return [o for o in self.outcomes if not o.passed]

    def asdict(self) -> Dict[str, Any]:
        return {
            "suite": list(self.suite),
            "passed": self.passed,
            "config": self.config.asdict(),
            "counts": {c: sum(1 for o in self.outcomes if o.check == c) for c in self.suite},
            "failures": [{"check": o.check, "instance": o.instance, "detail": o.detail} for o in self.failures],
            "cross_issues": list(self.cross_issues),
        }

    def write_junit(self, path: Union[str, Path]) -> None:
        """JUnit XML with one test case per check and instance."""
        root = ET.Element("testsuite", name="monoflow.properties", tests=str(len(self.outcomes)),
                          failures=str(len(self.failures)))
        for o in self.outcomes:
            case = ET.SubElement(root, "testcase", classname=f"monoflow.{o.check}", name=f"instance_{o.instance}")
            if not o.passed:
                failure = ET.SubElement(case, "failure", message=f"{o.check} failed")
                failure.text = repr(o.detail)
        ET.ElementTree(root).write(str(path), encoding="utf-8", xml_declaration=True)


def _instance(
    config: PropertyRunConfig,
    index: int,
    checks: Sequence[str],
    network: Optional[Network],
    make_policy: Callable[[Network], RoutingPolicy],
) -> List[CheckOutcome]:
    rng = np.random.default_rng([config.seed, index])
    if network is None:
        n_nodes = int(rng.integers(config.min_nodes, config.max_nodes + 1))
        network = random_network(
            int(rng.integers(0, 2 ** 32)), n_nodes, rational=config.rational, finite_buffers=config.finite_buffers
        )
    policy = make_policy(network)
    seed = int(rng.integers(0, 2 ** 32))
    outcomes = []
    for check in checks:
        if check == "axioms":
            report: Any = check_axioms(policy, network, n_samples=config.axiom_samples, seed=seed)
            passed = report.passed
        elif check == "monotone":
            report = check_monotonicity(policy, network, n_samples=config.monotonicity_samples, seed=seed)
            passed = report.monotone
        elif check == "contraction":
            a, b = sample_pairs(network, rng, 1)[0]
            report = check_l1_contraction(network, policy, a, b, config.horizon, strict=config.strict,
                                          tol=config.tol_contraction, samples=config.samples)
            passed = report.passed
        elif check == "order":
            low, high = ordered_pair(network, rng)
            report = check_order_preservation(network, policy, low, high, config.horizon, tol=config.tol_order,
                                              samples=config.samples)
            passed = report.passed
        else:
            report = check_sign_inequality(lambda x: rhs(network, policy, x), sample_pairs(network, rng, config.sign_pairs),
                                           tol=config.tol_sign, strict=config.strict)
            passed = report.passed
        detail = report.asdict()
        detail["network_links"] = len(network.links)
        outcomes.append(CheckOutcome(check, index, bool(passed), detail))
    return outcomes


def run_suite(
    suite: Union[str, Sequence[str]],
    config: Optional[PropertyRunConfig] = None,
    *,
    network: Optional[Network] = None,
    make_policy: Optional[Callable[[Network], RoutingPolicy]] = None,
) -> SuiteReport:
    """Run property checks over seeded instances.

    ``suite`` is one of ``axioms``, ``monotone``, ``contraction``, ``order``, ``sign`` or ``all``.
    Instances use random networks unless ``network`` is given, and the policy from
    ``config.policy`` unless ``make_policy`` is given. A failed sign check on an instance whose
    contraction check passed is cross-reported, since the sign inequality implies contraction.
    """
    config = config or PropertyRunConfig()
    names = (suite,) if isinstance(suite, str) else tuple(suite)
    if "all" in names:
        names = SUITES
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown suite {unknown[0]}.")
    if make_policy is None:
        spec = dict(config.policy)

        def make_policy(net: Network) -> RoutingPolicy:
            return build_policy(spec, net)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        per_instance = list(pool.map(
            lambda i: _instance(config, i, names, network, make_policy), range(config.instances)
        ))
    outcomes = [o for batch in per_instance for o in batch]

    cross = []
    for batch in per_instance:
        by_check = {o.check: o for o in batch}
        sign, contraction = by_check.get("sign"), by_check.get("contraction")
        if sign and contraction and not sign.passed and contraction.passed:
            cross.append(f"instance {sign.instance}: sign inequality failed but contraction held")
    report = SuiteReport(names, config, outcomes, cross)
    logger.info("property suite %s: %d/%d passed", ",".join(names), len(outcomes) - len(report.failures), len(outcomes))
    return report
