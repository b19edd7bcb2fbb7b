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
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

from .core import FlowNetworkException, FlowNetworkWarning
from .graph import Network, destination_link_id, origin_link_id
from .util import INF, as_float, parse_quantity


logger = logging.getLogger(__name__)


class LinkFlows(NamedTuple):
    """All link flows of a network at one density vector.

    ``internal[e, j]`` is the flow from link e to its downstream link j, ``exit[e]`` the flow
    from destination link e to the world and ``entry[j]`` the external inflow routed onto j.
    """

    internal: np.ndarray
    exit: np.ndarray
    entry: np.ndarray

    @property
    def outflow(self) -> np.ndarray:
        return self.internal.sum(axis=1) + self.exit

    @property
    def inflow(self) -> np.ndarray:
        return self.internal.sum(axis=0) + self.entry


@dataclass(frozen=True)
class LocalDensity:
    """The local density vector of a link: its own density and the densities downstream.

    For an origin link ``@in:v`` only the downstream densities are present.
    """

    link: str
    densities: Mapping[str, float]

    @classmethod
    def of(cls, network: Network, link: str, rho: np.ndarray) -> "LocalDensity":
        own, down = _local_indices(network, link)
        ids = ([network.links[own].id] if own is not None else []) + [network.links[k].id for k in down]
        return cls(link, {k: float(rho[network.link_index[k]]) for k in ids})

    def validate(self, network: Network) -> None:
        """Raise ``FLOW_DOMAIN_ERROR`` unless every density is in [0, B_k] and not all buffers are hit."""
        saturated = []
        for k, value in self.densities.items():
            buffer = network.buffers[network.link_index[k]]
            if not (0 <= value <= buffer):
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_DOMAIN_ERROR, f"Density {value} of link {k} is out of range.", link=k
                )
            saturated.append(value >= buffer)
        if saturated and all(saturated):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_DOMAIN_ERROR,
                f"All local densities of link {self.link} are at their buffers.", link=self.link
            )


@dataclass(frozen=True)
class FlowSplit:
    """The flows f_{e->j} out of one link, keyed by downstream link id (``@out:d`` for the world)."""

    link: str
    flows: Mapping[str, float]

    @property
    def total(self) -> float:
        return float(sum(self.flows.values()))


def _local_indices(network: Network, link: str) -> Tuple[Optional[int], Tuple[int, ...]]:
    if link.startswith("@in:"):
        node = link[len("@in:"):]
        if node not in network.origins:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"{node} is not an origin.", link=link)
        return None, network.out_links[node]
    e = network.link_index.get(link)
    if e is None:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown link {link}.", link=link)
    return e, network.downstream[e]


class RoutingPolicy(ABC):
    """A distributed routing policy: the flow out of every link depends only on its local densities.

    Subclasses implement :meth:`link_split` and :meth:`origin_split`; :meth:`flows` evaluates the
    whole network and may be overridden with a vectorized version. Policies are immutable and
    safe to share between threads.
    """

    kind: ClassVar[str] = "custom"

    def __init__(self, network: Network) -> None:
        infinite = [link.id for link in network.links if link.capacity is INF]
        if infinite:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER,
                "Routing requires finite link capacities.", links=infinite
            )
        self.network = network
        self._capacity = network.capacities
        self._buffer = network.buffers
        self._lambda = network.origin_inflows

    @abstractmethod
    def link_split(self, e: int, rho: np.ndarray) -> np.ndarray:
        """Flows from link ``e`` to each of ``network.downstream[e]``, or ``[exit]`` for a destination link."""

    @abstractmethod
    def origin_split(self, o: int, rho: np.ndarray) -> np.ndarray:
        """Flows of the o-th origin's inflow onto each of its outgoing links."""

    @abstractmethod
    def rebind(self, network: Network) -> "RoutingPolicy":
        """The same policy on another network of identical topology (a perturbation)."""

    @abstractmethod
    def to_spec(self) -> Dict[str, Any]:
        """Scenario file representation, see :func:`build_policy`."""

    def clip(self, rho: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(rho, dtype=float), 0.0, self._buffer)

    def check_domain(self, rho: np.ndarray) -> None:
        """Raise ``FLOW_DOMAIN_ERROR`` when some link has its whole local density vector at the buffers."""
        net = self.network
        if not net.finite_buffers.any():
            return
        saturated = rho >= self._buffer
        if not saturated.any():
            return
        free_downstream = net.adjacency @ (~saturated)
        bad = saturated & ~net.terminal & (free_downstream == 0)
        if bad.any():
            link = net.links[int(np.argmax(bad))].id
            raise FlowNetworkException(
                FlowNetworkException.FLOW_DOMAIN_ERROR,
                f"Link {link} and all its downstream links are at their buffers.", link=link
            )
        if len(net.origins):
            free_out = net.origin_adjacency @ (~saturated)
            if (free_out == 0).any():
                node = net.origins[int(np.argmax(free_out == 0))]
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_DOMAIN_ERROR,
                    f"All links leaving origin {node} are at their buffers.", link=origin_link_id(node)
                )

    def flows(self, rho: np.ndarray) -> LinkFlows:
        net = self.network
        rho = self.clip(rho)
        self.check_domain(rho)
        m = len(net.links)
        internal = np.zeros((m, m))
        exit_ = np.zeros(m)
        entry = np.zeros(m)
        for e in range(m):
            split = self.link_split(e, rho)
            if net.terminal[e]:
                exit_[e] = split[0]
            else:
                internal[e, list(net.downstream[e])] = split
        for o, node in enumerate(net.origins):
            entry[list(net.out_links[node])] += self.origin_split(o, rho)
        return LinkFlows(internal, exit_, entry)

    def evaluate(self, link: str, densities: Union[LocalDensity, Mapping[str, float], np.ndarray]) -> FlowSplit:
        """Evaluate the flow split of one link (or origin link ``@in:v``) at its local densities.

        Raises
        ------
        FlowNetworkException
            ``FLOW_DOMAIN_ERROR`` at the excluded point where all local densities sit at their buffers.
        """
        net = self.network
        own, down = _local_indices(net, link)
        if isinstance(densities, np.ndarray):
            rho = np.asarray(densities, dtype=float)
            local = LocalDensity.of(net, link, rho)
        else:
            if isinstance(densities, LocalDensity):
                densities = densities.densities
            rho = np.zeros(len(net.links))
            for k, value in densities.items():
                rho[net.link_index[k]] = value
            local = LocalDensity.of(net, link, rho)
        local.validate(net)
        rho = self.clip(rho)

        if own is None:
            o = net.origins.index(link[len("@in:"):])
            values = self.origin_split(o, rho)
            return FlowSplit(link, {net.links[j].id: float(v) for j, v in zip(down, values)})
        values = self.link_split(own, rho)
        if net.terminal[own]:
            return FlowSplit(link, {destination_link_id(net.links[own].head): float(values[0])})
        return FlowSplit(link, {net.links[j].id: float(v) for j, v in zip(down, values)})

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.to_spec()})"


def _potential(beta: np.ndarray, buffer: np.ndarray, rho: np.ndarray) -> np.ndarray:
    finite = np.isfinite(buffer)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(finite, beta * rho / np.where(finite, buffer - rho, 1.0), beta * rho)
    return np.where(finite & (rho >= buffer), np.inf, phi)


def _normalized(weights_exponent: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-normalized exp(-x) over ``mask`` entries, shifted for stability."""
    x = np.where(mask, weights_exponent, np.inf)
    shift = x.min(axis=-1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    w = np.where(mask, np.exp(-(x - shift)), 0.0)
    z = w.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(z > 0, w / np.where(z > 0, z, 1.0), 0.0)


class SoftmaxPolicy(RoutingPolicy):
    """Softmax routing with per-link congestion potentials.

    With phi_e(rho) = beta_e rho / (B_e - rho) (finite buffer) or beta_e rho (infinite buffer) and
    gamma_k = exp(-phi_k), a non-destination link e sends ``C_e (1 - gamma_e) gamma_j / Z`` to
    each downstream link j, where Z sums gamma over the link itself and its downstream links.
    Destination links release ``C_e (1 - gamma_e)`` and an origin splits its inflow in proportion
    to gamma_j over its outgoing links. The policy is strongly monotone.

    Parameters
    ----------
    network: Network
    beta: float or Mapping[str, float], default=1.0
        Positive potential slopes, one for all links or per link id (missing links use 1).
    """

    kind = "softmax"

    def __init__(self, network: Network, beta: Union[float, Mapping[str, float]] = 1.0) -> None:
        super().__init__(network)
        if isinstance(beta, Mapping):
            unknown = set(beta) - set(network.link_index)
            if unknown:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_BAD_PARAMETER, "Beta given for unknown links.", links=sorted(unknown)
                )
            values = np.array([as_float(parse_quantity(beta.get(e, 1.0), allow_unbounded=False, what="beta"))
                               for e in network.link_ids])
        else:
            values = np.full(len(network.links), as_float(parse_quantity(beta, allow_unbounded=False, what="beta")))
        if (values <= 0).any():
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "Beta must be positive.")
        self._beta_spec = beta
        self.beta = values
        net = network
        self._own_mask = net.adjacency | np.eye(len(net.links), dtype=bool)

    def potential(self, rho: np.ndarray) -> np.ndarray:
        return _potential(self.beta, self._buffer, rho)

    def link_split(self, e: int, rho: np.ndarray) -> np.ndarray:
        phi = self.potential(rho)
        scale = self._capacity[e] * -np.expm1(-phi[e])
        if self.network.terminal[e]:
            return np.array([scale])
        candidates = [e] + list(self.network.downstream[e])
        shares = _normalized(phi[candidates], np.ones(len(candidates), dtype=bool))
        return scale * shares[1:]

    def origin_split(self, o: int, rho: np.ndarray) -> np.ndarray:
        out = list(self.network.out_links[self.network.origins[o]])
        phi = self.potential(rho)
        return self._lambda[o] * _normalized(phi[out], np.ones(len(out), dtype=bool))

    def flows(self, rho: np.ndarray) -> LinkFlows:
        net = self.network
        rho = self.clip(rho)
        self.check_domain(rho)
        phi = self.potential(rho)
        scale = self._capacity * -np.expm1(-phi)
        shares = _normalized(np.broadcast_to(phi, self._own_mask.shape), self._own_mask)
        internal = np.where(net.adjacency, scale[:, None] * shares, 0.0)
        internal[net.terminal] = 0.0
        exit_ = np.where(net.terminal, scale, 0.0)
        if len(net.origins):
            origin_shares = _normalized(np.broadcast_to(phi, net.origin_adjacency.shape), net.origin_adjacency)
            entry = (self._lambda[:, None] * origin_shares).sum(axis=0)
        else:
            entry = np.zeros(len(net.links))
        return LinkFlows(internal, exit_, entry)

    def rebind(self, network: Network) -> "SoftmaxPolicy":
        return SoftmaxPolicy(network, self._beta_spec)

    def to_spec(self) -> Dict[str, Any]:
        beta = dict(self._beta_spec) if isinstance(self._beta_spec, Mapping) else self._beta_spec
        return {"type": self.kind, "beta": beta}


class Section2Variant(enum.Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"


MOTIVATING_TOPOLOGY = {
    "1": ("a", "b"),
    "2": ("a", "c"),
    "3": ("b", "c"),
    "4": ("b", "d"),
    "5": ("c", "d"),
}


class Section2Policy(RoutingPolicy):
    """The routing matrices of the five-link motivating network, F = M(rho) R(rho).

    M = diag(C_i phi(rho_i), lambda) with phi(rho) = 1 - exp(-rho), and R is one of

    * ``R1``: fixed, link 1 splits 1/2 - 1/2 onto links 3 and 4 and the origin 2/3 - 1/3
      onto links 1 and 2;
    * ``R2``: locally responsive splits at a (weights 2 exp(-rho_1), exp(-rho_2)) and at b
      (weights exp(-rho_3), exp(-rho_4));
    * ``R3``: R2 with the split at b scaled by the flow control term
      h = (exp(-rho_3) + exp(-rho_4)) / (exp(-rho_1) + exp(-rho_3) + exp(-rho_4)).

    Links 2, 3 feed link 5 and links 4, 5 leave the network in every variant. The matrices are
    defined for infinite buffers; on finite buffers the policy runs but warns.
    """

    kind = "section2"

    def __init__(self, variant: Union[str, Section2Variant], network: Network) -> None:
        super().__init__(network)
        try:
            self.variant = Section2Variant(variant.value if isinstance(variant, Section2Variant) else str(variant).upper())
        except ValueError:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown routing matrix variant {variant}."
            ) from None
        self._check_topology(network)
        if network.finite_buffers.any():
            warnings.warn(
                "The motivating routing matrices are defined for infinite buffers; buffer axioms will not hold.",
                FlowNetworkWarning,
            )
            logger.warning("section2 policy %s used with finite buffers", self.variant.value)
        self._i = {k: network.link_index[k] for k in MOTIVATING_TOPOLOGY}

    @staticmethod
    def _check_topology(network: Network) -> None:
        if set(network.nodes) != {"a", "b", "c", "d"} or len(network.links) != 5:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR,
                "The motivating routing matrices need the five-link network on nodes a, b, c, d."
            )
        for link_id, (tail, head) in MOTIVATING_TOPOLOGY.items():
            link = network.link_index.get(link_id)
            if link is None or (network.links[link].tail, network.links[link].head) != (tail, head):
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR,
                    f"Link {link_id} must go from {tail} to {head}.", link=link_id
                )
        if network.origins != ("a",):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR, "The motivating network has its only origin at a."
            )

    def matrix(self, rho: np.ndarray) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """The responsive entries ((R_13, R_14), (R_61, R_62)) at ``rho``."""
        r1, r2, r3, r4 = (rho[self._i[k]] for k in ("1", "2", "3", "4"))
        if self.variant is Section2Variant.R1:
            return (0.5, 0.5), (2.0 / 3.0, 1.0 / 3.0)
        # exp(-x) weights, shifted by the smallest exponent
        shift = min(r1, r2, r3, r4)
        e1, e2, e3, e4 = (np.exp(-(x - shift)) for x in (r1, r2, r3, r4))
        origin = (2 * e1 / (2 * e1 + e2), e2 / (2 * e1 + e2))
        if self.variant is Section2Variant.R2:
            return (e3 / (e3 + e4), e4 / (e3 + e4)), origin
        total = e1 + e3 + e4
        return (e3 / total, e4 / total), origin

    def link_split(self, e: int, rho: np.ndarray) -> np.ndarray:
        outflow = self._capacity[e] * -np.expm1(-rho[e])
        if e == self._i["1"]:
            (r13, r14), _ = self.matrix(rho)
            down = self.network.downstream[e]
            values = {self._i["3"]: r13, self._i["4"]: r14}
            return np.array([outflow * values[j] for j in down])
        return np.array([outflow])

    def origin_split(self, o: int, rho: np.ndarray) -> np.ndarray:
        _, (r61, r62) = self.matrix(rho)
        values = {self._i["1"]: r61, self._i["2"]: r62}
        return np.array([self._lambda[o] * values[j] for j in self.network.out_links["a"]])

    def flows(self, rho: np.ndarray) -> LinkFlows:
        rho = self.clip(rho)
        self.check_domain(rho)
        i = self._i
        m = len(self.network.links)
        outflow = self._capacity * -np.expm1(-rho)
        (r13, r14), (r61, r62) = self.matrix(rho)
        internal = np.zeros((m, m))
        internal[i["1"], i["3"]] = outflow[i["1"]] * r13
        internal[i["1"], i["4"]] = outflow[i["1"]] * r14
        internal[i["2"], i["5"]] = outflow[i["2"]]
        internal[i["3"], i["5"]] = outflow[i["3"]]
        exit_ = np.zeros(m)
        exit_[i["4"]] = outflow[i["4"]]
        exit_[i["5"]] = outflow[i["5"]]
        entry = np.zeros(m)
        entry[i["1"]] = self._lambda[0] * r61
        entry[i["2"]] = self._lambda[0] * r62
        return LinkFlows(internal, exit_, entry)

    def rebind(self, network: Network) -> "Section2Policy":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FlowNetworkWarning)
            return Section2Policy(self.variant, network)

    def to_spec(self) -> Dict[str, Any]:
        return {"type": self.kind, "variant": self.variant.value}


def softmax_policy(network: Network, beta: Union[float, Mapping[str, float]] = 1.0) -> SoftmaxPolicy:
    return SoftmaxPolicy(network, beta)


def section2_policy(variant: Union[str, Section2Variant], network: Network) -> Section2Policy:
    return Section2Policy(variant, network)


PolicyFactory = Callable[[Mapping[str, Any], Network], RoutingPolicy]

_policy_factories: Dict[str, PolicyFactory] = {
    "softmax": lambda spec, network: SoftmaxPolicy(network, spec.get("beta", 1.0)),
    "section2": lambda spec, network: Section2Policy(spec.get("variant", "R3"), network),
}


def register_policy(kind: str, factory: PolicyFactory) -> None:
    """Make a custom policy available to :func:`build_policy` under ``{"type": kind}``."""
    _policy_factories[kind] = factory


def build_policy(spec: Mapping[str, Any], network: Network) -> RoutingPolicy:
    """Instantiate a policy from its scenario representation.

    Examples
    --------
    >>> build_policy({"type": "softmax", "beta": 1.0}, net)
    >>> build_policy({"type": "section2", "variant": "R3"}, net)
    """
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "Policy needs a 'type' field.")
    factory = _policy_factories.get(spec["type"])
    if factory is None:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PARSE_ERROR, f"Unknown policy type {spec['type']!r}.",
            known=sorted(_policy_factories)
        )
    return factory(spec, network)


# Property checks

AXIOMS = ("origin", "empty_link", "congested_self", "congested_downstream", "capacity_feasibility")


@dataclass
class AxiomResult:
    axiom: str
    max_violation: float = 0.0
    worst_link: Optional[str] = None
    evaluations: int = 0
    passed: bool = True

    def record(self, violation: float, link: str) -> None:
        self.evaluations += 1
        if violation > self.max_violation:
            self.max_violation = float(violation)
            self.worst_link = link


@dataclass
class AxiomReport:
    results: Dict[str, AxiomResult]
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    @property
    def failed(self) -> List[str]:
        return [name for name, r in self.results.items() if not r.passed]

    def asdict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "samples": self.samples,
            "axioms": {
                name: {"passed": r.passed, "max_violation": r.max_violation, "worst_link": r.worst_link,
                       "evaluations": r.evaluations}
                for name, r in self.results.items()
            },
        }


def sample_interior(network: Network, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Random densities inside the domain: [0.05, 0.8] B_e for finite buffers, [0.05, 1] x 5 otherwise."""
    shape = (len(network.links),) if size is None else (size, len(network.links))
    u = rng.uniform(0.0, 1.0, size=shape)
    finite = network.finite_buffers
    span = np.where(finite, np.where(finite, network.buffers, 1.0), 5.0)
    low = 0.05
    high = np.where(finite, 0.8, 1.0)
    return (low + (high - low) * u) * span


def _moved(rho: np.ndarray, k: int, value: float) -> np.ndarray:
    moved = rho.copy()
    moved[k] = value
    return moved


def check_axioms(
    policy: RoutingPolicy,
    network: Optional[Network] = None,
    n_samples: int = 200,
    tol: float = 1e-9,
    *,
    seed: int = 0,
    large_density: float = 50.0,
    limit_tolerance: float = 1e-3,
) -> AxiomReport:
    """Evaluate the boundary axioms of a distributed routing policy at sampled points.

    For each sample and each link the link's own density (or one downstream density) is moved
    to the boundary and the resulting flow is compared with what the axiom prescribes. On
    infinite buffers the boundary is the large density ``large_density`` and the axioms take
    their limit form with slack ``limit_tolerance * C_e``.

    Parameters
    ----------
    policy: RoutingPolicy
    network: Network, optional
        Defaults to the policy's network.
    n_samples: int, default=200
    tol: float, default=1e-9
        An axiom passes when its largest violation is at most ``tol``.
    seed: int, default=0

    Returns
    -------
    AxiomReport
        Largest violation per axiom; violations are data, never exceptions.
    """
    if n_samples <= 0:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "n_samples must be positive.")
    net = network or policy.network
    rng = np.random.default_rng(seed)
    results = {name: AxiomResult(name) for name in AXIOMS}
    capacity = net.capacities
    buffers = net.buffers
    finite = net.finite_buffers
    boundary = np.where(finite, np.where(finite, buffers, 0.0), large_density)

    def evaluate(rho_at: np.ndarray) -> Optional[LinkFlows]:
        try:
            flows = policy.flows(rho_at)
        except FlowNetworkException as e:
            if e.code != FlowNetworkException.FLOW_DOMAIN_ERROR:
                raise
            return None
        feasibility(flows)
        return flows

    def feasibility(flows: LinkFlows) -> None:
        negative = max(-flows.internal.min(initial=0.0), -flows.exit.min(initial=0.0), -flows.entry.min(initial=0.0))
        excess = flows.outflow - capacity
        e = int(np.argmax(excess))
        results["capacity_feasibility"].record(max(negative, excess[e], 0.0), net.links[e].id)

    for _ in range(n_samples):
        rho = sample_interior(net, rng)
        flows = policy.flows(rho)
        feasibility(flows)
        for o, node in enumerate(net.origins):
            sent = flows.entry[list(net.out_links[node])].sum()
            results["origin"].record(abs(sent - net.origin_inflows[o]), origin_link_id(node))

        for e, link in enumerate(net.links):
            at_zero = evaluate(_moved(rho, e, 0.0))
            if at_zero is not None:
                results["empty_link"].record(at_zero.outflow[e], link.id)

            congested = evaluate(_moved(rho, e, boundary[e]))
            if congested is not None:
                if finite[e]:
                    violation = abs(capacity[e] - congested.outflow[e])
                else:
                    violation = max(0.0, (1.0 - limit_tolerance) * capacity[e] - congested.outflow[e])
                results["congested_self"].record(violation, link.id)

            for k in net.downstream[e]:
                blocked = evaluate(_moved(rho, k, boundary[k]))
                if blocked is None:
                    continue
                if finite[k]:
                    violation = blocked.internal[e, k]
                else:
                    violation = max(0.0, blocked.internal[e, k] - limit_tolerance * capacity[e])
                results["congested_downstream"].record(violation, link.id)

        for o, node in enumerate(net.origins):
            if len(net.out_links[node]) == 1:
                # blocking the only out-link leaves the origin's inflow nowhere to go
                continue
            for k in net.out_links[node]:
                blocked = evaluate(_moved(rho, k, boundary[k]))
                if blocked is None:
                    continue
                if finite[k]:
                    violation = blocked.entry[k]
                else:
                    violation = max(0.0, blocked.entry[k] - limit_tolerance * net.origin_inflows[o])
                results["congested_downstream"].record(violation, origin_link_id(node))

    for result in results.values():
        result.passed = result.max_violation <= tol
        if not result.passed:
            logger.info("axiom %s violated by %.3g at link %s", result.axiom, result.max_violation, result.worst_link)
    return AxiomReport(results, tol, n_samples)


class MonotonicityGrade(enum.Enum):
    NOT_MONOTONE = "not monotone"
    MONOTONE = "monotone"
    STRONGLY_MONOTONE = "strongly monotone (sampled)"


@dataclass(frozen=True)
class MonotonicityViolation:
    """A partial derivative with the wrong sign.

    ``kind`` is ``"flow"`` for d f_{e->j} / d rho_k < 0 and ``"outflow"`` for d f_e^out / d rho_k > 0.
    """

    kind: str
    link: str
    target: Optional[str]
    wrt: str
    value: float
    sample: int


@dataclass
class MonotonicityReport:
    grade: MonotonicityGrade
    violations: List[MonotonicityViolation] = field(default_factory=list)
    strict_margin: float = np.inf
    lipschitz_estimate: float = 0.0
    samples: int = 0
    fd_step: float = 0.0
    tol: float = 0.0

    @property
    def monotone(self) -> bool:
        return self.grade is not MonotonicityGrade.NOT_MONOTONE

    @property
    def strongly_monotone(self) -> bool:
        return self.grade is MonotonicityGrade.STRONGLY_MONOTONE

    def asdict(self) -> Dict[str, Any]:
        return {
            "grade": self.grade.value,
            "violations": [v.__dict__ for v in self.violations[:50]],
            "violation_count": len(self.violations),
            "strict_margin": float(self.strict_margin) if np.isfinite(self.strict_margin) else None,
            "lipschitz_estimate": self.lipschitz_estimate,
            "samples": self.samples,
            "fd_step": self.fd_step,
            "tol": self.tol,
        }


def default_fd_step(network: Network) -> float:
    finite = network.buffers[network.finite_buffers]
    return 1e-5 * min(float(finite.min()) if finite.size else 1.0, 1.0)


def check_monotonicity(
    policy: RoutingPolicy,
    network: Optional[Network] = None,
    n_samples: int = 100,
    fd_step: Optional[float] = None,
    tol: float = 1e-8,
    *,
    seed: int = 0,
) -> MonotonicityReport:
    """Estimate every partial derivative constrained by monotonicity with central differences.

    A policy is monotone when each flow f_{e->j} is non-decreasing in every other local density
    rho_k (k != j) and each outflow f_e^out is non-increasing in the downstream densities.
    Strongly monotone (sampled) means every such partial was strictly signed beyond ``tol`` at
    every sample; it is an evidence grade, not a proof. The outflow of an origin link is
    constant by construction and is exempt from the strict requirement.
    """
    net = network or policy.network
    h = default_fd_step(net) if fd_step is None else fd_step
    if h <= 0:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "fd_step must be positive.")
    rng = np.random.default_rng(seed)
    m = len(net.links)
    ids = net.link_ids
    violations: List[MonotonicityViolation] = []
    margin = np.inf
    lipschitz = 0.0

    for s in range(n_samples):
        rho = sample_interior(net, rng)
        for k in range(m):
            up, down = rho.copy(), rho.copy()
            up[k] += h
            down[k] -= h
            fu, fd = policy.flows(up), policy.flows(down)
            d_internal = (fu.internal - fd.internal) / (2 * h)
            d_exit = (fu.exit - fd.exit) / (2 * h)
            d_entry = (fu.entry - fd.entry) / (2 * h)
            lipschitz = max(lipschitz, float(np.abs(d_internal).max(initial=0.0)),
                            float(np.abs(d_exit).max(initial=0.0)), float(np.abs(d_entry).max(initial=0.0)))

            for e in range(m):
                if e != k and not net.adjacency[e, k]:
                    continue
                if net.terminal[e]:
                    if e == k:
                        value = d_exit[e]
                        margin = min(margin, value)
                        if value < -tol:
                            violations.append(MonotonicityViolation(
                                "flow", ids[e], destination_link_id(net.links[e].head), ids[k], float(value), s))
                    continue
                for j in net.downstream[e]:
                    if j == k:
                        continue
                    value = d_internal[e, j]
                    margin = min(margin, value)
                    if value < -tol:
                        violations.append(MonotonicityViolation("flow", ids[e], ids[j], ids[k], float(value), s))
                if k != e:
                    value = d_internal[e].sum() + d_exit[e]
                    margin = min(margin, -value)
                    if value > tol:
                        violations.append(MonotonicityViolation("outflow", ids[e], None, ids[k], float(value), s))

            for node in net.origins:
                out = net.out_links[node]
                if k not in out:
                    continue
                for j in out:
                    if j == k:
                        continue
                    value = d_entry[j]
                    margin = min(margin, value)
                    if value < -tol:
                        violations.append(MonotonicityViolation(
                            "flow", origin_link_id(node), ids[j], ids[k], float(value), s))

    if violations:
        grade = MonotonicityGrade.NOT_MONOTONE
    elif margin > tol:
        grade = MonotonicityGrade.STRONGLY_MONOTONE
    else:
        grade = MonotonicityGrade.MONOTONE
    logger.info("monotonicity grade %s (margin %.3g, %d violations)", grade.value, margin, len(violations))
    return MonotonicityReport(grade, violations, margin, lipschitz, n_samples, h, tol)
