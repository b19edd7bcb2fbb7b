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
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .core import FlowNetworkException
from .util import INF, Quantity, as_float, format_quantity, parse_quantity


logger = logging.getLogger(__name__)

WORLD_NODE = "@world"


def origin_link_id(node: str) -> str:
    return f"@in:{node}"


def destination_link_id(node: str) -> str:
    return f"@out:{node}"


@dataclass(frozen=True)
class Link:
    """A directed link ``tail -> head`` with flow capacity and buffer capacity.

    Attributes
    ----------
    id: str
        Opaque link identifier, unique within a network. Parallel links differ by id only.
    tail: str
    head: str
    capacity: Quantity
        Maximum outflow C_e, a non-negative number or :data:`monoflow.util.INF`.
    buffer: Quantity
        Maximum density B_e, a positive number or :data:`monoflow.util.INF`.
    """

    id: str
    tail: str
    head: str
    capacity: Quantity = INF
    buffer: Quantity = INF

    def asdict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "tail": self.tail,
            "head": self.head,
            "capacity": format_quantity(self.capacity),
            "buffer": format_quantity(self.buffer),
        }

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "Link":
        try:
            return cls(
                id=str(data["id"]),
                tail=str(data["tail"]),
                head=str(data["head"]),
                capacity=parse_quantity(data.get("capacity", "inf"), what=f"capacity of link {data['id']}"),
                buffer=parse_quantity(data.get("buffer", "inf"), what=f"buffer of link {data['id']}"),
            )
        except KeyError as e:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_PARSE_ERROR, f"Link entry is missing the {e.args[0]!r} field.", entry=dict(data)
            ) from None


@dataclass(frozen=True)
class Network:
    """A single-commodity flow network G = (V, E, C) with buffers and external inflows.

    The destination set D is derived: nodes without outgoing links. The network is
    immutable; perturbations produce new values via :meth:`with_capacities`.

    Construction only checks referential integrity (known node ids, unique link ids).
    Model invariants are reported by :func:`validate`.

    Examples
    --------
    >>> net = Network(
    ...     nodes=("o", "d"),
    ...     links=(Link("1", "o", "d", capacity=2),),
    ...     inflows={"o": 1},
    ... )
    >>> net.destinations
    ('d',)
    """

    nodes: Tuple[str, ...]
    links: Tuple[Link, ...]
    inflows: Mapping[str, Quantity] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(str(n) for n in self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(
            self, "inflows", {str(k): parse_quantity(v, allow_unbounded=False, what=f"inflow at {k}")
                              for k, v in dict(self.inflows).items()}
        )

        if len(set(self.nodes)) != len(self.nodes):
            raise FlowNetworkException(FlowNetworkException.FLOW_VALIDATION_ERROR, "Duplicate node identifiers.")
        known = set(self.nodes)
        if WORLD_NODE in known:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR, f"Node id {WORLD_NODE} is reserved.", node=WORLD_NODE
            )
        seen = set()
        for link in self.links:
            if link.id in seen:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR, f"Duplicate link id {link.id}.", link=link.id
                )
            seen.add(link.id)
            for end in (link.tail, link.head):
                if end not in known:
                    raise FlowNetworkException(
                        FlowNetworkException.FLOW_VALIDATION_ERROR,
                        f"Link {link.id} references unknown node {end}.", link=link.id, node=end
                    )
        for node in self.inflows:
            if node not in known:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR, f"Inflow given for unknown node {node}.", node=node
                )

    # Index structures, built lazily and shared; the network is immutable.

    @cached_property
    def link_index(self) -> Dict[str, int]:
        return {link.id: i for i, link in enumerate(self.links)}

    @cached_property
    def node_index(self) -> Dict[str, int]:
        return {node: i for i, node in enumerate(self.nodes)}

    @cached_property
    def link_ids(self) -> Tuple[str, ...]:
        return tuple(link.id for link in self.links)

    @cached_property
    def out_links(self) -> Dict[str, Tuple[int, ...]]:
        out: Dict[str, List[int]] = {n: [] for n in self.nodes}
        for i, link in enumerate(self.links):
            out[link.tail].append(i)
        return {n: tuple(v) for n, v in out.items()}

    @cached_property
    def in_links(self) -> Dict[str, Tuple[int, ...]]:
        inc: Dict[str, List[int]] = {n: [] for n in self.nodes}
        for i, link in enumerate(self.links):
            inc[link.head].append(i)
        return {n: tuple(v) for n, v in inc.items()}

    @cached_property
    def destinations(self) -> Tuple[str, ...]:
        return tuple(n for n in self.nodes if not self.out_links[n])

    @cached_property
    def non_destinations(self) -> Tuple[str, ...]:
        dest = set(self.destinations)
        return tuple(n for n in self.nodes if n not in dest)

    @cached_property
    def origins(self) -> Tuple[str, ...]:
        return tuple(n for n in self.nodes if self.inflows.get(n, 0) > 0)

    @cached_property
    def downstream(self) -> Tuple[Tuple[int, ...], ...]:
        """For each link e the indices of E_e^+ (links leaving the head of e)."""
        return tuple(self.out_links[link.head] for link in self.links)

    @cached_property
    def terminal(self) -> np.ndarray:
        """Mask of destination links (links entering a destination)."""
        dest = set(self.destinations)
        return np.array([link.head in dest for link in self.links], dtype=bool)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Link-to-link adjacency: ``adjacency[e, j]`` is True when j is downstream of e."""
        adj = np.zeros((len(self.links), len(self.links)), dtype=bool)
        for e, down in enumerate(self.downstream):
            adj[e, list(down)] = True
        return adj

    @cached_property
    def origin_adjacency(self) -> np.ndarray:
        """``origin_adjacency[o, j]`` is True when link j leaves the o-th origin."""
        adj = np.zeros((len(self.origins), len(self.links)), dtype=bool)
        for o, node in enumerate(self.origins):
            adj[o, list(self.out_links[node])] = True
        return adj

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([as_float(link.capacity) for link in self.links], dtype=float)

    @cached_property
    def buffers(self) -> np.ndarray:
        return np.array([as_float(link.buffer) for link in self.links], dtype=float)

    @cached_property
    def finite_buffers(self) -> np.ndarray:
        return np.isfinite(self.buffers)

    @cached_property
    def origin_inflows(self) -> np.ndarray:
        return np.array([as_float(self.inflows[n]) for n in self.origins], dtype=float)

    @property
    def total_inflow(self) -> Quantity:
        return sum(self.inflows.values(), Fraction(0))

    def link(self, link_id: str) -> Link:
        try:
            return self.links[self.link_index[link_id]]
        except KeyError:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown link {link_id}.", link=link_id
            ) from None

    def with_capacities(self, capacities: Mapping[str, Quantity]) -> "Network":
        """Return the perturbed network with link capacities replaced by ``capacities``.

        Raises
        ------
        FlowNetworkException
            ``FLOW_VALIDATION_ERROR`` for unknown links or when a new capacity is outside [0, C_e].
        """
        new_links = list(self.links)
        for link_id, value in capacities.items():
            if link_id not in self.link_index:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR, f"Perturbation of unknown link {link_id}.", link=link_id
                )
            value = parse_quantity(value, what=f"capacity of link {link_id}")
            index = self.link_index[link_id]
            nominal = self.links[index].capacity
            if value > nominal:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR,
                    f"Perturbed capacity of link {link_id} exceeds its nominal capacity.", link=link_id
                )
            new_links[index] = replace(self.links[index], capacity=value)
        return replace(self, links=tuple(new_links))

    def with_buffers(self, buffers: Mapping[str, Quantity]) -> "Network":
        new_links = list(self.links)
        for link_id, value in buffers.items():
            index = self.link_index.get(link_id)
            if index is None:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_VALIDATION_ERROR, f"Buffer given for unknown link {link_id}.", link=link_id
                )
            new_links[index] = replace(self.links[index], buffer=parse_quantity(value, what=f"buffer of {link_id}"))
        return replace(self, links=tuple(new_links))

    def with_inflows(self, inflows: Mapping[str, Quantity]) -> "Network":
        return replace(self, inflows=dict(inflows))

    def asdict(self) -> Dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "links": [link.asdict() for link in self.links],
            "inflows": {k: format_quantity(v) for k, v in self.inflows.items()},
        }

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "Network":
        if not isinstance(data, Mapping) or "links" not in data:
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "Network needs a 'links' list.")
        links = tuple(Link.fromdict(entry) for entry in data["links"])
        nodes = data.get("nodes")
        if nodes is None:
            nodes = list(dict.fromkeys(n for link in links for n in (link.tail, link.head)))
        inflows = data.get("inflows", {})
        if not isinstance(inflows, Mapping):
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, "Inflows must be a map node -> value.")
        return cls(nodes=tuple(nodes), links=links, inflows=dict(inflows))


@dataclass(frozen=True)
class AugmentedNetwork:
    """The network G^a: ``base`` plus a world node feeding origins and absorbing destinations.

    Origin links ``@in:v`` and destination links ``@out:d`` carry unbounded capacity and buffer.
    """

    base: Network
    world_node: str
    origin_links: Tuple[Link, ...]
    destination_links: Tuple[Link, ...]

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self.base.nodes + (self.world_node,)

    @property
    def links(self) -> Tuple[Link, ...]:
        return self.base.links + self.origin_links + self.destination_links


@dataclass(frozen=True)
class Cut:
    """A cut: a non-empty set of non-destination nodes."""

    nodes: FrozenSet[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        if not self.nodes:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "A cut must be non-empty.")

    @classmethod
    def of(cls, *nodes: str) -> "Cut":
        return cls(frozenset(nodes))

    def sorted(self, network: Optional[Network] = None) -> List[str]:
        if network is None:
            return sorted(self.nodes)
        return [n for n in network.nodes if n in self.nodes]

    def __or__(self, other: "Cut") -> "Cut":
        return Cut(self.nodes | other.nodes)

    def __repr__(self) -> str:
        return "Cut{" + ", ".join(sorted(self.nodes)) + "}"


class CutSets(NamedTuple):
    """Link sets of a cut U, as link ids.

    ``out_links`` is E_U^+, ``in_links`` E_U^-, ``boundary_out`` the leaving links
    and ``boundary_in`` the entering links of U.
    """

    out_links: FrozenSet[str]
    in_links: FrozenSet[str]
    boundary_out: FrozenSet[str]
    boundary_in: FrozenSet[str]


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    message: str
    subject: Optional[str] = None


@dataclass
class ValidationReport:
    issues: List[ValidationIssue] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.issues

    @property
    def kinds(self) -> FrozenSet[str]:
        return frozenset(issue.kind for issue in self.issues)

    def raise_if_invalid(self) -> None:
        if self.issues:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_VALIDATION_ERROR,
                "; ".join(issue.message for issue in self.issues),
                issues=[{"kind": i.kind, "subject": i.subject} for i in self.issues],
            )

    def asdict(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "issues": [{"kind": i.kind, "message": i.message, "subject": i.subject} for i in self.issues],
        }


def _augmented_digraph(network: Network) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(network.nodes)
    graph.add_node(WORLD_NODE)
    graph.add_edges_from((link.tail, link.head) for link in network.links)
    graph.add_edges_from((WORLD_NODE, v) for v in network.origins)
    graph.add_edges_from((d, WORLD_NODE) for d in network.destinations)
    return graph


def validate(network: Network, *, allow_zero_capacity: bool = False) -> ValidationReport:
    """Check the model invariants of ``network``.

    Parameters
    ----------
    network: Network
    allow_zero_capacity: bool, default=False
        Accept links with zero capacity. Perturbed networks (C~ <= C) legitimately contain
        them; nominal networks do not.

    Returns
    -------
    ValidationReport
        One entry per violated invariant; an empty report means the network is valid.
    """
    report = ValidationReport()
    add = report.issues.append

    for link in network.links:
        if link.tail == link.head:
            add(ValidationIssue("self_loop", f"Link {link.id} is a self-loop at {link.tail}.", link.id))
        if link.capacity is not INF and (link.capacity < 0 or (link.capacity == 0 and not allow_zero_capacity)):
            add(ValidationIssue("non_positive_capacity", f"Link {link.id} has capacity {link.capacity}.", link.id))
        if link.buffer is not INF and link.buffer <= 0:
            add(ValidationIssue("non_positive_buffer", f"Link {link.id} has buffer {link.buffer}.", link.id))

    if not network.destinations:
        add(ValidationIssue("empty_destinations", "Every node has outgoing links, there is no destination."))

    destinations = set(network.destinations)
    for node, value in network.inflows.items():
        if node in destinations and value != 0:
            add(ValidationIssue("inflow_on_destination", f"Destination {node} has an external inflow.", node))

    if network.destinations and not nx.is_strongly_connected(_augmented_digraph(network)):
        add(ValidationIssue(
            "not_strongly_connected",
            "The augmented network is not strongly connected: some node is unreachable from the "
            "origins or cannot reach a destination.",
        ))

    for issue in report.issues:
        logger.debug("validation issue %s: %s", issue.kind, issue.message)
    return report


def augment(network: Network, *, allow_zero_capacity: bool = False) -> AugmentedNetwork:
    """Build G^a by adding the world node, one origin link per origin and one destination link per destination.

    Raises
    ------
    FlowNetworkException
        ``FLOW_VALIDATION_ERROR`` when the network is invalid (this includes a network without
        any positive inflow) and ``FLOW_BAD_PARAMETER`` when given an augmented network.
    """
    if isinstance(network, AugmentedNetwork):
        raise FlowNetworkException(
            FlowNetworkException.FLOW_BAD_PARAMETER, "Network is already augmented.", node=network.world_node
        )
    validate(network, allow_zero_capacity=allow_zero_capacity).raise_if_invalid()
    return AugmentedNetwork(
        base=network,
        world_node=WORLD_NODE,
        origin_links=tuple(Link(origin_link_id(v), WORLD_NODE, v) for v in network.origins),
        destination_links=tuple(Link(destination_link_id(d), d, WORLD_NODE) for d in network.destinations),
    )


def _check_cut(network: Network, cut: Cut) -> None:
    for node in cut.nodes:
        if node not in network.node_index:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"Cut contains unknown node {node}.", node=node)
        if not network.out_links[node]:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Cut contains destination node {node}.", node=node
            )


def cut_sets(network: Network, cut: Cut) -> CutSets:
    """The four link sets of ``cut``.

    Examples
    --------
    On the motivating network (links 1=a->b, 2=a->c, 3=b->c, 4=b->d, 5=c->d):

    >>> cut_sets(net, Cut.of("a", "b")).boundary_out
    frozenset({'2', '3', '4'})
    """
    _check_cut(network, cut)
    inside = cut.nodes
    out_links = frozenset(link.id for link in network.links if link.tail in inside)
    in_links = frozenset(link.id for link in network.links if link.head in inside)
    boundary_out = frozenset(link.id for link in network.links if link.tail in inside and link.head not in inside)
    boundary_in = frozenset(link.id for link in network.links if link.tail not in inside and link.head in inside)
    return CutSets(out_links, in_links, boundary_out, boundary_in)


def cut_capacity(network: Network, cut: Cut) -> Quantity:
    """C_U, the total capacity of the links leaving the cut; unbounded if any of them is."""
    sets = cut_sets(network, cut)
    return sum((network.link(e).capacity for e in sorted(sets.boundary_out)), Fraction(0))


def cut_inflow(network: Network, cut: Cut) -> Quantity:
    """lambda_U, the total external inflow into the cut."""
    _check_cut(network, cut)
    return sum((network.inflows.get(v, Fraction(0)) for v in sorted(cut.nodes)), Fraction(0))


def split_nodes(
    network: Network,
    node_capacity: Mapping[str, Quantity],
    node_buffer: Optional[Mapping[str, Quantity]] = None,
) -> Network:
    """Model store-and-forward nodes with finite throughput by splitting them.

    Each listed non-destination node ``v`` becomes ``v:in -> v:out`` joined by a link ``v``
    (capacity ``node_capacity[v]``, buffer ``node_buffer.get(v, inf)``). Incoming links and
    the external inflow attach to ``v:in``, outgoing links leave from ``v:out``.
    """
    node_buffer = node_buffer or {}
    destinations = set(network.destinations)
    for v in node_capacity:
        if v not in network.node_index:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown node {v}.", node=v)
        if v in destinations:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Destination {v} cannot be split.", node=v
            )
        if v in network.link_index:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Node {v} clashes with a link id.", node=v
            )

    def entry(v: str) -> str:
        return f"{v}:in" if v in node_capacity else v

    def exit_(v: str) -> str:
        return f"{v}:out" if v in node_capacity else v

    nodes: List[str] = []
    for v in network.nodes:
        nodes.extend([entry(v), exit_(v)] if v in node_capacity else [v])
    links = [replace(link, tail=exit_(link.tail), head=entry(link.head)) for link in network.links]
    for v, capacity in node_capacity.items():
        links.append(Link(v, entry(v), exit_(v), capacity=parse_quantity(capacity),
                          buffer=parse_quantity(node_buffer.get(v, "inf"))))
    inflows = {entry(v): value for v, value in network.inflows.items()}
    return Network(nodes=tuple(nodes), links=tuple(links), inflows=inflows)


def link_ids_of(network: Network, indices: Iterable[int]) -> List[str]:
    return [network.links[i].id for i in indices]


def indices_of(network: Network, link_ids: Sequence[str]) -> List[int]:
    try:
        return [network.link_index[e] for e in link_ids]
    except KeyError as e:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown link {e.args[0]}.", link=e.args[0]
        ) from None
