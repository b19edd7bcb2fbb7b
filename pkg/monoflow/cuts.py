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
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Tuple, Union

import networkx as nx
import numpy as np
from networkx.algorithms.flow import shortest_augmenting_path

from .core import FlowNetworkException
from .graph import Cut, Network, cut_sets
from .util import INF, Quantity, all_rational, common_denominator, json_number, scale_to_integers


logger = logging.getLogger(__name__)

_SOURCE = ("@", "source")
_SINK = ("@", "sink")
_CHUNK = 1 << 15

CutValue = Union[Fraction, float]


def _tolerance(best: float) -> float:
    return 1e-9 * (1.0 + abs(best))


@dataclass(frozen=True)
class CutRecord:
    cut: Cut
    inflow: Quantity
    capacity: Quantity
    value: CutValue

    def asdict(self) -> Dict[str, Any]:
        return {
            "cut": sorted(self.cut.nodes),
            "inflow": json_number(self.inflow),
            "capacity": json_number(self.capacity),
            "value": json_number(self.value),
        }


@dataclass(frozen=True)
class CutReport:
    """Outcome of a cut violation search.

    Attributes
    ----------
    best_value: Fraction or float
        max over non-empty cuts U of lambda_U - C_U; ``-inf`` when every cut has an unbounded link leaving it.
    maximizers: tuple of Cut
        The cuts attaining ``best_value``; complete unless ``partial``.
    u_star: Cut
        Union of the maximizers.
    exact: bool
        True when the search ran in rational arithmetic.
    partial: bool
        True when only one maximizer is known (max-flow path).
    records: tuple of CutRecord, optional
        Every cut with its inflow and capacity, on request.
    """

    best_value: CutValue
    maximizers: Tuple[Cut, ...]
    u_star: Cut
    exact: bool
    partial: bool = False
    records: Optional[Tuple[CutRecord, ...]] = None

    @property
    def violated(self) -> bool:
        return self.best_value > 0

    def asdict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "best_value": json_number(self.best_value),
            "maximizers": [sorted(c.nodes) for c in self.maximizers],
            "u_star": sorted(self.u_star.nodes) if not self.partial else None,
            "maximizer": sorted(self.maximizers[0].nodes),
            "exact": self.exact,
            "partial": self.partial,
        }
        if self.records is not None:
            data["records"] = [r.asdict() for r in self.records]
        return data


class _Encoded(NamedTuple):
    nodes: Tuple[str, ...]
    tail: np.ndarray
    head: np.ndarray
    capacity: np.ndarray
    unbounded: np.ndarray
    inflow: np.ndarray
    denominator: Optional[int]


def _encode(network: Network) -> _Encoded:
    nodes = network.non_destinations
    pos = {v: i for i, v in enumerate(nodes)}
    tail = np.array([pos[link.tail] for link in network.links], dtype=np.int64)
    head = np.array([pos.get(link.head, -1) for link in network.links], dtype=np.int64)
    unbounded = np.array([link.capacity is INF for link in network.links], dtype=bool)
    capacities = [link.capacity for link in network.links]
    inflows = [network.inflows.get(v, Fraction(0)) for v in nodes]

    if all_rational(capacities + inflows):
        denominator = common_denominator(capacities + inflows)
        cap = [c if c is not None else 0 for c in scale_to_integers(capacities, denominator)]
        lam = scale_to_integers(inflows, denominator)
        dtype: Any = np.int64 if sum(cap) + sum(lam) < 2 ** 62 else object
        return _Encoded(nodes, tail, head, np.array(cap, dtype=dtype), unbounded, np.array(lam, dtype=dtype), denominator)
    cap_f = np.array([0.0 if c is INF else float(c) for c in capacities])
    return _Encoded(nodes, tail, head, cap_f, unbounded, np.array([float(v) for v in inflows]), None)


def _evaluate_masks(enc: _Encoded, masks: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = len(enc.nodes)
    bits = ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)
    tail_in = bits[:, enc.tail]
    head_in = np.where(enc.head >= 0, bits[:, np.maximum(enc.head, 0)], False)
    leaving = tail_in & ~head_in
    capacity = leaving.astype(enc.capacity.dtype) @ enc.capacity
    inflow = bits.astype(enc.inflow.dtype) @ enc.inflow
    unbounded = leaving[:, enc.unbounded].any(axis=1)
    return inflow, capacity, inflow - capacity, unbounded


def _best_in_chunk(enc: _Encoded, start: int, stop: int, keep_records: bool):
    masks = np.arange(start, stop, dtype=np.int64)
    inflow, capacity, value, unbounded = _evaluate_masks(enc, masks)
    finite = ~unbounded
    records = (masks, inflow, capacity, value, unbounded) if keep_records else None
    if not finite.any():
        return None, masks[:0], records
    best = value[finite].max()
    if enc.denominator is not None:
        hit = finite & (value == best)
    else:
        hit = finite & (value >= best - _tolerance(float(best)))
    return best, masks[hit], records


def _cut_of(nodes: Tuple[str, ...], mask: int) -> Cut:
    return Cut(frozenset(v for i, v in enumerate(nodes) if (mask >> i) & 1))


def _scaled(value: Any, denominator: Optional[int]) -> CutValue:
    if denominator is None:
        return float(value)
    return Fraction(int(value), denominator)


def enumerate_violations(
    network: Network,
    inflows: Optional[Mapping[str, Quantity]] = None,
    *,
    limit: int = 22,
    records: bool = False,
    workers: Optional[int] = None,
) -> CutReport:
    """Exhaustive search of max over non-empty cuts U of lambda_U - C_U.

    Subsets of the non-destination nodes are evaluated as bit masks in chunks, in parallel when
    ``workers`` allows. Integer and rational data is scaled to integers so the result is exact.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PRECONDITION_NOT_MET`` when there are more than ``limit`` non-destination nodes;
        use :func:`max_violation_maxflow` instead.
    """
    if inflows is not None:
        network = network.with_inflows(inflows)
    enc = _encode(network)
    n = len(enc.nodes)
    if n == 0:
        raise FlowNetworkException(FlowNetworkException.FLOW_PRECONDITION_NOT_MET, "The network has no cut.")
    if n > limit:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PRECONDITION_NOT_MET,
            f"{n} non-destination nodes exceed the enumeration limit {limit}.", nodes=n, limit=limit
        )
    if records and n > 16:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "Per-cut records need at most 16 nodes.")

    total = 1 << n
    bounds = [(s, min(s + _CHUNK, total)) for s in range(1, total, _CHUNK)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(lambda b: _best_in_chunk(enc, b[0], b[1], records), bounds))

    local = [c[0] for c in chunks if c[0] is not None]
    if not local:
        everything = Cut(frozenset(enc.nodes))
        logger.debug("every cut has an unbounded link leaving it")
        return CutReport(-math.inf, (everything,), everything, enc.denominator is not None, partial=True)
    best = max(local)
    masks: List[int] = []
    for chunk_best, chunk_masks, _ in chunks:
        if chunk_best is None:
            continue
        if enc.denominator is not None:
            keep = chunk_masks if chunk_best == best else chunk_masks[:0]
        else:
            chunk_values = _evaluate_masks(enc, chunk_masks)[2]
            keep = chunk_masks[chunk_values >= best - _tolerance(float(best))]
        masks.extend(int(m) for m in keep)

    maximizers = tuple(_cut_of(enc.nodes, m) for m in masks)
    union = 0
    for m in masks:
        union |= m

    all_records = None
    if records:
        rows = []
        for _, _, rec in chunks:
            for mask, lam, cap, value, unb in zip(*rec):
                capacity = INF if unb else _scaled(cap, enc.denominator)
                val = -math.inf if unb else _scaled(value, enc.denominator)
                rows.append(CutRecord(_cut_of(enc.nodes, int(mask)), _scaled(lam, enc.denominator), capacity, val))
        all_records = tuple(rows)

    best_value = _scaled(best, enc.denominator)
    logger.debug("enumerated %d cuts, best value %s with %d maximizers", total - 1, best_value, len(maximizers))
    return CutReport(best_value, maximizers, _cut_of(enc.nodes, union), enc.denominator is not None, records=all_records)


def cut_value(network: Network, cut: Cut) -> CutValue:
    """lambda_U - C_U for one cut; ``-inf`` when an unbounded link leaves it."""
    sets = cut_sets(network, cut)
    capacity = [network.link(e).capacity for e in sorted(sets.boundary_out)]
    if any(c is INF for c in capacity):
        return -math.inf
    inflow = sum((network.inflows.get(v, Fraction(0)) for v in sorted(cut.nodes)), Fraction(0))
    value = inflow - sum(capacity, Fraction(0))
    return value if isinstance(value, Fraction) else float(value)


class _FlowProblem(NamedTuple):
    graph: nx.DiGraph
    big_m: Any
    denominator: Optional[int]
    inflow_total: Any


def _flow_problem(network: Network, *, origins_unbounded: bool = False) -> _FlowProblem:
    capacities = [link.capacity for link in network.links]
    inflows = {v: network.inflows.get(v, Fraction(0)) for v in network.non_destinations}
    exact = all_rational(capacities + list(inflows.values()))
    if exact:
        denominator: Optional[int] = common_denominator(capacities + list(inflows.values()))
        cap = scale_to_integers(capacities, denominator)
        lam = dict(zip(inflows, scale_to_integers(inflows.values(), denominator)))
    else:
        denominator = None
        cap = [None if c is INF else float(c) for c in capacities]
        lam = {v: float(x) for v, x in inflows.items()}

    inflow_total = sum(lam.values())
    big_m = inflow_total + sum(c for c in cap if c is not None) + 1
    if not math.isfinite(big_m):
        raise FlowNetworkException(FlowNetworkException.FLOW_NUMERICAL_ABORT, "Capacity sum overflows.")

    graph = nx.DiGraph()
    graph.add_node(_SOURCE)
    graph.add_node(_SINK)
    graph.add_nodes_from(network.nodes)
    for v, x in lam.items():
        if x > 0:
            if origins_unbounded:
                graph.add_edge(_SOURCE, v)
            else:
                graph.add_edge(_SOURCE, v, capacity=x)
    for link, c in zip(network.links, cap):
        # parallel links aggregate
        value = big_m if c is None else c
        if graph.has_edge(link.tail, link.head):
            graph[link.tail][link.head]["capacity"] += value
        else:
            graph.add_edge(link.tail, link.head, capacity=value)
    for d in network.destinations:
        graph.add_edge(d, _SINK)
    return _FlowProblem(graph, big_m, denominator, inflow_total)


def _min_cut(graph: nx.DiGraph) -> Tuple[Any, FrozenSet[str]]:
    value, (reachable, _) = nx.minimum_cut(graph, _SOURCE, _SINK, flow_func=shortest_augmenting_path)
    return value, frozenset(v for v in reachable if v != _SOURCE)


def _maxflow_search(network: Network) -> Tuple[CutValue, Cut]:
    problem = _flow_problem(network)
    c_min, side = _min_cut(problem.graph)
    if side:
        value = problem.inflow_total - c_min
        return _scaled(value, problem.denominator), Cut(side)

    # the empty cut is a minimizer: anchor every node on the source side in turn
    logger.debug("max-flow returned the empty cut, running anchored searches")
    best: Optional[Tuple[Any, Cut]] = None
    for v in network.non_destinations:
        graph = problem.graph.copy()
        if graph.has_edge(_SOURCE, v):
            graph[_SOURCE][v].pop("capacity", None)
        else:
            graph.add_edge(_SOURCE, v)
        c_v, side_v = _min_cut(graph)
        value_v = -math.inf if c_v >= problem.big_m else problem.inflow_total - c_v
        if best is None or value_v > best[0]:
            best = (value_v, Cut(side_v))
    assert best is not None
    if best[0] == -math.inf:
        return -math.inf, best[1]
    return _scaled(best[0], problem.denominator), best[1]


def max_violation_maxflow(network: Network, inflows: Optional[Mapping[str, Quantity]] = None) -> CutValue:
    """max over non-empty cuts of lambda_U - C_U via one s-t minimum cut.

    A source feeds every origin with its inflow, links keep their capacities (unbounded ones get
    a big-M value) and every destination drains into the sink. The minimum s-t cut is
    lambda_total - max_U (lambda_U - C_U) where U ranges over all cuts including the empty
    one; when the empty cut wins, the search is repeated with each node anchored to the source.
    """
    if inflows is not None:
        network = network.with_inflows(inflows)
    return _maxflow_search(network)[0]


def maxflow_report(network: Network, inflows: Optional[Mapping[str, Quantity]] = None) -> CutReport:
    """:func:`max_violation_maxflow` packaged as a partial :class:`CutReport` with one maximizer."""
    if inflows is not None:
        network = network.with_inflows(inflows)
    value, cut = _maxflow_search(network)
    return CutReport(value, (cut,), cut, isinstance(value, Fraction), partial=True)


class MaximalCut(NamedTuple):
    cut: Cut
    value: CutValue
    violating: bool
    exact: bool


def maximal_cut(
    network: Network,
    inflows: Optional[Mapping[str, Quantity]] = None,
    *,
    limit: int = 22,
    workers: Optional[int] = None,
) -> MaximalCut:
    """U*, the union of all maximizers of lambda_U - C_U.

    Uses exhaustive enumeration when the network is small enough, otherwise the max-flow
    maximizer (``exact`` is then False). ``violating`` is False when the best value is
    negative; the union is then still returned but need not attain the best value, since
    maximizers only close under union when the best value is non-negative.

    Raises
    ------
    FlowNetworkException
        ``FLOW_ERROR`` if the best value is non-negative and the union of the maximizers
        does not attain it.
    """
    if inflows is not None:
        network = network.with_inflows(inflows)
    if len(network.non_destinations) <= limit:
        report = enumerate_violations(network, limit=limit, workers=workers)
    else:
        report = maxflow_report(network)
    best = report.best_value
    if best >= 0:
        union_value = cut_value(network, report.u_star)
        same = union_value == best if report.exact else abs(union_value - best) <= _tolerance(float(best))
        if not same:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_ERROR, "The union of the maximizers is not a maximizer.",
                cut=sorted(report.u_star.nodes), value=json_number(union_value), best=json_number(best)
            )
    return MaximalCut(report.u_star, best, best >= 0, not report.partial)


def min_cut_capacity(network: Network) -> Tuple[Quantity, Cut]:
    """C_G, the smallest capacity of a cut containing every origin, and one such cut.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PRECONDITION_NOT_MET`` when the network has no origin.
    """
    if not network.origins:
        raise FlowNetworkException(FlowNetworkException.FLOW_PRECONDITION_NOT_MET, "The network has no origin.")
    problem = _flow_problem(network, origins_unbounded=True)
    value, side = _min_cut(problem.graph)
    cut = Cut(side)
    if value >= problem.big_m:
        # only cuts crossing an unbounded link separate the origins
        return INF, cut
    if problem.denominator is None:
        return float(value), cut
    return Fraction(int(value), problem.denominator), cut


def _nodes(nodes: Iterable[str]) -> FrozenSet[str]:
    return nodes.nodes if isinstance(nodes, Cut) else frozenset(nodes)


def capacity_between(network: Network, tails: Iterable[str], heads: Iterable[str]) -> Quantity:
    """C^A_H, the total capacity of the links from node set A into node set H."""
    a, h = _nodes(tails), _nodes(heads)
    for v in a | h:
        if v not in network.node_index:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"Unknown node {v}.", node=v)
    return sum((link.capacity for link in network.links if link.tail in a and link.head in h), Fraction(0))


def _finite(value: Quantity, what: str) -> Quantity:
    if value is INF:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_BAD_PARAMETER, f"The union identity needs finite capacities ({what})."
        )
    return value


def union_identity(network: Network, first: Iterable[str], second: Iterable[str]) -> Tuple[Quantity, Quantity]:
    """Both sides of the decomposition of the union value of two cuts A and H.

    Returns ``(lhs, rhs)`` with lhs = lambda_{A u H} - C_{A u H} evaluated directly and
    rhs = lambda_A + lambda_{H\\A} - C_A + C^A_{H\\A} - C^{H\\A}_{V\\(A u H)}.
    """
    a, h = _nodes(first), _nodes(second)
    union = a | h
    rest = h - a
    outside = frozenset(network.nodes) - union

    def inflow(nodes: FrozenSet[str]) -> Quantity:
        return sum((network.inflows.get(v, Fraction(0)) for v in sorted(nodes)), Fraction(0))

    def capacity(nodes: FrozenSet[str]) -> Quantity:
        return _finite(capacity_between(network, nodes, frozenset(network.nodes) - nodes), f"C of {sorted(nodes)}")

    lhs = inflow(union) - capacity(union)
    rhs = (
        inflow(a) + inflow(rest) - capacity(a)
        + _finite(capacity_between(network, a, rest), "C^A_{H\\A}")
        - _finite(capacity_between(network, rest, outside), "C^{H\\A}_{outside}")
    )
    return lhs, rhs


def all_maximizer_unions_maximal(report: CutReport, network: Network) -> bool:
    """True when the union of every pair of maximizers attains the best value.

    Closure under union only holds for a non-negative best value; below zero the check
    is vacuous and returns True.
    """
    if report.partial:
        raise FlowNetworkException(FlowNetworkException.FLOW_PRECONDITION_NOT_MET, "Needs the complete maximizer set.")
    if report.best_value < 0:
        return True
    for i, first in enumerate(report.maximizers):
        for second in report.maximizers[i + 1:]:
            value = cut_value(network, first | second)
            if report.exact and value != report.best_value:
                return False
            if not report.exact and abs(value - report.best_value) > _tolerance(float(report.best_value)):
                return False
    return True


__all__ = [
    "CutRecord", "CutReport", "MaximalCut", "enumerate_violations", "max_violation_maxflow", "maxflow_report",
    "maximal_cut", "min_cut_capacity", "cut_value", "capacity_between", "union_identity",
    "all_maximizer_unions_maximal",
]
