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

from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Set, Tuple, Union

import numpy as np

from .core import FlowNetworkException
from .graph import Link, Network
from .routing import MOTIVATING_TOPOLOGY
from .util import INF, Quantity, parse_quantity


MOTIVATING_CAPACITIES = {"1": 2, "2": 1, "3": 1, "4": 1, "5": 3}


def motivating_network(
    capacities: Optional[Mapping[str, Quantity]] = None,
    buffers: Optional[Union[Quantity, Mapping[str, Quantity]]] = None,
    inflow: Quantity = 2,
) -> Network:
    """The five-link network on nodes a, b, c, d with its only origin at a.

    Links 1 = a->b, 2 = a->c, 3 = b->c, 4 = b->d, 5 = c->d with capacities 2, 1, 1, 1, 3
    unless overridden. ``buffers`` is one value for every link or a map per link id; buffers
    default to unbounded.
    """
    caps: Dict[str, Quantity] = dict(MOTIVATING_CAPACITIES)
    caps.update(capacities or {})
    if buffers is None or not isinstance(buffers, Mapping):
        per_link = {e: INF if buffers is None else buffers for e in MOTIVATING_TOPOLOGY}
    else:
        per_link = {e: buffers.get(e, INF) for e in MOTIVATING_TOPOLOGY}
    links = tuple(
        Link(e, tail, head, capacity=parse_quantity(caps[e]), buffer=parse_quantity(per_link[e]))
        for e, (tail, head) in MOTIVATING_TOPOLOGY.items()
    )
    return Network(nodes=("a", "b", "c", "d"), links=links, inflows={"a": inflow})


def random_network(
    seed: int,
    n_nodes: int = 6,
    n_destinations: int = 1,
    *,
    rational: bool = True,
    finite_buffers: bool = False,
    extra_link_probability: float = 0.3,
    second_origin_probability: float = 0.3,
) -> Network:
    """A seeded random network that always passes :func:`monoflow.graph.validate`.

    Nodes ``v0 .. v{n-1}``, the last ``n_destinations`` being destinations and ``v0`` an
    origin. Every non-destination node gets a link from an earlier node (reachability from
    ``v0``) and a link to a later node (a path to a destination); extra links may point
    backwards and create cycles. Capacities and inflows are fractions when ``rational``.
    """
    if n_destinations < 1 or n_nodes <= n_destinations:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_BAD_PARAMETER, "Need at least one destination and one other node."
        )
    rng = np.random.default_rng(seed)
    nodes = [f"v{i}" for i in range(n_nodes)]
    inner = n_nodes - n_destinations
    pairs: List[Tuple[int, int]] = []
    seen: Set[Tuple[int, int]] = set()

    def add(u: int, w: int) -> None:
        if u != w and (u, w) not in seen and u < inner:
            seen.add((u, w))
            pairs.append((u, w))

    for i in range(1, inner):
        add(int(rng.integers(0, i)), i)
    for i in range(inner):
        add(i, int(rng.integers(i + 1, n_nodes)))
    for d in range(inner, n_nodes):
        if not any(w == d for _, w in pairs):
            add(int(rng.integers(0, inner)), d)
    for u in range(inner):
        for w in range(n_nodes):
            if rng.uniform() < extra_link_probability / n_nodes:
                add(u, w)

    def quantity(low: int, high: int) -> Quantity:
        if rational:
            return Fraction(int(rng.integers(low, high)), int(rng.integers(1, 4)))
        return float(rng.uniform(low, high))

    links = []
    for k, (u, w) in enumerate(pairs, start=1):
        buffer = Fraction(int(rng.integers(2, 6))) if finite_buffers else INF
        links.append(Link(str(k), nodes[u], nodes[w], capacity=quantity(1, 9), buffer=buffer))

    inflows: Dict[str, Quantity] = {"v0": quantity(1, 6)}
    if inner > 1 and rng.uniform() < second_origin_probability:
        inflows[nodes[int(rng.integers(1, inner))]] = quantity(1, 4)
    return Network(nodes=tuple(nodes), links=tuple(links), inflows=inflows)
