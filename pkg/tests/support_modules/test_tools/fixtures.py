from pathlib import Path
from typing import Dict

import numpy as np

from monoflow.graph import Link, Network
from monoflow.util import parse_quantity


SCENARIOS = Path(__file__).resolve().parents[3] / "scenarios"


def scenario_path(name: str) -> Path:
    return SCENARIOS / name


class PropertyConfig:
    def __init__(self, *, instances: int = 5, seed: int = 7, max_nodes: int = 6) -> None:
        self.instances: int = instances
        self.seed: int = seed
        self.max_nodes: int = max_nodes


def chain(capacities=(2, 2), inflow=1, buffers=None) -> Network:
    """o -> v1 -> ... -> d with one link per capacity."""
    nodes = [f"v{i}" for i in range(len(capacities) + 1)]
    buffers = buffers or ["inf"] * len(capacities)
    links = tuple(
        Link(str(i + 1), nodes[i], nodes[i + 1], capacity=parse_quantity(c), buffer=parse_quantity(b))
        for i, (c, b) in enumerate(zip(capacities, buffers))
    )
    return Network(nodes=tuple(nodes), links=links, inflows={"v0": inflow})


def diamond(inflow=2, buffer="inf") -> Network:
    """o splits onto two parallel routes that merge before the destination."""
    buffer = parse_quantity(buffer)
    links = (
        Link("1", "o", "x", capacity=2, buffer=buffer),
        Link("2", "o", "y", capacity=2, buffer=buffer),
        Link("3", "x", "d", capacity=2, buffer=buffer),
        Link("4", "y", "d", capacity=2, buffer=buffer),
    )
    return Network(nodes=("o", "x", "y", "d"), links=links, inflows={"o": inflow})


def density(network: Network, values: Dict[str, float]) -> np.ndarray:
    rho = np.zeros(len(network.links))
    for link, value in values.items():
        rho[network.link_index[link]] = value
    return rho
