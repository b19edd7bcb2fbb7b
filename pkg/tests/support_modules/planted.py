from typing import Any, Dict

import numpy as np

from monoflow.graph import Network
from monoflow.routing import RoutingPolicy


class HerdingPolicy(RoutingPolicy):
    """Sends flow preferentially to the most congested downstream link.

    Satisfies the routing axioms on infinite buffers but is not monotone: raising the density
    of one downstream link pulls flow away from the others.
    """

    kind = "herding"

    def _shares(self, rho: np.ndarray, targets) -> np.ndarray:
        w = np.exp(np.asarray([rho[j] for j in targets]))
        return w / w.sum()

    def link_split(self, e: int, rho: np.ndarray) -> np.ndarray:
        outflow = self._capacity[e] * -np.expm1(-rho[e])
        if self.network.terminal[e]:
            return np.array([outflow])
        return outflow * self._shares(rho, self.network.downstream[e])

    def origin_split(self, o: int, rho: np.ndarray) -> np.ndarray:
        out = self.network.out_links[self.network.origins[o]]
        return self._lambda[o] * self._shares(rho, out)

    def rebind(self, network: Network) -> "HerdingPolicy":
        return HerdingPolicy(network)

    def to_spec(self) -> Dict[str, Any]:
        return {"type": self.kind}
