"""Directed reachability and the unreachable-cloud sets behind the connectivity cuts."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .instance import Instance, Network


@dataclass(frozen=True)
class ReachabilityMatrix:
    """Boolean closure ``matrix[i, j]`` = a directed path i -> j exists (diagonal true)."""

    nodes: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.nodes)})

    def reaches(self, a: str, b: str) -> bool:
        return bool(self.matrix[self._index[a], self._index[b]])


def transitive_closure(network: Network) -> ReachabilityMatrix:
    """One breadth-first search per node, O(|N| (|N| + |L|))."""
    nodes = tuple(network.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    succ: list[list[int]] = [[] for _ in nodes]
    for link in network.links:
        succ[index[link.tail]].append(index[link.head])
    n = len(nodes)
    m = np.zeros((n, n), dtype=bool)
    for root in range(n):
        row = m[root]
        row[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in succ[u]:
                if not row[w]:
                    row[w] = True
                    queue.append(w)
    m.setflags(write=False)
    return ReachabilityMatrix(nodes, m)


@dataclass(frozen=True)
class UnreachableSets:
    """Cloud nodes that cannot be used, keyed by service id or by cloud node.

    ``from_source[k]``: clouds not reachable from the source of ``k``.
    ``to_destination[k]``: clouds that cannot reach the destination of ``k``.
    ``from_cloud[v0]``: clouds other than ``v0`` not reachable from ``v0``.
    """

    from_source: dict[str, frozenset[str]]
    to_destination: dict[str, frozenset[str]]
    from_cloud: dict[str, frozenset[str]]

    def blocked(self, k: str) -> frozenset[str]:
        return self.from_source[k] | self.to_destination[k]


def unreachable_sets(reach: ReachabilityMatrix, instance: Instance) -> UnreachableSets:
    clouds = instance.network.cloud_ids
    from_source = {
        svc.id: frozenset(v for v in clouds if not reach.reaches(svc.source, v)) for svc in instance.services
    }
    to_destination = {
        svc.id: frozenset(v for v in clouds if not reach.reaches(v, svc.destination)) for svc in instance.services
    }
    from_cloud = {
        v0: frozenset(v for v in clouds if v != v0 and not reach.reaches(v0, v)) for v0 in clouds
    }
    return UnreachableSets(from_source, to_destination, from_cloud)


def compute_unreachable(instance: Instance) -> UnreachableSets:
    return unreachable_sets(transitive_closure(instance.network), instance)
