"""Hop-count link-state routing with deterministic tie-breaking."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class RouteEntry:
    next_hop: str
    cost: int          # number of links on the path


def _bfs_distances(adjacency: dict[str, list[str]], source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nb in adjacency[node]:
            if nb not in dist:
                dist[nb] = dist[node] + 1
                queue.append(nb)
    return dist


def compute_routes(nodes: list[str], links: set[frozenset],
                   source: str) -> dict[str, RouteEntry]:
    """Shortest-hop routes from `source` to every reachable node.

    When several neighbors give the same hop count, the lowest neighbor id
    wins, so tables are identical run to run.
    """
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for link in links:
        a, b = sorted(link)
        adjacency[a].append(b)
        adjacency[b].append(a)
    for n in adjacency:
        adjacency[n].sort()

    dist = _bfs_distances(adjacency, source)
    dist_from = {nb: _bfs_distances(adjacency, nb) for nb in adjacency[source]}
    routes: dict[str, RouteEntry] = {}
    for dest, cost in dist.items():
        if dest == source:
            continue
        # first hop: the lowest-id neighbor lying on some shortest path
        best = None
        for nb in adjacency[source]:
            if dist_from[nb].get(dest, float("inf")) == cost - 1:
                best = nb
                break
        if best is not None:
            routes[dest] = RouteEntry(next_hop=best, cost=cost)
    return routes


class RouteTable:
    """Per-node forwarding table; the epoch bumps on every recompute."""

    def __init__(self) -> None:
        self.entries: dict[str, RouteEntry] = {}
        self.epoch = 0

    def recompute(self, nodes: list[str], links: set[frozenset], source: str) -> None:
        self.entries = compute_routes(nodes, links, source)
        self.epoch += 1

    def next_hop(self, dest: str) -> str | None:
        entry = self.entries.get(dest)
        return entry.next_hop if entry else None

    def cost(self, dest: str) -> int | None:
        entry = self.entries.get(dest)
        return entry.cost if entry else None

    def reaches(self, dest: str) -> bool:
        return dest in self.entries
