"""Neighbourhood graphs over ridge points and modes.

Graphs are stored as symmetric adjacency dictionaries with Euclidean edge
lengths. Connectivity uses a breadth-first flood fill and paths use
Dijkstra's algorithm; both break ties by node index, so outputs do not
depend on insertion order.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConnectivityError, InputError

__all__ = [
    "NeighborGraph",
    "build_knn",
    "graph_from_edges",
    "connected_components",
    "shortest_path",
    "shortest_path_lengths",
    "path_length",
    "path_tangents",
]

_ROW_BLOCK = 512


@dataclass
class NeighborGraph:
    nodes: np.ndarray
    adjacency: list  # list of dict {neighbor: weight}
    k: int = 0
    symmetrized: bool = True

    @property
    def n_nodes(self) -> int:
        return len(self.adjacency)

    def edges(self):
        """Yield each undirected edge once as ``(i, j, w)`` with ``i < j``."""
        for i, nbrs in enumerate(self.adjacency):
            for j in sorted(nbrs):
                if i < j:
                    yield i, j, nbrs[j]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])


def build_knn(nodes, k: int = 12) -> NeighborGraph:
    """Connect every node to its ``k`` nearest neighbours, then symmetrize.

    An edge exists when either endpoint selected the other. Distances are
    computed exactly in row blocks; equal distances are resolved in favour of
    the lower node index.
    """
    pts = np.asarray(nodes, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = len(pts)
    if k < 1 or k >= m:
        raise InputError(f"k must satisfy 1 <= k < number of nodes ({m}), got {k}")
    adjacency = [dict() for _ in range(m)]
    sq = np.einsum("ij,ij->i", pts, pts)
    for lo in range(0, m, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, m)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * pts[lo:hi] @ pts.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        for r, i in enumerate(range(lo, hi)):
            for j in order[r]:
                j = int(j)
                w = float(np.linalg.norm(pts[i] - pts[j]))
                adjacency[i][j] = w
                adjacency[j][i] = w
    return NeighborGraph(nodes=pts, adjacency=adjacency, k=k, symmetrized=True)


def graph_from_edges(n_nodes: int, edges, nodes=None) -> NeighborGraph:
    """Undirected graph from ``(i, j, weight)`` triples with positive weights."""
    adjacency = [dict() for _ in range(n_nodes)]
    for i, j, w in edges:
        if w <= 0:
            raise InputError("edge weights must be positive")
        if i == j:
            continue
        adjacency[i][j] = float(w)
        adjacency[j][i] = float(w)
    pts = np.zeros((n_nodes, 0)) if nodes is None else np.asarray(nodes, dtype=np.float64)
    return NeighborGraph(nodes=pts, adjacency=adjacency, k=0, symmetrized=True)


def connected_components(graph: NeighborGraph) -> np.ndarray:
    """Flood-fill component labels ``0..c-1``, seeded in node-index order."""
    labels = np.full(graph.n_nodes, -1, dtype=int)
    current = 0
    for seed in range(graph.n_nodes):
        if labels[seed] >= 0:
            continue
        labels[seed] = current
        queue = deque([seed])
        while queue:
            i = queue.popleft()
            for j in sorted(graph.adjacency[i]):
                if labels[j] < 0:
                    labels[j] = current
                    queue.append(j)
        current += 1
    return labels


def _dijkstra(graph: NeighborGraph, source: int):
    n = graph.n_nodes
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=int)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in graph.adjacency[u].items():
            alt = du + w
            if alt < dist[v] or (alt == dist[v] and u < pred[v] and not done[v]):
                dist[v] = alt
                pred[v] = u
                heapq.heappush(heap, (alt, v))
    return dist, pred


def _check_node(graph, i, name):
    if not 0 <= int(i) < graph.n_nodes:
        raise InputError(f"{name} index {i} outside [0, {graph.n_nodes})")


def shortest_path_lengths(graph: NeighborGraph, source: int) -> np.ndarray:
    """Distances from ``source`` to every node (``inf`` if unreachable)."""
    _check_node(graph, source, "source")
    return _dijkstra(graph, int(source))[0]


def shortest_path(graph: NeighborGraph, source: int, target: int) -> list:
    """Minimum-weight node sequence from ``source`` to ``target``.

    Raises
    ------
    ConnectivityError
        If ``target`` is unreachable; enlarge ``k`` or treat the ridge as
        disconnected.
    """
    _check_node(graph, source, "source")
    _check_node(graph, target, "target")
    dist, pred = _dijkstra(graph, int(source))
    if not np.isfinite(dist[target]):
        labels = connected_components(graph)
        raise ConnectivityError(
            f"node {target} is not reachable from node {source} "
            f"(components {labels[source]} and {labels[target]})",
            components=(int(labels[source]), int(labels[target])),
        )
    path = [int(target)]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def path_length(positions) -> float:
    pts = np.asarray(positions, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def path_tangents(positions) -> np.ndarray:
    """Forward differences ``p[l] - p[l-1]`` along a polyline."""
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 2:
        raise InputError("need at least two positions for tangents")
    return np.diff(pts, axis=0)
