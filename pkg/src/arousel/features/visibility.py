"""Natural-visibility-graph features of the RR tachogram.

Nodes are beats at integer abscissae; an edge joins (a, b) iff every
intermediate sample stays strictly below the chord between them.  The graph
of any series contains the path a-a+1, so it is always connected.
"""

from __future__ import annotations

import collections

import numpy as np

from ..errors import InsufficientDataError


def visibility_edges(y) -> set[tuple[int, int]]:
    """Edge set via the running-maximum slope criterion (O(n^2))."""
    y = np.asarray(y, dtype=float)
    n = y.size
    edges: set[tuple[int, int]] = set()
    for a in range(n - 1):
        edges.add((a, a + 1))
        max_slope = -np.inf
        for b in range(a + 1, n):
            slope = (y[b] - y[a]) / (b - a)
            if b > a + 1 and slope <= max_slope:
                max_slope = max(max_slope, slope)
                continue
            if b > a + 1:
                edges.add((a, b))
            max_slope = max(max_slope, slope)
    return edges


def _adjacency(n: int, edges: set[tuple[int, int]]) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _bfs_path_lengths(adj: list[set[int]], start: int) -> np.ndarray:
    n = len(adj)
    dist = np.full(n, -1, dtype=int)
    dist[start] = 0
    queue = collections.deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def visibility_rr(rr) -> dict[str, float]:
    """Mean shortest path, transitivity, mean local clustering, mean degree."""
    y = np.asarray(rr, dtype=float)
    n = y.size
    if n < 10:
        raise InsufficientDataError("visibility features need >= 10 samples")
    edges = visibility_edges(y)
    adj = _adjacency(n, edges)
    degrees = np.array([len(a) for a in adj], dtype=float)

    total_dist = 0
    for v in range(n):
        d = _bfs_path_lengths(adj, v)
        total_dist += int(d[v + 1 :].sum())
    short_path = total_dist / (n * (n - 1) / 2)

    triangles_tot = 0
    local_cc = np.zeros(n)
    for v in range(n):
        neigh = adj[v]
        k = len(neigh)
        if k < 2:
            continue
        links = sum(1 for a, b in edges if a in neigh and b in neigh)
        local_cc[v] = 2.0 * links / (k * (k - 1))
        triangles_tot += links
    triangles = triangles_tot / 3  # each triangle counted at its 3 corners
    triples = float(np.sum(degrees * (degrees - 1) / 2.0))
    glob_cc = 3.0 * triangles / triples if triples > 0 else 0.0

    return {
        "ShortPathLen": float(short_path),
        "GlobClusterCoef": float(glob_cc),
        "LocalClusterCoef": float(local_cc.mean()),
        "Degree": float(degrees.mean()),
    }
