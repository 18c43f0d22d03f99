"""From-scratch Isomap: k-NN graph, geodesic distances, classical MDS.

The three stages are exposed separately so each can be checked against an
independent oracle; ``isomap`` composes them. Geodesics come from
per-source Dijkstra runs; the embedding from the eigendecomposition of
the doubly-centered squared-distance matrix.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric weighted adjacency; np.inf marks absent edges, zero diagonal."""

    n: int
    weights: np.ndarray  # (n, n) float64

    def edge_list(self) -> list[tuple[int, int, float]]:
        ii, jj = np.nonzero(np.isfinite(self.weights) & ~np.eye(self.n, dtype=bool))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(ii, jj) if i < j]


@dataclass(frozen=True)
class Embedding:
    """MDS coordinates with their (non-increasing, non-negative) eigenvalues."""

    coords: np.ndarray       # (n, dim), zero-mean columns
    eigenvalues: np.ndarray  # (dim,)


def pairwise_distances(vectors: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix."""
    x = np.asarray(vectors, dtype=np.float64)
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.clip(d2, 0.0, None))


def build_knn_graph(vectors: np.ndarray, k: int) -> NeighborGraph:
    """Connect each point to its k nearest Euclidean neighbors, symmetrized
    by union. Distance ties break toward the lower index."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("empty input")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} requires more than {n} points")
    dists = pairwise_distances(x)
    weights = np.full((n, n), np.inf)
    np.fill_diagonal(weights, 0.0)
    for i in range(n):
        row = dists[i].copy()
        row[i] = np.inf
        nearest = np.argsort(row, kind="stable")[:k]
        for j in nearest:
            weights[i, j] = weights[j, i] = dists[i, j]
    return NeighborGraph(n=n, weights=weights)


def connected_components(graph: NeighborGraph) -> list[list[int]]:
    """Node lists of the graph's connected components, smallest index first."""
    seen = np.zeros(graph.n, dtype=bool)
    comps: list[list[int]] = []
    finite = np.isfinite(graph.weights)
    for start in range(graph.n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.nonzero(finite[u])[0]:
                if v != u and not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        comps.append(sorted(comp))
    return comps


def repair_connectivity(
    graph: NeighborGraph, dists: np.ndarray
) -> tuple[NeighborGraph, list[tuple[int, int]]]:
    """Iteratively add the single shortest inter-component edge until the
    graph is connected; returns the repaired graph and the added edges."""
    weights = graph.weights.copy()
    added: list[tuple[int, int]] = []
    while True:
        comps = connected_components(NeighborGraph(graph.n, weights))
        if len(comps) <= 1:
            break
        membership = np.empty(graph.n, dtype=np.int64)
        for ci, comp in enumerate(comps):
            membership[comp] = ci
        cross = membership[:, None] != membership[None, :]
        masked = np.where(cross, dists, np.inf)
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        weights[i, j] = weights[j, i] = dists[i, j]
        added.append((int(i), int(j)))
    if added:
        log.warning("neighbor graph was disconnected; added bridge edges %s", added)
    return NeighborGraph(graph.n, weights), added


def _dijkstra(adj: list[list[tuple[int, float]]], source: int, n: int) -> np.ndarray:
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def geodesic_distances(graph: NeighborGraph) -> np.ndarray:
    """Exact all-pairs shortest-path matrix via per-source Dijkstra.

    Raises on disconnected graphs; repair connectivity upstream first.
    """
    n = graph.n
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i in range(n):
        row = graph.weights[i]
        for j in np.nonzero(np.isfinite(row))[0]:
            if j != i:
                adj[i].append((int(j), float(row[j])))
    out = np.empty((n, n))
    for src in range(n):
        out[src] = _dijkstra(adj, src, n)
    if not np.all(np.isfinite(out)):
        raise ValueError("graph is disconnected; geodesic distances undefined")
    return out


def classical_mds(dist: np.ndarray, dim: int) -> Embedding:
    """Embed a distance matrix by eigendecomposition of B = -1/2 * J D^2 J.

    Node i maps to (sqrt(l_1) v_1i, ..., sqrt(l_dim) v_dimi) using the top
    eigenpairs; negative eigenvalues are clamped to zero, so those
    coordinates vanish. Column signs are fixed by making each
    eigenvector's largest-magnitude entry positive.
    """
    d = np.asarray(dist, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if dim > n:
        raise ValueError(f"dim={dim} exceeds point count {n}")
    if not np.allclose(d, d.T, atol=1e-10):
        raise ValueError("distance matrix must be symmetric")
    if np.abs(np.diag(d)).max() > 1e-10:
        raise ValueError("distance matrix must have a zero diagonal")

    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ (d * d) @ j
    b = (b + b.T) / 2.0
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order[:dim]], 0.0, None)
    evecs = evecs[:, order[:dim]]
    for c in range(dim):
        peak = np.argmax(np.abs(evecs[:, c]))
        if evecs[peak, c] < 0:
            evecs[:, c] = -evecs[:, c]
    coords = evecs * np.sqrt(evals)[None, :]
    coords = coords - coords.mean(axis=0)
    return Embedding(coords=coords, eigenvalues=evals)


def isomap(vectors: np.ndarray, k: int, dim: int, repair: bool = True) -> Embedding:
    """k-NN graph -> geodesics -> classical MDS.

    With repair enabled (default), disconnected neighbor graphs are bridged
    by the shortest inter-component edges; strict mode raises instead.
    """
    x = np.asarray(vectors, dtype=np.float64)
    graph = build_knn_graph(x, k)
    if repair:
        graph, _ = repair_connectivity(graph, pairwise_distances(x))
    return classical_mds(geodesic_distances(graph), dim)
