"""Brute-force reference results.

Deliberately simple, single-threaded and independent of the partitioning
and runtime code, so that tests compare two unrelated routes.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .core import Graph

INF = np.iinfo(np.int64).max
DENSE_LIMIT = 2000


def _adjacency_matrix(graph: Graph) -> np.ndarray:
    src, dst = graph.edge_arrays()
    A = np.zeros((graph.n, graph.n), dtype=bool)
    A[src, dst] = True
    A[dst, src] = True
    np.fill_diagonal(A, False)
    return A


def oracle_triangles(graph: Graph) -> int:
    """Count ``u < v < w`` with all three edges present."""
    if graph.n > DENSE_LIMIT:
        raise ValueError(f"dense triangle oracle is limited to n <= {DENSE_LIMIT}")
    A = _adjacency_matrix(graph)
    total = 0
    for u in range(graph.n):
        for v in range(u + 1, graph.n):
            if A[u, v]:
                # every w > v adjacent to both
                total += int(np.count_nonzero(A[u, v + 1 :] & A[v, v + 1 :]))
    return total


def oracle_triangles_sparse(graph: Graph) -> int:
    """Triangle count for graphs too large for the dense oracle.

    Uses ``sum((L @ L) * L)`` on the strictly lower triangle, a route that
    shares nothing with the block kernels.
    """
    import scipy.sparse as sp

    src, dst = graph.edge_arrays()
    A = sp.coo_matrix((np.ones(len(src), dtype=np.int64), (src, dst)), shape=(graph.n, graph.n)).tocsr()
    A = ((A + A.T) > 0).astype(np.int64)
    L = sp.tril(A, k=-1).tocsr()
    return int((L @ L).multiply(L).sum())


def oracle_components(graph: Graph) -> np.ndarray:
    """Union-find labels; each vertex gets the smallest id in its component."""
    parent = list(range(graph.n))

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    src, dst = graph.edge_arrays()
    for u, v in zip(src.tolist(), dst.tolist()):
        ru, rv = find(u), find(v)
        if ru != rv:
            if ru < rv:
                parent[rv] = ru
            else:
                parent[ru] = rv
    return np.array([find(x) for x in range(graph.n)], dtype=np.int64)


def oracle_bfs(graph: Graph, source: int) -> np.ndarray:
    """Hop distance from ``source``; unreachable vertices get ``INF``."""
    dist = np.full(graph.n, INF, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    offsets, adj = graph.offsets, graph.adjacency
    while queue:
        u = queue.popleft()
        for v in adj[offsets[u] : offsets[u + 1]].tolist():
            if dist[v] == INF:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def oracle_pagerank(graph: Graph, d: float = 0.85, iters: int = 20, history: bool = False):
    """Dense power iteration with dangling mass spread over all vertices.

    Returns the final ranks, or the list of ranks after each iteration when
    ``history`` is set.
    """
    n = graph.n
    if n == 0:
        return [] if history else np.zeros(0)
    src, dst = graph.edge_arrays()
    M = np.zeros((n, n))
    np.add.at(M, (dst, src), 1.0)
    out = M.sum(axis=0)
    dangling = out == 0
    M[:, ~dangling] /= out[~dangling]
    rank = np.full(n, 1.0 / n)
    seen = []
    for _ in range(iters):
        rank = (1.0 - d) / n + d * rank[dangling].sum() / n + d * (M @ rank)
        seen.append(rank.copy())
    return seen if history else rank


def same_partition(a, b) -> bool:
    """True when two label arrays induce the same grouping of vertices."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    if a.size == 0:
        return True
    _, ca = np.unique(a, return_inverse=True)
    _, cb = np.unique(b, return_inverse=True)
    pairs = np.unique(np.stack([ca, cb]), axis=1)
    return pairs.shape[1] == ca.max() + 1 == cb.max() + 1
