"""PageRank as a single-block bulk-synchronous computation.

Every iteration pushes ``d * rank[u] / deg(u)`` along each block edge with
an atomic add; the mass of dangling (degree-0) vertices is spread uniformly
so ranks always sum to one.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..atomics import atomic_add
from ..core import AlgorithmSpec, AttributeStore, Graph
from ..errors import ContractError
from ..partition import BlockGrid
from ..runtime import RunConfig, RunStats, run

DAMPING = 0.85
TOLERANCE = 1e-4
MAX_ITERS = 20


class PageRankResult(NamedTuple):
    rank: np.ndarray
    iterations: int
    stats: RunStats
    history: list = []


@njit(nogil=True, cache=True)
def _push(offsets, adjacency, s_lo, d_lo, contrib, nxt, lo, hi):
    for lu in range(lo, hi):
        c = contrib[s_lo + lu]
        for e in range(offsets[lu], offsets[lu + 1]):
            atomic_add(nxt, d_lo + adjacency[e], c)
    return offsets[hi] - offsets[lo]


def pagerank_spec(
    graph: Graph,
    grid: BlockGrid,
    damping: float = DAMPING,
    tolerance: float = TOLERANCE,
    max_iters: int = MAX_ITERS,
    record_history: bool = False,
) -> AlgorithmSpec:
    n = graph.n
    store = AttributeStore(n, graph.m)
    rank = store.add_vertex("rank", np.float64, 1.0 / n if n else 0.0)
    nxt = store.add_vertex("next", np.float64)
    contrib = store.add_vertex("contrib", np.float64)
    deg = graph.degrees.astype(np.float64)
    dangling = deg == 0
    safe_deg = np.where(dangling, 1.0, deg)
    store["iterations"] = 0
    store["delta"] = np.inf
    store["history"] = []

    def before(ctrl):
        lost = rank[dangling].sum()
        nxt[:] = (1.0 - damping) / n + damping * lost / n
        np.divide(damping * rank, safe_deg, out=contrib)
        contrib[dangling] = 0.0

    def kernel(bl, ctx):
        b = bl[0]

        def push_rows(lo, hi):
            return _push(b.offsets, b.adjacency, b.S.start, b.D.start, contrib, nxt, lo, hi)

        ctx.chunks(len(b.S), push_rows)

    def after(ctrl):
        delta = float(np.abs(nxt - rank).sum())
        rank[:] = nxt
        store["iterations"] += 1
        store["delta"] = delta
        if record_history:
            store["history"].append(rank.copy())
        return delta > tolerance and store["iterations"] < max_iters

    return AlgorithmSpec(
        after=after,
        before=before,
        host_kernel=kernel,
        device_kernel=kernel,
        predicate=lambda bl: bl[0].num_edges > 0,
        attributes=store,
        name="pagerank",
    )


def pagerank(graph: Graph, grid: BlockGrid, config: RunConfig | None = None, **params) -> PageRankResult:
    if grid.upper:
        raise ContractError("pagerank needs the full symmetric grid, not an upper-triangular view")
    if graph.n == 0:
        return PageRankResult(np.zeros(0), 0, RunStats(), [])
    spec = pagerank_spec(graph, grid, **params)
    store, stats = run(spec, grid, config)
    return PageRankResult(store["rank"], store["iterations"], stats, store["history"])
