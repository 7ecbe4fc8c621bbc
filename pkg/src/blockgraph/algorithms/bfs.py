"""Direction-optimizing breadth-first search over activated blocks.

Each level runs either top-down (expand the frontier of ``S``) or
bottom-up (unvisited vertices of ``S`` look for a parent in the frontier
of ``D``).  Only blocks whose relevant frontier is non-empty become
block-lists.  The direction is re-chosen before every level.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..atomics import atomic_add, cas
from ..core import AlgorithmSpec, AttributeStore, Graph, LevelQueue
from ..errors import ContractError, RangeError
from ..partition import BlockGrid
from ..runtime import RunConfig, RunStats, run

ALPHA = 14
BETA = 24
TOP_DOWN = "top_down"
BOTTOM_UP = "bottom_up"


class BFSResult(NamedTuple):
    parent: np.ndarray
    depth: np.ndarray
    stats: RunStats


@njit(nogil=True, cache=True)
def _top_down(offsets, adjacency, s_lo, d_lo, frontier, lo, hi, P, out):
    found = 0
    scanned = 0
    for k in range(lo, hi):
        u = frontier[k]
        lu = u - s_lo
        for e in range(offsets[lu], offsets[lu + 1]):
            scanned += 1
            v = d_lo + adjacency[e]
            if P[v] == -1 and cas(P, v, -1, u):
                out[found] = v
                found += 1
    return found, scanned


@njit(nogil=True, cache=True)
def _bottom_up(offsets, adjacency, s_lo, d_lo, lo, hi, P, in_frontier, out):
    found = 0
    scanned = 0
    for lu in range(lo, hi):
        u = s_lo + lu
        if P[u] != -1:
            continue
        for e in range(offsets[lu], offsets[lu + 1]):
            scanned += 1
            v = d_lo + adjacency[e]
            if in_frontier[v]:
                if cas(P, u, -1, v):
                    out[found] = u
                    found += 1
                break
    return found, scanned


def bfs_spec(graph: Graph, grid: BlockGrid, source: int, alpha: float = ALPHA, beta: float = BETA) -> AlgorithmSpec:
    n = graph.n
    store = AttributeStore(n, graph.m)
    P = store.add_vertex("P", np.int64, -1)
    depth = store.add_vertex("depth", np.int64, -1)
    P[source] = source
    depth[source] = 0
    Q = LevelQueue(n, grid.cuts)
    Q.seed([source])
    store["Q"] = Q
    deg = graph.degrees
    state = {
        "direction": TOP_DOWN,
        "level": 0,
        "unexplored_edges": int(graph.m - deg[source]),
        "levels": [],
    }
    part_of = grid.part_of
    unvisited = np.array([len(grid.part_range(i)) for i in range(grid.p)], dtype=np.int64)
    unvisited[part_of(source)] -= 1
    store["state"] = state

    def choose_direction(ctrl):
        frontier = Q.all_vertices()
        n_f = len(frontier)
        if state["direction"] == TOP_DOWN:
            scout = int(deg[frontier].sum())
            if scout * alpha > state["unexplored_edges"]:
                state["direction"] = BOTTOM_UP
        elif n_f < n / beta:
            state["direction"] = TOP_DOWN
        state["levels"].append(state["direction"])
        Q.n_q[0] = 0

    def active(bl):
        b = bl[0]
        if b.num_edges == 0:
            return False
        if state["direction"] == TOP_DOWN:
            return len(Q.frontier(b.row)) > 0
        return len(Q.frontier(b.col)) > 0 and unvisited[b.row] > 0

    def kernel(bl, ctx):
        b = bl[0]
        off, adj, s_lo, d_lo = b.offsets, b.adjacency, b.S.start, b.D.start
        if state["direction"] == TOP_DOWN:
            frontier = Q.frontier(b.row)

            def expand(lo, hi):
                out = np.empty(len(b.D), dtype=np.int64)
                got, scanned = _top_down(off, adj, s_lo, d_lo, frontier, lo, hi, P, out)
                return out[:got], scanned

            parts = ctx.chunks(len(frontier), expand, grain=256)
        else:
            in_frontier = Q.in_frontier

            def scan(lo, hi):
                out = np.empty(hi - lo, dtype=np.int64)
                got, scanned = _bottom_up(off, adj, s_lo, d_lo, lo, hi, P, in_frontier, out)
                return out[:got], scanned

            parts = ctx.chunks(len(b.S), scan)
        pushed = 0
        for found, _ in parts:
            Q.push(ctx.task_index, found)
            pushed += len(found)
        atomic_add(Q.n_q, 0, pushed)
        ctx.count("edges_traversed", sum(s for _, s in parts))

    def after(ctrl):
        reached = Q.advance()
        if reached != int(Q.n_q[0]):
            raise ContractError(f"level {state['level']}: {reached} merged but {int(Q.n_q[0])} pushed")
        state["level"] += 1
        fresh = Q.all_vertices()
        depth[fresh] = state["level"]
        state["unexplored_edges"] -= int(deg[fresh].sum())
        np.subtract.at(unvisited, part_of(fresh), 1)
        return reached > 0

    return AlgorithmSpec(
        after=after,
        before=choose_direction,
        host_kernel=kernel,
        device_kernel=kernel,
        predicate=active,
        attributes=store,
        name="bfs",
    )


def bfs(graph: Graph, grid: BlockGrid, config: RunConfig | None = None, source: int = 0, **params) -> BFSResult:
    if not 0 <= source < graph.n:
        raise RangeError(f"source {source} outside [0, {graph.n})")
    if grid.upper:
        raise ContractError("bfs needs the full symmetric grid")
    spec = bfs_spec(graph, grid, source, **params)
    store, stats = run(spec, grid, config)
    state = store["state"]
    stats.counters["levels"] = state["level"]
    stats.counters["bottom_up_levels"] = state["levels"].count(BOTTOM_UP)
    return BFSResult(store["P"], store["depth"], stats)


def depths_from_parents(parent: np.ndarray, source: int) -> np.ndarray:
    """Depth of every vertex in the tree encoded by ``parent`` (-1 if unreached)."""
    depth = np.full(len(parent), -1, dtype=np.int64)
    depth[source] = 0
    reached = parent >= 0
    while True:
        todo = reached & (depth < 0)
        todo_idx = np.flatnonzero(todo)
        ready = todo_idx[depth[parent[todo_idx]] >= 0]
        if len(ready) == 0:
            return depth
        depth[ready] = depth[parent[ready]] + 1
