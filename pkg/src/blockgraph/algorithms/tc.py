"""Triangle counting over three-block lists.

The graph is degree-relabeled and only edges ``u < v`` are kept.  For a
block ``B_k = (i, j)`` and every column part ``x >= j`` the list
``(B_k, B_l=(i, x), B_m=(j, x))`` counts, for each edge ``(u, v)`` of
``B_k``, the common neighbors of ``u`` in ``B_l`` and ``v`` in ``B_m``.
Each triangle is found exactly once, at its two smallest vertices.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..atomics import atomic_add
from ..core import AlgorithmSpec, AttributeStore, BlockList, Graph
from ..errors import ContractError
from ..io import degree_relabel
from ..partition import BlockGrid, partition, upper_triangular_view
from ..runtime import RunConfig, RunStats, run


class TriangleResult(NamedTuple):
    count: int
    stats: RunStats


@njit(nogil=True, cache=True)
def _count(k_off, k_adj, k_dlo, l_off, l_adj, m_off, m_adj, m_slo, lo, hi):
    total = 0
    for lu in range(lo, hi):
        a0 = l_off[lu]
        a1 = l_off[lu + 1]
        if a0 == a1:
            continue
        for e in range(k_off[lu], k_off[lu + 1]):
            lv = k_dlo + k_adj[e] - m_slo
            i = a0
            j = m_off[lv]
            j1 = m_off[lv + 1]
            while i < a1 and j < j1:
                x = l_adj[i]
                y = m_adj[j]
                if x == y:
                    total += 1
                    i += 1
                    j += 1
                elif x < y:
                    i += 1
                else:
                    j += 1
    return total


def check_upper(grid: BlockGrid) -> None:
    for b in grid.blocks:
        if b.num_edges == 0:
            continue
        if b.row > b.col:
            raise ContractError(f"block {b.id} lies below the diagonal; grid is not upper-triangular")
        if b.row == b.col:
            src, dst = b.coo()
            if np.any(src >= dst):
                raise ContractError(f"diagonal block {b.id} has edges with u >= v")


def compose_triangle_lists(grid: BlockGrid) -> list[BlockList]:
    lists = []
    p = grid.p
    for i in range(p):
        for j in range(i, p):
            bk = grid.block(i, j)
            if bk.num_edges == 0:
                continue
            for x in range(j, p):
                bl, bm = grid.block(i, x), grid.block(j, x)
                if bl.num_edges and bm.num_edges:
                    lists.append(BlockList((bk, bl, bm)))
    return lists


def tc_spec(grid: BlockGrid) -> AlgorithmSpec:
    store = AttributeStore(grid.n, grid.m)
    n_t = store.add_counter("n_t")

    def kernel(bl, ctx):
        bk, bl_, bm = bl
        m_slo = bm.S.start

        def count_rows(lo, hi):
            return _count(
                bk.offsets, bk.adjacency, bk.D.start,
                bl_.offsets, bl_.adjacency, bm.offsets, bm.adjacency, m_slo, lo, hi,
            )

        atomic_add(n_t, 0, sum(ctx.chunks(len(bk.S), count_rows)))

    return AlgorithmSpec(
        after=lambda ctrl: False,
        host_kernel=kernel,
        device_kernel=kernel,
        composer=lambda: compose_triangle_lists(grid),
        list_size=3,
        attributes=store,
        name="tc",
    )


def prepare_triangle_grid(graph: Graph, p: int, method: str = "2d") -> tuple[Graph, BlockGrid]:
    """Degree-relabel ``graph`` and return it with its upper-triangular grid."""
    relabeled, perm = degree_relabel(graph)
    grid = upper_triangular_view(partition(relabeled, p, method))
    grid.meta["perm"] = perm
    return relabeled, grid


def triangle_count(graph: Graph, grid: BlockGrid, config: RunConfig | None = None) -> TriangleResult:
    check_upper(grid)
    store, stats = run(tc_spec(grid), grid, config)
    return TriangleResult(int(store["n_t"][0]), stats)
