"""Shiloach-Vishkin connected components.

Even iterations hook (the larger of two adjacent roots is attached under
the smaller one with a compare-and-swap), odd iterations pointer-jump every
vertex to its root.  The run ends after a hook round with no hooks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..atomics import atomic_add, cas
from ..core import AlgorithmSpec, AttributeStore, Graph
from ..errors import ContractError
from ..partition import BlockGrid
from ..runtime import DEVICE_ONLY, HOST_ONLY, RunConfig, RunStats, run


class ComponentsResult(NamedTuple):
    labels: np.ndarray
    stats: RunStats


@njit(nogil=True, cache=True)
def _hook(offsets, adjacency, s_lo, d_lo, C, lo, hi):
    hooks = 0
    for lu in range(lo, hi):
        u = s_lo + lu
        for e in range(offsets[lu], offsets[lu + 1]):
            v = d_lo + adjacency[e]
            cu = C[u]
            cv = C[v]
            r1 = max(cu, cv)
            r2 = min(cu, cv)
            if r1 == r2:
                continue
            if C[r1] == r1 and cas(C, r1, r1, r2):
                hooks += 1
    return hooks


@njit(nogil=True, cache=True)
def compress(C, lo, hi):
    """Pointer-jump ``C[lo:hi]`` until each entry points at a root."""
    for x in range(lo, hi):
        while C[x] != C[C[x]]:
            C[x] = C[C[x]]


def sv_spec(graph: Graph, grid: BlockGrid) -> AlgorithmSpec:
    n = graph.n
    store = AttributeStore(n, graph.m)
    C = store.add_vertex("C", np.int64)
    C[:] = np.arange(n)
    H = store.add_counter("H")
    store["hook_rounds"] = 0

    def before(ctrl):
        if ctrl.index % 2 == 0:
            H[0] = 0
            ctrl.prefer(DEVICE_ONLY)
        else:
            ctrl.prefer(HOST_ONLY)

    def kernel(bl, ctx):
        if ctx.iteration % 2 == 0:
            b = bl[0]
            parts = ctx.chunks(
                len(b.S), lambda lo, hi: _hook(b.offsets, b.adjacency, b.S.start, b.D.start, C, lo, hi)
            )
            atomic_add(H, 0, sum(parts))
        else:
            lo, hi = ctx.interval(n)
            ctx.chunks(hi - lo, lambda a, z: compress(C, lo + a, lo + z))

    def after(ctrl):
        if ctrl.index % 2 == 0:
            store["hook_rounds"] += 1
            return int(H[0]) > 0
        return True

    return AlgorithmSpec(
        after=after,
        before=before,
        host_kernel=kernel,
        device_kernel=kernel,
        predicate=lambda bl: bl[0].num_edges > 0,
        attributes=store,
        atomic_writes=False,
        name="sv",
    )


def sv_components(graph: Graph, grid: BlockGrid, config: RunConfig | None = None) -> ComponentsResult:
    if grid.upper:
        raise ContractError("connected components need the full symmetric grid")
    spec = sv_spec(graph, grid)
    store, stats = run(spec, grid, config)
    C = store["C"]
    compress(C, 0, len(C))
    stats.counters["hook_rounds"] = store["hook_rounds"]
    return ComponentsResult(C, stats)
