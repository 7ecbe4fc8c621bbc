"""Afforest connected components (neighbor sampling, then finish).

Phase one links every vertex to its first ``neighbor_rounds`` neighbors
(compressing after each round), then samples vertices to guess the giant
component.  Phase two links the remaining neighbors of vertices outside
that component.  Phase one prefers device lanes, phase two host workers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..atomics import cas
from ..core import AlgorithmSpec, AttributeStore, Graph
from ..errors import ContractError
from ..partition import BlockGrid
from ..runtime import DEVICE_ONLY, HOST_ONLY, RunConfig, run
from .sv import ComponentsResult, compress

NEIGHBOR_ROUNDS = 2
SAMPLE_SIZE = 1024


@njit(nogil=True, cache=True)
def link(u, v, comp):
    p1 = comp[u]
    p2 = comp[v]
    while p1 != p2:
        high = max(p1, p2)
        low = p1 + p2 - high
        p_high = comp[high]
        if p_high == low:
            break
        if p_high == high and cas(comp, high, high, low):
            break
        p1 = comp[comp[high]]
        p2 = comp[low]


@njit(nogil=True, cache=True)
def _link_round(offsets, adjacency, base, s_lo, d_lo, comp, r, lo, hi):
    for lu in range(lo, hi):
        idx = r - base[lu]
        if 0 <= idx < offsets[lu + 1] - offsets[lu]:
            link(s_lo + lu, d_lo + adjacency[offsets[lu] + idx], comp)


@njit(nogil=True, cache=True)
def _link_rest(offsets, adjacency, base, s_lo, d_lo, comp, rounds, skip, lo, hi):
    linked = 0
    for lu in range(lo, hi):
        u = s_lo + lu
        if comp[u] == skip:
            continue
        first = offsets[lu] + max(0, rounds - base[lu])
        for e in range(first, offsets[lu + 1]):
            link(u, d_lo + adjacency[e], comp)
            linked += 1
    return linked


def row_offsets(grid: BlockGrid) -> dict[int, np.ndarray]:
    """Per block, how many of each source's neighbors sit in blocks to its left."""
    base = {}
    for i in range(grid.p):
        running = np.zeros(len(grid.part_range(i)), dtype=np.int64)
        for j in range(grid.p):
            blk = grid.block(i, j)
            base[blk.id] = running.copy()
            running += blk.degrees
    return base


def most_frequent_label(comp: np.ndarray, sample_size: int, rng: np.random.Generator) -> int:
    if len(comp) == 0:
        return -1
    picks = comp[rng.integers(0, len(comp), size=sample_size)]
    return int(np.bincount(picks).argmax())


def afforest_spec(
    graph: Graph,
    grid: BlockGrid,
    neighbor_rounds: int = NEIGHBOR_ROUNDS,
    sample_size: int = SAMPLE_SIZE,
    seed: int = 1,
) -> AlgorithmSpec:
    n = graph.n
    store = AttributeStore(n, graph.m)
    comp = store.add_vertex("comp", np.int64)
    comp[:] = np.arange(n)
    store["skip_component"] = -1
    base = row_offsets(grid)
    rng = np.random.default_rng(seed)
    # link0, compress, link1, compress, ..., finish, compress
    phases = [("link", r) for r in range(neighbor_rounds)] + [("finish", neighbor_rounds)]

    def phase(index):
        step, arg = phases[index // 2]
        return ("compress", arg) if index % 2 else (step, arg)

    def before(ctrl):
        step, _ = phase(ctrl.index)
        if step == "link":
            ctrl.prefer(DEVICE_ONLY)
        elif step == "finish":
            ctrl.prefer(HOST_ONLY)
            ctrl.stats.add("phase2_vertices", int(np.count_nonzero(comp != store["skip_component"])))

    def kernel(bl, ctx):
        step, arg = phase(ctx.iteration)
        if step == "compress":
            lo, hi = ctx.interval(n)
            ctx.chunks(hi - lo, lambda a, z: compress(comp, lo + a, lo + z))
            return
        b = bl[0]
        off, adj, s_lo, d_lo, bb = b.offsets, b.adjacency, b.S.start, b.D.start, base[b.id]
        if step == "link":
            ctx.chunks(len(b.S), lambda lo, hi: _link_round(off, adj, bb, s_lo, d_lo, comp, arg, lo, hi))
        else:
            skip = store["skip_component"]
            done = ctx.chunks(
                len(b.S), lambda lo, hi: _link_rest(off, adj, bb, s_lo, d_lo, comp, arg, skip, lo, hi)
            )
            ctx.count("phase2_edges", sum(done))

    def after(ctrl):
        step, _ = phase(ctrl.index)
        if step != "compress":
            return True
        if ctrl.index == 2 * neighbor_rounds - 1:
            store["skip_component"] = most_frequent_label(comp, sample_size, rng)
        return ctrl.index + 1 < 2 * len(phases)

    if neighbor_rounds == 0:
        store["skip_component"] = most_frequent_label(comp, sample_size, rng)

    return AlgorithmSpec(
        after=after,
        before=before,
        host_kernel=kernel,
        device_kernel=kernel,
        predicate=lambda bl: bl[0].num_edges > 0,
        attributes=store,
        name="cc",
    )


def afforest_components(
    graph: Graph, grid: BlockGrid, config: RunConfig | None = None, **params
) -> ComponentsResult:
    if grid.upper:
        raise ContractError("connected components need the full symmetric grid")
    if not graph.is_symmetrized:
        raise ContractError("afforest needs a symmetrized graph")
    params.setdefault("seed", config.seed if config is not None else 1)
    spec = afforest_spec(graph, grid, **params)
    store, stats = run(spec, grid, config)
    comp = store["comp"]
    compress(comp, 0, len(comp))
    stats.counters["skip_component"] = store["skip_component"]
    return ComponentsResult(comp, stats)
