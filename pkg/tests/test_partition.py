import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockgraph.core import build_csr
from blockgraph.errors import ContractError
from blockgraph.generators import erdos_renyi, rmat
from blockgraph.partition import (
    bottleneck,
    build_blocks,
    default_parts,
    optimal_1d_cuts,
    partition,
    symmetric_cuts,
    upper_triangular_view,
)
from conftest import complete, path, star


def check_grid(graph, grid):
    """Conformality and an exact, disjoint edge cover."""
    assert grid.cuts[0] == 0 and grid.cuts[-1] == graph.n
    seen = []
    for blk in grid.blocks:
        r, c = divmod(blk.id, grid.p)
        assert (blk.row, blk.col) == (r, c)
        assert blk.S == grid.part_range(r) and blk.D == grid.part_range(c)
        s, d = blk.global_edges()
        seen.extend(zip(s.tolist(), d.tolist()))
    assert sum(b.num_edges for b in grid.blocks) == graph.m
    src, dst = graph.edge_arrays()
    assert sorted(seen) == sorted(zip(src.tolist(), dst.tolist()))


@pytest.mark.parametrize("p", [1, 2, 3, 5, 8])
def test_partition_covers_edges(p):
    g = rmat(7, 8, seed=p)
    for method in ("2d", "1d"):
        check_grid(g, partition(g, p, method))


def test_more_parts_than_vertices():
    g = path(3)
    grid = partition(g, 5)
    check_grid(g, grid)
    assert len(grid.cuts) == 6


def test_symmetric_cuts_balance_degree():
    g = complete(8)
    assert symmetric_cuts(g, 2).tolist() == [0, 4, 8]
    assert symmetric_cuts(g, 4).tolist() == [0, 2, 4, 6, 8]


def test_symmetric_cuts_empty_graph():
    g = build_csr(np.array([], dtype=np.int64), np.array([], dtype=np.int64), n=6)
    assert symmetric_cuts(g, 3).tolist() == [0, 2, 4, 6]


def test_build_blocks_rejects_bad_cuts():
    with pytest.raises(ContractError):
        build_blocks(path(4), [0, 3, 2, 4])
    with pytest.raises(ContractError):
        build_blocks(path(4), [0, 2])


def test_load_imbalance_of_star_is_high():
    g = star(64)
    assert partition(g, 4).load_imbalance() > 1.0
    assert partition(complete(4), 1).load_imbalance() == 1.0


def exhaustive_bottleneck(graph, p):
    best = None
    for inner in itertools.combinations_with_replacement(range(graph.n + 1), p - 1):
        val = bottleneck(graph, [0, *inner, graph.n])
        best = val if best is None else min(best, val)
    return best


def test_optimal_1d_matches_exhaustive_small():
    rng = np.random.default_rng(0)
    for n in range(1, 13):
        for p in range(1, 5):
            src = rng.integers(0, n, 2 * n)
            dst = rng.integers(0, n, 2 * n)
            g = build_csr(src, dst, n=n)
            cuts = optimal_1d_cuts(g, p)
            assert len(cuts) == p + 1
            assert np.all(np.diff(cuts) >= 0)
            assert bottleneck(g, cuts) == exhaustive_bottleneck(g, p)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 10_000))
def test_optimal_1d_property(n, p, seed):
    g = erdos_renyi(n, 0.4, seed=seed)
    assert bottleneck(g, optimal_1d_cuts(g, p)) == exhaustive_bottleneck(g, p)


def test_upper_triangular_view_keeps_u_lt_v():
    g = erdos_renyi(40, 0.2, seed=1)
    up = upper_triangular_view(partition(g, 3))
    assert up.upper
    assert up.m == g.m // 2
    for blk in up.blocks:
        s, d = blk.global_edges()
        assert np.all(s < d)
        if blk.row > blk.col:
            assert blk.num_edges == 0


def test_default_parts():
    assert default_parts(1) == 2
    assert default_parts(8) == 4
    assert default_parts(10_000) == 64
