import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blockgraph.core import (
    DESTINATION,
    SOURCE,
    AlgorithmSpec,
    AttributeStore,
    BlockList,
    LevelQueue,
    VertexInterval,
    build_csr,
    edges,
    get_interval,
    parallel_for,
    parallel_reduce,
    vertices,
)
from blockgraph.errors import ContractError
from blockgraph.partition import partition
from conftest import complete, graph_of, path


def test_build_csr_symmetrizes_and_dedupes():
    g = graph_of([(0, 1), (1, 0), (0, 1), (2, 2)], n=3)
    assert g.n == 3 and g.m == 2
    assert g.neighbors(0).tolist() == [1]
    assert g.neighbors(2).tolist() == []
    assert g.is_symmetrized


def test_build_csr_directed_keeps_orientation():
    g = graph_of([(0, 1), (1, 2)], n=3, symmetrize=False)
    assert g.m == 2
    assert not g.is_symmetrized
    assert g.neighbors(1).tolist() == [2]


def test_build_csr_sorted_rows():
    rng = np.random.default_rng(4)
    src, dst = rng.integers(0, 30, 200), rng.integers(0, 30, 200)
    g = build_csr(src, dst, n=30)
    for u in range(g.n):
        nb = g.neighbors(u)
        assert np.all(np.diff(nb) > 0)
    g.validate()


def test_graph_is_immutable(k3):
    with pytest.raises(ValueError):
        k3.offsets[0] = 5


def test_graph_equality(k3):
    assert k3 == complete(3)
    assert k3 != path(3)


def test_vertex_interval_mapping():
    iv = VertexInterval(10, 15)
    assert len(iv) == 5
    assert 12 in iv and 15 not in iv
    assert iv.to_global(2) == 12 and iv.to_local(14) == 4
    assert list(iv.local_ids) == [0, 1, 2, 3, 4]


def test_block_edges_and_sides(k4):
    grid = partition(k4, 2)
    blk = grid.block(0, 1)
    assert vertices(blk, SOURCE) == blk.S
    assert vertices(blk, DESTINATION) == blk.D
    for u in range(len(blk.S)):
        got = blk.D.start + edges(blk, u)
        want = [v for v in k4.neighbors(blk.S.start + u) if v in blk.D]
        assert got.tolist() == want
    with pytest.raises(IndexError):
        edges(blk, len(blk.S))


def test_block_ccoo_skips_empty_rows():
    g = graph_of([(0, 3), (2, 3)], n=4, symmetrize=False)
    blk = partition(g, 1).blocks[0]
    srcs, runs, dst = blk.ccoo()
    assert srcs.tolist() == [0, 2]
    assert runs.tolist() == [1, 1]
    assert dst.tolist() == [3, 3]


def test_block_copy_is_independent(k4):
    blk = partition(k4, 1).blocks[0]
    cp = blk.copy()
    assert cp.nbytes == blk.nbytes
    assert not np.shares_memory(cp.adjacency, blk.adjacency)


def test_block_list_footprint_counts_distinct_blocks(k4):
    grid = partition(k4, 2)
    b = grid.block(0, 0)
    bl = BlockList((b, b, grid.block(1, 1)))
    assert bl.footprint == b.nbytes + grid.block(1, 1).nbytes


def test_attribute_views_alias_storage(k4):
    grid = partition(k4, 2)
    store = AttributeStore(4, k4.m)
    x = store.add_vertex("x", np.int64)
    blk = grid.block(0, 1)
    view = store.view("x", blk, DESTINATION)
    view[:] = 7
    assert x[blk.D.start : blk.D.stop].tolist() == [7] * len(blk.D)
    w = store.add_edge("w")
    ev = store.edge_view("w", blk)
    ev[0] = 2.5
    assert w[blk.edge_index[0]] == 2.5


def test_attribute_store_globals():
    store = AttributeStore(3, 0)
    c = store.add_counter("c")
    assert c.shape == (1,)
    store["flag"] = True
    assert store["flag"] is True
    assert store.nbytes() >= 8


def test_level_queue_merges_per_part():
    q = LevelQueue(10, [0, 4, 10])
    q.seed([5])
    assert q.frontier(1).tolist() == [5] and q.frontier(0).size == 0
    assert q.in_frontier[5]
    q.push(0, np.array([7, 1]))
    q.push(1, np.array([3]))
    assert q.advance() == 3
    assert q.frontier(0).tolist() == [1, 3]
    assert q.frontier(1).tolist() == [7]
    assert not q.in_frontier[5] and q.in_frontier[7]


def test_level_queue_rejects_duplicates():
    q = LevelQueue(4, [0, 4])
    q.push(0, np.array([1]))
    q.push(1, np.array([1]))
    with pytest.raises(ContractError):
        q.advance()


def test_algorithm_spec_needs_a_kernel():
    with pytest.raises(ContractError):
        AlgorithmSpec(after=lambda c: False)


def test_algorithm_spec_rejects_composer_with_predicate():
    with pytest.raises(ContractError):
        AlgorithmSpec(after=lambda c: False, host_kernel=lambda b, c: None,
                      predicate=lambda b: True, composer=lambda: [])


def test_get_interval_examples():
    assert get_interval(0, 3, 10) == (0, 3)
    assert get_interval(2, 3, 10) == (6, 10)
    assert get_interval(0, 4, 0) == (0, 0)
    with pytest.raises(ValueError):
        get_interval(3, 3, 10)


@given(st.integers(1, 64), st.integers(0, 10_000))
def test_get_interval_tiles(t, n):
    spans = [get_interval(i, t, n) for i in range(t)]
    assert spans[0][0] == 0 and spans[-1][1] == n
    for (a, b), (c, _) in zip(spans, spans[1:]):
        assert b == c and a <= b
    sizes = [b - a for a, b in spans]
    assert max(sizes) - min(sizes) <= 1


def test_parallel_for_and_reduce():
    from concurrent.futures import ThreadPoolExecutor

    out = np.zeros(100, dtype=np.int64)

    def body(i):
        out[i] = i

    with ThreadPoolExecutor(4) as pool:
        parallel_for(100, body, width=4, pool=pool)
        assert out.tolist() == list(range(100))
        total = parallel_reduce(100, lambda i: i, 0, width=4, pool=pool)
    assert total == sum(range(100))
    cell = np.zeros(1, dtype=np.int64)
    parallel_reduce(10, lambda i: 1, 0, cell=cell)
    assert cell[0] == 10
