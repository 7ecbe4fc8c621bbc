import threading

import pytest

from blockgraph.core import AlgorithmSpec, AttributeStore, BlockList
from blockgraph.errors import ArenaCapacityError, ConfigError, ContractError, KernelError
from blockgraph.generators import rmat
from blockgraph.partition import partition
from blockgraph.runtime import (
    COLLABORATIVE,
    DEVICE,
    DEVICE_ONLY,
    HOST,
    HOST_ONLY,
    DeviceArena,
    RunConfig,
    compose_block_lists,
    estimate_and_sort,
    max_list_footprint,
    run,
)


@pytest.fixture(scope="module")
def grid():
    return partition(rmat(8, 8, seed=3), 4)


def recording_spec(iterations=1, **kw):
    seen = []
    lock = threading.Lock()
    store = AttributeStore(0, 0)

    def kernel(bl, ctx):
        with lock:
            seen.append((ctx.iteration, bl.block_ids, ctx.target))

    def after(ctrl):
        return ctrl.index + 1 < iterations

    spec = AlgorithmSpec(
        after=after,
        host_kernel=kernel,
        device_kernel=kernel,
        predicate=lambda bl: bl[0].num_edges > 0,
        attributes=store,
        **kw,
    )
    return spec, seen


def cfg(mode=COLLABORATIVE, workers=2, lanes=2, **kw):
    return RunConfig(mode=mode, host_workers=workers, device_lanes=lanes, device_lane_width=2, **kw)


@pytest.mark.parametrize("mode", [HOST_ONLY, DEVICE_ONLY, COLLABORATIVE])
def test_every_task_runs_exactly_once(grid, mode):
    spec, seen = recording_spec(iterations=3)
    _, stats = run(spec, grid, cfg(mode, lanes=0 if mode == HOST_ONLY else 2))
    nonempty = sorted(b.id for b in grid.blocks if b.num_edges)
    for it in range(3):
        ids = sorted(bids[0] for i, bids, _ in seen if i == it)
        assert ids == nonempty
    assert stats.iterations == 3
    assert stats.tasks_host + stats.tasks_device == 3 * len(nonempty)
    if mode == HOST_ONLY:
        assert stats.tasks_device == 0
    if mode == DEVICE_ONLY:
        assert stats.tasks_host == 0


def test_heaviest_task_goes_to_a_lane(grid):
    for workers in (1, 2, 8):
        spec, _ = recording_spec(iterations=2)
        _, stats = run(spec, grid, cfg(workers=workers, lanes=1))
        for claims in stats.claims:
            assert claims[0] == (0, DEVICE)


def test_cutoff_reserves_heavy_prefix(grid):
    spec, _ = recording_spec()
    _, stats = run(spec, grid, cfg(workers=4, lanes=1, cutoff_fraction=0.5))
    claims = stats.claims[0]
    reserved = -(-len(claims) // 2)
    assert all(target == DEVICE for idx, target in claims if idx < reserved)


def test_cutoff_without_lanes_is_rejected():
    with pytest.raises(ConfigError):
        RunConfig(mode=COLLABORATIVE, host_workers=2, device_lanes=0, cutoff_fraction=0.2)


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(mode="gpu")
    with pytest.raises(ConfigError):
        RunConfig(mode=HOST_ONLY, host_workers=0)
    with pytest.raises(ConfigError):
        RunConfig(mode=DEVICE_ONLY, device_lanes=0)


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("BLOCKGRAPH_HOST_WORKERS", "3")
    monkeypatch.setenv("BLOCKGRAPH_ARENA_BYTES", "4096")
    c = RunConfig()
    assert c.host_workers == 3 and c.arena_bytes == 4096
    monkeypatch.setenv("BLOCKGRAPH_DEVICE_LANES", "many")
    with pytest.raises(ConfigError):
        RunConfig()


def test_sort_is_heaviest_first_with_stable_ties(grid):
    spec, _ = recording_spec()
    tasks = estimate_and_sort(compose_block_lists(spec, grid), spec)
    keys = [(-t.weight, t.list.list_id) for t in tasks]
    assert keys == sorted(keys)
    assert [t.index for t in tasks] == list(range(len(tasks)))


def test_negative_estimate_is_a_contract_error(grid):
    spec, _ = recording_spec(estimator=lambda bl: -1.0)
    with pytest.raises(ContractError):
        run(spec, grid, cfg())


def test_compose_renumbers_lists(grid):
    spec, _ = recording_spec()
    lists = compose_block_lists(spec, grid)
    assert [bl.list_id for bl in lists] == list(range(len(lists)))


def test_kernel_failure_names_the_task(grid):
    def bad(bl, ctx):
        if bl[0].id == grid.block(0, 0).id:
            raise RuntimeError("boom")

    spec = AlgorithmSpec(after=lambda c: False, host_kernel=bad, device_kernel=bad,
                         predicate=lambda bl: True)
    for mode in (HOST_ONLY, DEVICE_ONLY, COLLABORATIVE):
        with pytest.raises(KernelError, match="boom") as info:
            run(spec, grid, cfg(mode, lanes=0 if mode == HOST_ONLY else 2))
        assert info.value.task is not None


def test_device_only_spec_runs_in_collaborative(grid):
    spec, seen = recording_spec()
    spec.host_kernel = None
    _, stats = run(spec, grid, cfg(workers=4, lanes=1))
    assert stats.tasks_host == 0 and stats.tasks_device == len(seen)
    with pytest.raises(ConfigError):
        run(spec, grid, cfg(HOST_ONLY, lanes=0))


def test_prefer_switches_mode_per_iteration(grid):
    modes = [DEVICE_ONLY, HOST_ONLY]
    spec, seen = recording_spec(iterations=2, before=lambda ctrl: ctrl.prefer(modes[ctrl.index]))
    run(spec, grid, cfg())
    assert {t for i, _, t in seen if i == 0} == {DEVICE}
    assert {t for i, _, t in seen if i == 1} == {HOST}


def test_prefer_is_ignored_outside_collaborative(grid):
    spec, seen = recording_spec(before=lambda ctrl: ctrl.prefer(DEVICE_ONLY))
    run(spec, grid, cfg(HOST_ONLY, lanes=0))
    assert {t for _, _, t in seen} == {HOST}


def test_max_iterations_guard(grid):
    spec, _ = recording_spec(iterations=100)
    with pytest.raises(KernelError, match="no convergence"):
        run(spec, grid, cfg(max_iterations=3))


def test_arena_evicts_and_respects_budget(grid):
    spec, _ = recording_spec(iterations=2)
    lists = compose_block_lists(spec, grid)
    budget = int(1.5 * max_list_footprint(lists))
    _, stats = run(spec, grid, cfg(DEVICE_ONLY, lanes=2, arena_bytes=budget))
    assert stats.evictions > 0
    assert 0 < stats.arena_high_water <= budget
    assert stats.bytes_copied >= sum(bl.footprint for bl in lists)


def test_arena_too_small_is_a_config_error(grid):
    spec, _ = recording_spec()
    with pytest.raises(ArenaCapacityError):
        run(spec, grid, cfg(DEVICE_ONLY, arena_bytes=16))


def test_arena_threshold_rule(grid):
    blocks = sorted((b for b in grid.blocks if b.num_edges), key=lambda b: b.nbytes)
    small, big = blocks[0], blocks[-1]
    arena = DeviceArena(big.nbytes + small.nbytes, threshold_fraction=0.9)
    first = arena.admit(BlockList((big,)))
    assert first is not None and first[0] is not big
    # free space is below 90% of the budget, so even a fitting list waits
    assert arena.admit(BlockList((small,)), wait=False) is None
    arena.release()
    assert arena.admit(BlockList((small,))) is not None
    assert arena.evictions == 1
    arena.release()


def test_arena_reuses_resident_blocks(grid):
    blk = max(grid.blocks, key=lambda b: b.nbytes)
    arena = DeviceArena(10 * blk.nbytes)
    arena.admit(BlockList((blk,)))
    arena.release()
    arena.admit(BlockList((blk, blk)))
    arena.release()
    assert arena.blocks_copied == 1


def test_timeline_orders_copy_before_compute(grid):
    spec, _ = recording_spec()
    _, stats = run(spec, grid, cfg(DEVICE_ONLY, lanes=1))
    pos = {}
    for seq, who, kind, idx, _ in stats.timeline:
        pos.setdefault((idx, kind), seq)
    for idx in {e[3] for e in stats.timeline}:
        assert pos[(idx, "copy_end")] < pos[(idx, "compute_start")]


def test_sync_bytes_counted_only_with_device_work(grid):
    spec, _ = recording_spec()
    spec.attributes.add_vertex("x")
    _, host_stats = run(spec, grid, cfg(HOST_ONLY, lanes=0))
    assert host_stats.sync_bytes == 0
    spec, _ = recording_spec()
    spec.attributes.add_counter("c")
    _, dev_stats = run(spec, grid, cfg(DEVICE_ONLY))
    assert dev_stats.sync_bytes > 0


def test_stats_dict_is_plain(grid):
    spec, _ = recording_spec()
    _, stats = run(spec, grid, cfg())
    d = stats.as_dict()
    assert "timeline" not in d and d["iterations"] == 1
    assert len(stats.iteration_seconds) == 1 and stats.kernel_seconds >= stats.iteration_seconds[0]
