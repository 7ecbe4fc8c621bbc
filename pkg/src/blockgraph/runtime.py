"""Block-list generation, scheduling and the iterative driver.

Tasks are sorted heaviest first.  Device lanes claim from the front of the
sorted sequence and host workers from the back; host workers never cross
the cut-off.  Before a device lane runs a task it must copy the task's
blocks into the :class:`DeviceArena`, a byte-budgeted stand-in for device
memory; while a lane computes, it prefetches its next task's blocks on a
helper thread.
"""

from __future__ import annotations

import itertools
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from . import core
from .core import AlgorithmSpec, AttributeStore, Block, BlockList
from .errors import ArenaCapacityError, ConfigError, ContractError, KernelError
from .partition import BlockGrid

__all__ = [
    "HOST_ONLY",
    "DEVICE_ONLY",
    "COLLABORATIVE",
    "MODES",
    "RunConfig",
    "RunStats",
    "Task",
    "DeviceArena",
    "TaskContext",
    "IterationControl",
    "compose_block_lists",
    "estimate_and_sort",
    "run",
    "sync_globals",
    "max_list_footprint",
]

HOST_ONLY = "host_only"
DEVICE_ONLY = "device_only"
COLLABORATIVE = "collaborative"
MODES = (HOST_ONLY, DEVICE_ONLY, COLLABORATIVE)

HOST = "host"
DEVICE = "device"

COMPOSE_LIMIT = 10**7
_FENCE = threading.Lock()


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name}={raw!r} is not an integer") from None


def _cpu_count() -> int:
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    mode: str = COLLABORATIVE
    host_workers: int = field(default_factory=lambda: _env_int("BLOCKGRAPH_HOST_WORKERS", _cpu_count()))
    device_lanes: int = field(default_factory=lambda: _env_int("BLOCKGRAPH_DEVICE_LANES", 4))
    device_lane_width: int = field(default_factory=_cpu_count)
    cutoff_fraction: float = 0.0
    arena_bytes: int = field(default_factory=lambda: _env_int("BLOCKGRAPH_ARENA_BYTES", 1 << 31))
    threshold_fraction: float = 0.10
    seed: int = 1
    max_iterations: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.host_workers < 0 or self.device_lanes < 0 or self.device_lane_width < 1:
            raise ConfigError("worker, lane and width counts must be non-negative (width >= 1)")
        if not 0.0 <= self.cutoff_fraction <= 1.0:
            raise ConfigError("cutoff_fraction must lie in [0, 1]")
        if not 0.0 <= self.threshold_fraction < 1.0:
            raise ConfigError("threshold_fraction must lie in [0, 1)")
        if self.arena_bytes < 0:
            raise ConfigError("arena_bytes must be non-negative")
        if self.mode == HOST_ONLY and self.host_workers == 0:
            raise ConfigError("host_only mode needs at least one host worker")
        if self.mode == DEVICE_ONLY and self.device_lanes == 0:
            raise ConfigError("device_only mode needs at least one device lane")
        if self.mode == COLLABORATIVE:
            if self.host_workers == 0 and self.device_lanes == 0:
                raise ConfigError("no workers and no lanes")
            if self.device_lanes == 0 and self.cutoff_fraction > 0:
                raise ConfigError("a cut-off with no device lanes would starve the heaviest tasks")


@dataclass
class RunStats:
    iterations: int = 0
    tasks_host: int = 0
    tasks_device: int = 0
    tasks_per_iteration: list[int] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    bytes_copied: int = 0
    blocks_copied: int = 0
    evictions: int = 0
    arena_high_water: int = 0
    sync_bytes: int = 0
    copy_seconds: float = 0.0
    kernel_seconds: float = 0.0
    iteration_seconds: list[float] = field(default_factory=list)
    counters: dict[str, float] = field(default_factory=dict)
    claims: list[list[tuple[int, str]]] = field(default_factory=list)
    timeline: list[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._seq = itertools.count()

    def add(self, name: str, value) -> None:
        with self._lock:
            self.counters[name] = self.counters.get(name, 0) + value

    def event(self, who: str, kind: str, task_index: int, list_id: int) -> None:
        self.timeline.append((next(self._seq), who, kind, task_index, list_id))

    def as_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("timeline")
        out.pop("claims")
        return out


@dataclass
class Task:
    list: BlockList
    weight: float
    index: int = -1
    target: str = "either"


# --------------------------------------------------------------------------
# Device arena
# --------------------------------------------------------------------------


class DeviceArena:
    """Byte-budgeted block cache standing in for device memory.

    Admission copies the blocks a list needs and pins the list until
    :meth:`release`.  When the blocks do not fit, or free space has already
    dropped under ``threshold_fraction`` of the budget, the admitting lane
    waits until nothing is in flight and then evicts everything.
    """

    def __init__(self, budget_bytes: int, threshold_fraction: float = 0.10):
        self.budget = int(budget_bytes)
        self.threshold = threshold_fraction
        self.resident: dict[int, Block] = {}
        self.used = 0
        self.in_flight = 0
        self.high_water = 0
        self.bytes_copied = 0
        self.blocks_copied = 0
        self.evictions = 0
        self.copy_seconds = 0.0
        self._cond = threading.Condition()
        self._draining = False

    def _fits(self, need: int) -> bool:
        if self._draining:
            return False
        free = self.budget - self.used
        if need == 0:
            return True
        return need <= free and (self.used == 0 or free >= self.threshold * self.budget)

    def admit(self, block_list: BlockList, wait: bool = True) -> BlockList | None:
        """Return ``block_list`` rebound to arena copies, or None when ``wait`` is false and it would block."""
        footprint = block_list.footprint
        if footprint > self.budget:
            raise ArenaCapacityError(
                f"block-list {block_list.list_id} (blocks {list(block_list.block_ids)}) needs "
                f"{footprint} bytes but the arena holds {self.budget}"
            )
        with self._cond:
            while True:
                missing = {b.id: b for b in block_list if b.id not in self.resident}
                need = sum(b.nbytes for b in missing.values())
                if self._fits(need):
                    t0 = time.perf_counter()
                    for bid, blk in missing.items():
                        self.resident[bid] = blk.copy()
                    self.used += need
                    self.bytes_copied += need
                    self.blocks_copied += len(missing)
                    self.copy_seconds += time.perf_counter() - t0
                    self.high_water = max(self.high_water, self.used)
                    self.in_flight += 1
                    blocks = tuple(self.resident[b.id] for b in block_list)
                    return BlockList(blocks, block_list.list_id, block_list.weight)
                if not wait:
                    return None
                if self.in_flight == 0:
                    self.resident.clear()
                    self.used = 0
                    self.evictions += 1
                    self._draining = False
                    self._cond.notify_all()
                    continue
                self._draining = True
                self._cond.wait()

    def release(self) -> None:
        with self._cond:
            self.in_flight -= 1
            self._cond.notify_all()


def max_list_footprint(lists) -> int:
    return max((bl.footprint for bl in lists), default=0)


# --------------------------------------------------------------------------
# Composition and ordering
# --------------------------------------------------------------------------


def compose_block_lists(spec: AlgorithmSpec, grid: BlockGrid) -> list[BlockList]:
    """All block-lists of this iteration, numbered in composition order."""
    if spec.composer is not None:
        lists = list(spec.composer())
    else:
        k = spec.list_size
        total = len(grid.blocks) ** k
        if k * total > COMPOSE_LIMIT:
            raise ConfigError(
                f"enumerating {total} candidate lists of size {k} is too many; supply a composer"
            )
        pred = spec.predicate
        if k == 1:
            lists = [bl for bl in (BlockList((b,)) for b in grid.blocks) if pred(bl)]
        else:
            lists = []
            for combo in itertools.product(grid.blocks, repeat=k):
                bl = BlockList(combo)
                if pred(bl):
                    lists.append(bl)
    for i, bl in enumerate(lists):
        bl.list_id = i
    return lists


def estimate_and_sort(lists: list[BlockList], spec: AlgorithmSpec | None = None) -> list[Task]:
    """Weigh every list and order heaviest first (ties by list id)."""
    est = spec.estimator if spec is not None else None
    tasks = []
    for bl in lists:
        w = float(est(bl)) if est is not None else float(bl.num_edges)
        if w < 0 or math.isnan(w):
            raise ContractError(f"estimator returned {w} for list {bl.list_id}")
        bl.weight = w
        tasks.append(Task(bl, w))
    tasks.sort(key=lambda t: (-t.weight, t.list.list_id))
    for i, t in enumerate(tasks):
        t.index = i
    return tasks


# --------------------------------------------------------------------------
# Kernel and hook contexts
# --------------------------------------------------------------------------


class TaskContext:
    """What a kernel sees about where and how it runs."""

    def __init__(self, target, width, pool, iteration, task_index, num_tasks, store, stats, worker):
        self.target = target
        self.width = width
        self.pool = pool
        self.iteration = iteration
        self.task_index = task_index
        self.num_tasks = num_tasks
        self.store = store
        self.stats = stats
        self.worker = worker

    @property
    def on_device(self) -> bool:
        return self.target == DEVICE

    def interval(self, n: int) -> tuple[int, int]:
        return core.get_interval(self.task_index, self.num_tasks, n)

    def parallel_for(self, count, body):
        core.parallel_for(count, body, width=self.width, pool=self.pool)

    def parallel_reduce(self, count, body, init=0, op=None, cell=None):
        kwargs = {} if op is None else {"op": op}
        return core.parallel_reduce(count, body, init, width=self.width, pool=self.pool, cell=cell, **kwargs)

    def chunks(self, count: int, fn: Callable[[int, int], Any], grain: int = 4096) -> list:
        """Run ``fn(lo, hi)`` over slices of ``range(count)``; one slice on the host."""
        width = 1 if self.pool is None else min(self.width, max(1, count // grain))
        if width <= 1:
            return [fn(0, count)]
        bounds = [core.get_interval(i, width, count) for i in range(width)]
        futures = [self.pool.submit(fn, lo, hi) for lo, hi in bounds]
        return [f.result() for f in futures]

    def count(self, name: str, value) -> None:
        self.stats.add(name, value)


class IterationControl:
    """Handed to the before/after hooks of every iteration."""

    def __init__(self, index, mode, config, stats, store, grid):
        self.index = index
        self.mode = mode
        self.config = config
        self.stats = stats
        self.store = store
        self.grid = grid

    def can_use(self, mode: str) -> bool:
        if mode == HOST_ONLY:
            return self.config.host_workers > 0
        if mode == DEVICE_ONLY:
            return self.config.device_lanes > 0
        return True

    def prefer(self, mode: str) -> None:
        """Switch this iteration to ``mode`` when running collaboratively and it is available."""
        if self.config.mode == COLLABORATIVE and self.can_use(mode):
            self.mode = mode


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------


class _TaskQueue:
    def __init__(self, tasks: list[Task], host_floor: int):
        self.tasks = tasks
        self.front = 0
        self.back = len(tasks) - 1
        self.floor = host_floor
        self._lock = threading.Lock()

    def claim_front(self) -> Task | None:
        with self._lock:
            if self.front <= self.back:
                self.front += 1
                return self.tasks[self.front - 1]
            return None

    def claim_back(self) -> Task | None:
        with self._lock:
            if self.back >= max(self.front, self.floor):
                self.back -= 1
                return self.tasks[self.back + 1]
            return None


class _Dispatcher:
    def __init__(self, spec: AlgorithmSpec, config: RunConfig, arena: DeviceArena, stats: RunStats):
        self.spec = spec
        self.config = config
        self.arena = arena
        self.stats = stats
        self._pool: ThreadPoolExecutor | None = None
        self._lane_pools: dict[int, ThreadPoolExecutor] = {}
        self._copy_pools: dict[int, ThreadPoolExecutor] = {}
        self._lock = threading.Lock()

    def close(self):
        for pool in [self._pool, *self._lane_pools.values(), *self._copy_pools.values()]:
            if pool is not None:
                pool.shutdown(wait=True)

    def _lane_pool(self, lane):
        if self.config.device_lane_width <= 1:
            return None
        with self._lock:
            if lane not in self._lane_pools:
                self._lane_pools[lane] = ThreadPoolExecutor(
                    self.config.device_lane_width, thread_name_prefix=f"lane{lane}"
                )
            return self._lane_pools[lane]

    def _copy_pool(self, lane):
        with self._lock:
            if lane not in self._copy_pools:
                self._copy_pools[lane] = ThreadPoolExecutor(1, thread_name_prefix=f"copy{lane}")
            return self._copy_pools[lane]

    def dispatch(self, tasks: list[Task], mode: str, ctrl: IterationControl) -> tuple[int, int]:
        cfg = self.config
        workers = cfg.host_workers if mode in (HOST_ONLY, COLLABORATIVE) else 0
        if self.spec.host_kernel is None:
            workers = 0
        lanes = cfg.device_lanes if mode in (DEVICE_ONLY, COLLABORATIVE) else 0
        if mode == HOST_ONLY:
            floor = 0
        elif mode == DEVICE_ONLY:
            floor = len(tasks)
        else:
            floor = math.ceil(cfg.cutoff_fraction * len(tasks))
            if lanes > 0:
                floor = max(floor, 1)
        if workers == 0 and lanes == 0:
            raise ConfigError(f"mode {mode} has nobody to run tasks")
        if lanes == 0 and floor > 0 and tasks:
            raise ConfigError("tasks reserved for device lanes but no lanes are available")
        queue = _TaskQueue(tasks, floor)
        self._abort = False
        self._error = None
        self._done = {HOST: 0, DEVICE: 0}
        self._claims: list[tuple[int, str]] = []
        self._ctrl = ctrl
        self._num_tasks = len(tasks)

        loops = [(self._host_loop, (queue, w)) for w in range(workers)]
        loops += [(self._lane_loop, (queue, ln)) for ln in range(lanes)]
        if not tasks:
            loops = []
        if len(loops) == 1:
            fn, args = loops[0]
            fn(*args)
        elif loops:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(cfg.host_workers + cfg.device_lanes, thread_name_prefix="bg")
            futures = [self._pool.submit(fn, *args) for fn, args in loops]
            for f in futures:
                f.result()
        if self._error is not None:
            exc, task, target = self._error
            if isinstance(exc, ConfigError):
                raise exc
            raise KernelError(
                f"{target} task {task.list.list_id} (blocks {list(task.list.block_ids)}, "
                f"iteration {ctrl.index}) failed: {exc!r}",
                task,
            ) from exc
        self._claims.sort()
        self.stats.claims.append(self._claims)
        return self._done[HOST], self._done[DEVICE]

    def _context(self, target, width, pool, task, who):
        return TaskContext(
            target, width, pool, self._ctrl.index, task.list.list_id, self._num_tasks,
            self.spec.attributes, self.stats, who,
        )

    def _fail(self, exc, task, target):
        with self._lock:
            if self._error is None:
                self._error = (exc, task, target)
            self._abort = True

    def _finish(self, task, target):
        with self._lock:
            self._done[target] += 1
            self._claims.append((task.index, target))

    def _host_loop(self, queue: _TaskQueue, worker: int):
        kernel = self.spec.host_kernel or self.spec.device_kernel
        who = f"host{worker}"
        while not self._abort:
            task = queue.claim_back()
            if task is None:
                return
            task.target = HOST
            self.stats.event(who, "compute_start", task.index, task.list.list_id)
            try:
                if self.spec.host_kernel is None:
                    raise ContractError("host worker claimed a task but no host kernel exists")
                kernel(task.list, self._context(HOST, 1, None, task, who))
            except Exception as exc:  # surfaced by dispatch() with task identity
                self._fail(exc, task, HOST)
                return
            self.stats.event(who, "compute_end", task.index, task.list.list_id)
            self._finish(task, HOST)

    def _run_on_lane(self, task, resident, lane, who):
        pool = self._lane_pool(lane)
        if self.spec.device_kernel is not None:
            ctx = self._context(DEVICE, self.config.device_lane_width, pool, task, who)
            kernel = self.spec.device_kernel
        else:
            ctx = self._context(DEVICE, 1, None, task, who)
            kernel = self.spec.host_kernel
        self.stats.event(who, "compute_start", task.index, task.list.list_id)
        kernel(resident, ctx)
        self.stats.event(who, "compute_end", task.index, task.list.list_id)

    def _admit(self, task, who, wait):
        self.stats.event(who, "copy_start", task.index, task.list.list_id)
        resident = self.arena.admit(task.list, wait=wait)
        if resident is not None:
            self.stats.event(who, "copy_end", task.index, task.list.list_id)
        return resident

    def _lane_loop(self, queue: _TaskQueue, lane: int):
        who = f"lane{lane}"
        cur = queue.claim_front()
        if cur is None:
            return
        cur.target = DEVICE
        try:
            resident = self._admit(cur, who, True)
        except Exception as exc:
            self._fail(exc, cur, DEVICE)
            return
        while cur is not None:
            nxt = None if self._abort else queue.claim_front()
            prefetch = None
            if nxt is not None:
                nxt.target = DEVICE
                prefetch = self._copy_pool(lane).submit(self._admit, nxt, who, False)
            try:
                self._run_on_lane(cur, resident, lane, who)
            except Exception as exc:
                self._fail(exc, cur, DEVICE)
                self.arena.release()
                if prefetch is not None and prefetch.exception() is None and prefetch.result() is not None:
                    self.arena.release()
                return
            self.arena.release()
            self._finish(cur, DEVICE)
            if nxt is None:
                return
            try:
                resident = prefetch.result()
                if resident is None:
                    resident = self._admit(nxt, who, True)
            except Exception as exc:
                self._fail(exc, nxt, DEVICE)
                return
            cur = nxt


def sync_globals(store: AttributeStore, stats: RunStats, device_active: bool) -> None:
    """Make device-side attribute writes visible before the after-hook runs.

    Lanes share the host address space, so this is a fence plus accounting
    of the bytes a real device would write back.
    """
    if not device_active or store is None:
        return
    with _FENCE:
        stats.sync_bytes += store.nbytes()


def _check_spec(spec: AlgorithmSpec, config: RunConfig) -> None:
    if config.mode == HOST_ONLY and spec.host_kernel is None:
        raise ConfigError(f"{spec.name}: host_only mode needs a host kernel")
    if config.mode == DEVICE_ONLY and spec.device_kernel is None:
        raise ConfigError(f"{spec.name}: device_only mode needs a device kernel")
    if config.mode == COLLABORATIVE and config.device_lanes == 0 and spec.host_kernel is None:
        raise ConfigError(f"{spec.name}: no device lanes and no host kernel")


def run(spec: AlgorithmSpec, grid: BlockGrid, config: RunConfig | None = None):
    """Iterate ``before -> compose -> sort -> dispatch -> sync -> after`` until ``after`` is false.

    Returns ``(attributes, stats)``.
    """
    config = config or RunConfig()
    _check_spec(spec, config)
    stats = RunStats()
    arena = DeviceArena(config.arena_bytes, config.threshold_fraction)
    dispatcher = _Dispatcher(spec, config, arena, stats)
    started = time.perf_counter()
    try:
        it = 0
        while True:
            t0 = time.perf_counter()
            ctrl = IterationControl(it, config.mode, config, stats, spec.attributes, grid)
            if spec.before is not None:
                spec.before(ctrl)
            if ctrl.mode not in MODES:
                raise ConfigError(f"iteration hook selected unknown mode {ctrl.mode!r}")
            if ctrl.mode != config.mode:
                _check_spec(spec, RunConfig(
                    mode=ctrl.mode, host_workers=config.host_workers,
                    device_lanes=config.device_lanes, arena_bytes=config.arena_bytes,
                ))
            lists = compose_block_lists(spec, grid)
            tasks = estimate_and_sort(lists, spec)
            on_host, on_device = dispatcher.dispatch(tasks, ctrl.mode, ctrl)
            if on_host + on_device != len(tasks):
                raise KernelError(
                    f"iteration {it}: {on_host + on_device} tasks ran but {len(tasks)} were composed"
                )
            stats.tasks_host += on_host
            stats.tasks_device += on_device
            stats.tasks_per_iteration.append(len(tasks))
            stats.modes.append(ctrl.mode)
            sync_globals(spec.attributes, stats, on_device > 0)
            again = bool(spec.after(ctrl))
            stats.iteration_seconds.append(time.perf_counter() - t0)
            it += 1
            if not again:
                break
            if config.max_iterations is not None and it >= config.max_iterations:
                raise KernelError(f"{spec.name}: no convergence after {it} iterations")
    finally:
        dispatcher.close()
    stats.iterations = it
    stats.kernel_seconds = time.perf_counter() - started
    stats.bytes_copied = arena.bytes_copied
    stats.blocks_copied = arena.blocks_copied
    stats.evictions = arena.evictions
    stats.arena_high_water = arena.high_water
    stats.copy_seconds = arena.copy_seconds
    return spec.attributes, stats
