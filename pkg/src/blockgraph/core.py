"""Graphs, blocks, block-lists, attributes and the algorithm contract.

Everything a kernel touches lives here: the immutable :class:`Graph` and
:class:`Block` containers, the attribute store that holds algorithm state,
and the small API kernels are written against (``vertices``, ``edges``,
``get_interval`` and the parallel dispatch helpers).
"""

from __future__ import annotations

import operator
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .atomics import atomic_add, cas
from .errors import ContractError

__all__ = [
    "Graph",
    "VertexInterval",
    "Block",
    "BlockList",
    "AttributeStore",
    "AlgorithmSpec",
    "LevelQueue",
    "build_csr",
    "vertices",
    "edges",
    "get_interval",
    "parallel_for",
    "parallel_reduce",
    "atomic_add",
    "cas",
    "SOURCE",
    "DESTINATION",
]

SOURCE = "source"
DESTINATION = "destination"

ID_DTYPE = np.int64


# --------------------------------------------------------------------------
# Graph
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph in CSR form; every undirected edge is stored twice."""

    n: int
    m: int
    offsets: np.ndarray
    adjacency: np.ndarray
    is_symmetrized: bool = True

    def __post_init__(self):
        for arr in (self.offsets, self.adjacency):
            arr.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.adjacency, other.adjacency)
        )

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, symmetrized={self.is_symmetrized})"

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, u: int) -> np.ndarray:
        return self.adjacency[self.offsets[u] : self.offsets[u + 1]]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Directed edges as ``(src, dst)`` in CSR order."""
        src = np.repeat(np.arange(self.n, dtype=ID_DTYPE), self.degrees)
        return src, self.adjacency.astype(ID_DTYPE, copy=False)

    def validate(self) -> None:
        """Raise :class:`ContractError` unless every CSR invariant holds."""
        off, adj = self.offsets, self.adjacency
        if len(off) != self.n + 1 or off[0] != 0 or off[-1] != self.m or len(adj) != self.m:
            raise ContractError("CSR offsets do not frame the adjacency array")
        if np.any(np.diff(off) < 0):
            raise ContractError("CSR offsets must be non-decreasing")
        if self.m == 0:
            return
        if adj.min() < 0 or adj.max() >= self.n:
            raise ContractError("adjacency entry out of range")
        src, dst = self.edge_arrays()
        same_row = src[1:] == src[:-1]
        if np.any(same_row & (dst[1:] <= dst[:-1])):
            raise ContractError("adjacency runs must be strictly ascending")
        if np.any(src == dst):
            raise ContractError("self-loops are not allowed")
        if self.is_symmetrized and not _is_symmetric(self.n, src, dst):
            raise ContractError("graph is flagged symmetrized but is not")

    @classmethod
    def from_edges(cls, src, dst, n: int | None = None, **kwargs) -> "Graph":
        return build_csr(src, dst, n=n, **kwargs)


def _edge_keys(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return src.astype(np.int64) * np.int64(max(n, 1)) + dst.astype(np.int64)


def _is_symmetric(n: int, src: np.ndarray, dst: np.ndarray) -> bool:
    fwd = np.sort(_edge_keys(n, src, dst))
    rev = np.sort(_edge_keys(n, dst, src))
    return bool(np.array_equal(fwd, rev))


def build_csr(
    src,
    dst,
    n: int | None = None,
    *,
    symmetrize: bool = True,
    dedupe: bool = True,
    drop_self_loops: bool = True,
) -> Graph:
    """Sort an edge list into CSR.

    ``n`` defaults to ``max id + 1``.  With ``symmetrize`` every edge is
    mirrored; with ``dedupe`` repeated edges collapse to one.
    """
    src = np.asarray(src, dtype=ID_DTYPE).ravel()
    dst = np.asarray(dst, dtype=ID_DTYPE).ravel()
    if len(src) != len(dst):
        raise ValueError("src and dst must have equal length")
    if n is None:
        n = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
    if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise ContractError(f"edge endpoint outside [0, {n})")
    if drop_self_loops:
        keep = src != dst
        src, dst = src[keep], dst[keep]
    if symmetrize:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    if n < 2**31:
        keys = _edge_keys(n, src, dst)
        keys = np.unique(keys) if dedupe else np.sort(keys, kind="stable")
        src, dst = keys // max(n, 1), keys % max(n, 1)
    else:
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if dedupe and len(src):
            keep = np.ones(len(src), dtype=bool)
            keep[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
            src, dst = src[keep], dst[keep]
    offsets = np.zeros(n + 1, dtype=ID_DTYPE)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    sym = symmetrize or (len(src) == 0) or _is_symmetric(n, src, dst)
    return Graph(n, int(len(dst)), offsets, dst.astype(ID_DTYPE), bool(sym))


# --------------------------------------------------------------------------
# Blocks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VertexInterval:
    """Contiguous global vertex range ``[start, stop)``; local id = global - start."""

    start: int
    stop: int

    def __len__(self):
        return self.stop - self.start

    def __contains__(self, v):
        return self.start <= v < self.stop

    @property
    def local_ids(self) -> range:
        return range(0, self.stop - self.start)

    @property
    def global_ids(self) -> range:
        return range(self.start, self.stop)

    def to_global(self, local):
        return local + self.start

    def to_local(self, glob):
        return glob - self.start


@dataclass(frozen=True, eq=False)
class Block:
    """One tile of the adjacency matrix: edges from ``S`` into ``D``.

    ``offsets``/``adjacency`` are a CSR over local ids.  ``edge_index`` maps
    each stored edge to its position in the parent graph's adjacency array.
    """

    id: int
    row: int
    col: int
    S: VertexInterval
    D: VertexInterval
    offsets: np.ndarray
    adjacency: np.ndarray
    edge_index: np.ndarray | None = None

    @property
    def num_edges(self) -> int:
        return int(len(self.adjacency))

    @property
    def nbytes(self) -> int:
        """CSR footprint; what the device arena has to hold for this block."""
        return int(self.offsets.nbytes + self.adjacency.nbytes)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def edges(self, u: int) -> np.ndarray:
        if __debug__ and not 0 <= u < len(self.S):
            raise IndexError(f"local source {u} outside block {self.id} (|S|={len(self.S)})")
        return self.adjacency[self.offsets[u] : self.offsets[u + 1]]

    def coo(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(len(self.S), dtype=ID_DTYPE), self.degrees)
        return src, self.adjacency

    def ccoo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """COO with the source column run-length compressed.

        Returns ``(sources, run_lengths, destinations)`` where only sources
        owning at least one edge appear.
        """
        deg = self.degrees
        nz = np.flatnonzero(deg)
        return nz.astype(ID_DTYPE), deg[nz], self.adjacency

    def global_edges(self) -> tuple[np.ndarray, np.ndarray]:
        src, dst = self.coo()
        return src + self.S.start, dst + self.D.start

    def copy(self) -> "Block":
        return Block(
            self.id, self.row, self.col, self.S, self.D,
            self.offsets.copy(), self.adjacency.copy(), self.edge_index,
        )

    def __repr__(self):
        return (
            f"Block(id={self.id}, row={self.row}, col={self.col}, "
            f"S=[{self.S.start},{self.S.stop}), D=[{self.D.start},{self.D.stop}), "
            f"edges={self.num_edges})"
        )


def vertices(block: Block, side: str = SOURCE) -> VertexInterval:
    if side == SOURCE:
        return block.S
    if side == DESTINATION:
        return block.D
    raise ValueError(f"side must be {SOURCE!r} or {DESTINATION!r}, got {side!r}")


def edges(block: Block, u: int) -> np.ndarray:
    """Ascending local destination ids of local source ``u`` inside ``block``."""
    return block.edges(u)


@dataclass(eq=False)
class BlockList:
    """Ordered block references; the input of one task."""

    blocks: tuple[Block, ...]
    list_id: int = 0
    weight: float = 0.0

    def __post_init__(self):
        self.blocks = tuple(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, i) -> Block:
        return self.blocks[i]

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    @property
    def block_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.blocks)

    @property
    def num_edges(self) -> int:
        return sum(b.num_edges for b in self.blocks)

    @property
    def footprint(self) -> int:
        """Bytes of the distinct blocks referenced by this list."""
        seen = {}
        for b in self.blocks:
            seen[b.id] = b.nbytes
        return sum(seen.values())

    def __repr__(self):
        return f"BlockList(id={self.list_id}, blocks={list(self.block_ids)}, weight={self.weight})"


# --------------------------------------------------------------------------
# Attributes
# --------------------------------------------------------------------------


class AttributeStore:
    """Vertex, edge and global attributes of one algorithm run.

    Scalars that kernels update concurrently are stored as length-1 arrays
    ("counters") so the atomic primitives can address them.
    """

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self.vertex: dict[str, np.ndarray] = {}
        self.edge: dict[str, np.ndarray] = {}
        self.globals: dict[str, Any] = {}

    def add_vertex(self, name, dtype=np.float64, fill=0) -> np.ndarray:
        arr = np.full(self.n, fill, dtype=dtype)
        self.vertex[name] = arr
        return arr

    def add_edge(self, name, dtype=np.float64, fill=0) -> np.ndarray:
        arr = np.full(self.m, fill, dtype=dtype)
        self.edge[name] = arr
        return arr

    def add_counter(self, name, dtype=np.int64, value=0) -> np.ndarray:
        arr = np.full(1, value, dtype=dtype)
        self.globals[name] = arr
        return arr

    def __getitem__(self, name):
        for table in (self.vertex, self.globals, self.edge):
            if name in table:
                return table[name]
        raise KeyError(name)

    def __setitem__(self, name, value):
        self.globals[name] = value

    def view(self, name: str, block: Block, side: str = SOURCE) -> np.ndarray:
        """Vertex attribute restricted to the block's S or D interval (aliases storage)."""
        iv = vertices(block, side)
        return self.vertex[name][iv.start : iv.stop]

    def edge_view(self, name: str, block: Block) -> "EdgeAttributeView":
        if block.edge_index is None:
            raise ContractError(f"block {block.id} carries no edge index")
        return EdgeAttributeView(self.edge[name], block.edge_index)

    def nbytes(self) -> int:
        total = sum(a.nbytes for a in self.vertex.values())
        total += sum(a.nbytes for a in self.globals.values() if isinstance(a, np.ndarray))
        return int(total)


class EdgeAttributeView:
    """Edge attribute seen through one block's edge order."""

    def __init__(self, storage: np.ndarray, index: np.ndarray):
        self._storage = storage
        self._index = index

    def __len__(self):
        return len(self._index)

    def __getitem__(self, i):
        return self._storage[self._index[i]]

    def __setitem__(self, i, value):
        self._storage[self._index[i]] = value

    def __array__(self, dtype=None, copy=None):
        out = self._storage[self._index]
        return out if dtype is None else out.astype(dtype)


class LevelQueue:
    """Frontier of a level-synchronous traversal, bucketed by vertex part.

    Tasks deposit discovered vertices into per-task buffers; :meth:`advance`
    merges them into the next level.  ``current[i]`` is the frontier inside
    part ``i``, so ``Q(S_i)`` of block ``(i, j)`` is ``current[i]`` and
    ``Q(D_i)`` is ``current[j]``.
    """

    def __init__(self, n: int, cuts: Sequence[int]):
        self.n = n
        self.cuts = np.asarray(cuts, dtype=ID_DTYPE)
        self.parts = len(self.cuts) - 1
        empty = np.empty(0, dtype=ID_DTYPE)
        self.current: list[np.ndarray] = [empty] * self.parts
        self.in_frontier = np.zeros(n, dtype=np.bool_)
        self.n_q = np.zeros(1, dtype=np.int64)
        self._pending: dict[int, list[np.ndarray]] = {}

    def seed(self, vertices_: Sequence[int]) -> None:
        self._pending = {-1: [np.asarray(vertices_, dtype=ID_DTYPE)]}
        self.advance()

    def push(self, task_id: int, found: np.ndarray) -> None:
        # one key per task, so no two threads share a buffer
        self._pending.setdefault(task_id, []).append(found)

    def frontier(self, part: int) -> np.ndarray:
        return self.current[part]

    def size(self) -> int:
        return int(sum(len(q) for q in self.current))

    def all_vertices(self) -> np.ndarray:
        return np.concatenate(self.current) if self.parts else np.empty(0, dtype=ID_DTYPE)

    def advance(self) -> int:
        """Promote pending pushes to the current level; return the level size."""
        bufs = [a for chunks in self._pending.values() for a in chunks]
        self._pending = {}
        merged = np.sort(np.concatenate(bufs)) if bufs else np.empty(0, dtype=ID_DTYPE)
        if __debug__ and len(merged) > 1 and np.any(merged[1:] == merged[:-1]):
            raise ContractError("vertex pushed twice in one level")
        self.in_frontier[self.all_vertices()] = False
        self.in_frontier[merged] = True
        bounds = np.searchsorted(merged, self.cuts)
        self.current = [merged[bounds[i] : bounds[i + 1]] for i in range(self.parts)]
        return int(len(merged))


# --------------------------------------------------------------------------
# Algorithm contract
# --------------------------------------------------------------------------

Kernel = Callable[[BlockList, Any], None]


@dataclass
class AlgorithmSpec:
    """The user functors that define an algorithm.

    ``host_kernel``/``device_kernel`` receive ``(block_list, ctx)`` where
    ``ctx`` is the runtime's task context.  ``before``/``after`` receive the
    iteration control object; ``after`` decides whether to iterate again.
    """

    after: Callable[[Any], bool]
    host_kernel: Kernel | None = None
    device_kernel: Kernel | None = None
    predicate: Callable[[BlockList], bool] | None = None
    composer: Callable[[], list[BlockList]] | None = None
    before: Callable[[Any], None] | None = None
    estimator: Callable[[BlockList], float] | None = None
    list_size: int = 1
    attributes: AttributeStore | None = None
    atomic_writes: bool = True
    name: str = "algorithm"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.host_kernel is None and self.device_kernel is None:
            raise ContractError("an algorithm needs a host kernel, a device kernel, or both")
        if (self.predicate is None) == (self.composer is None):
            raise ContractError("exactly one of predicate / composer must be given")
        if self.after is None:
            raise ContractError("the termination hook is compulsory")
        if self.list_size < 1:
            raise ContractError("list_size must be >= 1")


# --------------------------------------------------------------------------
# Kernel-side helpers
# --------------------------------------------------------------------------


def get_interval(i: int, t: int, n: int) -> tuple[int, int]:
    """Slice ``i`` of ``t`` near-equal slices of ``range(n)`` as ``(lo, hi)``."""
    if t < 1 or not 0 <= i < t:
        raise ValueError(f"need 0 <= i < t, got i={i}, t={t}")
    return (i * n) // t, ((i + 1) * n) // t


def _chunk_bounds(count: int, width: int) -> list[tuple[int, int]]:
    width = max(1, min(width, count))
    return [get_interval(i, width, count) for i in range(width)]


def parallel_for(
    count: int,
    body: Callable[[int], None],
    *,
    width: int = 1,
    pool: Executor | None = None,
) -> None:
    """Call ``body(i)`` once for every ``i`` in ``range(count)``.

    With ``width == 1`` (the host flavour) the loop is sequential; otherwise
    the range is cut into ``width`` slices that run on ``pool``.
    """
    if width <= 1 or pool is None or count <= 1:
        for i in range(count):
            body(i)
        return

    def run(lo, hi):
        for i in range(lo, hi):
            body(i)

    futures = [pool.submit(run, lo, hi) for lo, hi in _chunk_bounds(count, width)]
    for f in futures:
        f.result()


def parallel_reduce(
    count: int,
    body: Callable[[int], Any],
    init: Any = 0,
    op: Callable[[Any, Any], Any] = operator.add,
    *,
    width: int = 1,
    pool: Executor | None = None,
    cell: np.ndarray | None = None,
):
    """Fold ``body(i)`` over ``range(count)`` with ``op``.

    When ``cell`` (a length-1 counter) is given and ``op`` is addition the
    total is also added into it atomically, mirroring a reduction variable.
    """

    def run(lo, hi):
        acc = init
        for i in range(lo, hi):
            acc = op(acc, body(i))
        return acc

    if width <= 1 or pool is None or count <= 1:
        total = run(0, count)
    else:
        parts = [pool.submit(run, lo, hi) for lo, hi in _chunk_bounds(count, width)]
        total = init
        for f in parts:
            total = op(total, f.result())
    if cell is not None:
        atomic_add(cell, 0, total)
    return total
