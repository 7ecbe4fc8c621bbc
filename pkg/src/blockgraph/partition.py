"""Conformal 2D block partitioning.

Rows and columns of the adjacency matrix share one cut vector, so block
``(i, j)`` holds the edges from part ``i`` into part ``j`` and block ids run
in row-major order (``id = row * p + col``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ID_DTYPE, Block, Graph, VertexInterval
from .errors import ContractError

__all__ = [
    "BlockGrid",
    "symmetric_cuts",
    "optimal_1d_cuts",
    "bottleneck",
    "build_blocks",
    "upper_triangular_view",
    "default_parts",
    "partition",
]


@dataclass(eq=False)
class BlockGrid:
    p: int
    cuts: np.ndarray
    blocks: list[Block]
    n: int
    m: int
    upper: bool = False
    meta: dict = field(default_factory=dict)

    def block(self, row: int, col: int) -> Block:
        return self.blocks[row * self.p + col]

    def part_range(self, i: int) -> VertexInterval:
        return VertexInterval(int(self.cuts[i]), int(self.cuts[i + 1]))

    def part_of(self, v):
        return np.searchsorted(self.cuts, v, side="right") - 1

    @property
    def edge_count(self) -> int:
        return sum(b.num_edges for b in self.blocks)

    def load_imbalance(self) -> float:
        """``max |E_i| * p^2 / m``; 1.0 is a perfectly even split."""
        if self.m == 0:
            return 1.0
        return max(b.num_edges for b in self.blocks) * self.p**2 / self.m

    def __repr__(self):
        return f"BlockGrid(p={self.p}, n={self.n}, m={self.m}, upper={self.upper})"


def default_parts(host_workers: int) -> int:
    return int(min(64, max(1, math.ceil(math.sqrt(2 * max(1, host_workers))))))


def _regularize(cuts: np.ndarray, n: int) -> np.ndarray:
    """Force ``cuts[0]=0``, ``cuts[-1]=n`` and strict growth where possible."""
    p = len(cuts) - 1
    if p > n:
        return np.minimum(np.arange(p + 1, dtype=ID_DTYPE), n)
    cuts = cuts.astype(ID_DTYPE).copy()
    cuts[0], cuts[p] = 0, n
    for j in range(1, p):
        cuts[j] = max(cuts[j], cuts[j - 1] + 1)
    for j in range(p - 1, 0, -1):
        cuts[j] = min(cuts[j], cuts[j + 1] - 1)
    return cuts


def symmetric_cuts(graph: Graph, p: int) -> np.ndarray:
    """Cut where the degree prefix sum first reaches ``j * W / p``.

    ``prefix[c]`` is the degree sum of vertices ``0..c-1``; cut ``j`` is the
    smallest ``c`` with ``prefix[c] >= j * W / p``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    weights = graph.degrees if graph.m > 0 else np.ones(graph.n, dtype=ID_DTYPE)
    prefix = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(weights, out=prefix[1:])
    total = int(prefix[-1])
    # compare prefix * p >= j * W in integers to stay exact
    targets = np.arange(p + 1, dtype=np.int64) * total
    raw = np.searchsorted(prefix * p, targets, side="left")
    return _regularize(raw, graph.n)


def bottleneck(graph: Graph, cuts) -> int:
    """Largest per-part out-degree sum under ``cuts``."""
    prefix = np.zeros(graph.n + 1, dtype=np.int64)
    np.cumsum(graph.degrees, out=prefix[1:])
    cuts = np.asarray(cuts)
    return int(np.max(prefix[cuts[1:]] - prefix[cuts[:-1]], initial=0))


def _greedy_parts(prefix: np.ndarray, limit: int, p: int) -> list[int] | None:
    """Left-to-right maximal parts of weight <= limit; None if > p parts."""
    n = len(prefix) - 1
    cuts = [0]
    while cuts[-1] < n:
        start = cuts[-1]
        nxt = int(np.searchsorted(prefix, prefix[start] + limit, side="right")) - 1
        if nxt <= start:
            return None
        cuts.append(nxt)
        if len(cuts) - 1 > p:
            return None
    return cuts


def optimal_1d_cuts(graph: Graph, p: int) -> np.ndarray:
    """Contiguous p-way split minimizing the heaviest part (exact).

    Binary search over the bottleneck value; each probe is a greedy sweep.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n = graph.n
    if p >= n:
        return _regularize(np.zeros(p + 1, dtype=ID_DTYPE), n)
    deg = graph.degrees
    prefix = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=prefix[1:])
    lo, hi = int(deg.max(initial=0)), int(prefix[-1])
    while lo < hi:
        mid = (lo + hi) // 2
        if _greedy_parts(prefix, mid, p) is not None:
            hi = mid
        else:
            lo = mid + 1
    cuts = _greedy_parts(prefix, lo, p)
    # pad with extra splits; splitting a part never raises its weight
    have = set(cuts)
    for c in range(1, n):
        if len(have) >= p + 1:
            break
        have.add(c)
    return np.array(sorted(have), dtype=ID_DTYPE)


def build_blocks(graph: Graph, cuts) -> BlockGrid:
    """Distribute every directed edge to block ``(part(u), part(v))``."""
    cuts = np.asarray(cuts, dtype=ID_DTYPE)
    p = len(cuts) - 1
    if p < 1 or cuts[0] != 0 or cuts[-1] != graph.n or np.any(np.diff(cuts) < 0):
        raise ContractError(f"invalid cut vector {cuts.tolist()} for n={graph.n}")
    src, dst = graph.edge_arrays()
    pu = np.searchsorted(cuts, src, side="right") - 1
    pv = np.searchsorted(cuts, dst, side="right") - 1
    bid = pu * p + pv
    # stable: CSR order (u, then v) is kept inside every block
    order = np.argsort(bid, kind="stable")
    bounds = np.searchsorted(bid[order], np.arange(p * p + 1))
    blocks = []
    for b in range(p * p):
        row, col = divmod(b, p)
        S = VertexInterval(int(cuts[row]), int(cuts[row + 1]))
        D = VertexInterval(int(cuts[col]), int(cuts[col + 1]))
        sel = order[bounds[b] : bounds[b + 1]]
        local_src = src[sel] - S.start
        offsets = np.zeros(len(S) + 1, dtype=ID_DTYPE)
        np.cumsum(np.bincount(local_src, minlength=len(S)), out=offsets[1:])
        adjacency = (dst[sel] - D.start).astype(ID_DTYPE)
        blocks.append(Block(b, row, col, S, D, offsets, adjacency, sel.astype(ID_DTYPE)))
    return BlockGrid(p, cuts, blocks, graph.n, graph.m)


def upper_triangular_view(grid: BlockGrid) -> BlockGrid:
    """Keep only edges ``(u, v)`` with ``u < v``."""
    blocks = []
    for blk in grid.blocks:
        if blk.row < blk.col:
            blocks.append(blk)
            continue
        if blk.row > blk.col or blk.num_edges == 0:
            keep = np.zeros(blk.num_edges, dtype=bool)
        else:
            src, dst = blk.coo()
            keep = src < dst
        src, dst = blk.coo()
        offsets = np.zeros(len(blk.S) + 1, dtype=ID_DTYPE)
        np.cumsum(np.bincount(src[keep], minlength=len(blk.S)), out=offsets[1:])
        eidx = None if blk.edge_index is None else blk.edge_index[keep]
        blocks.append(Block(blk.id, blk.row, blk.col, blk.S, blk.D, offsets, dst[keep].copy(), eidx))
    m = sum(b.num_edges for b in blocks)
    return BlockGrid(grid.p, grid.cuts, blocks, grid.n, m, upper=True, meta=dict(grid.meta))


def partition(graph: Graph, p: int, method: str = "2d") -> BlockGrid:
    if method == "2d":
        cuts = symmetric_cuts(graph, p)
    elif method == "1d":
        cuts = optimal_1d_cuts(graph, p)
    else:
        raise ValueError(f"unknown partitioner {method!r}")
    return build_blocks(graph, cuts)
