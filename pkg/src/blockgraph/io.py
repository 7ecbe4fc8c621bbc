"""Edge-list ingestion, the binary graph format, and degree relabeling.

ASCII input is split into byte chunks that are parsed concurrently; the
concatenated records are then sorted globally, so the result does not
depend on the chunk count.  Weights in a third column are validated and
then DISCARDED: none of the kernels consume edge weights.

Binary layout (all little-endian)::

    magic      4 bytes  b"PGBB"
    version    u64      1
    n          u64
    m          u64
    id_width   u8       4 or 8
    offsets    (n + 1) x u64
    adjacency  m x id_width
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from numba import njit

from .core import ID_DTYPE, Graph, build_csr
from .errors import (
    BadMagicError,
    ParseError,
    RangeError,
    TruncatedFileError,
    UnsupportedVersionError,
)

__all__ = [
    "parse_edge_list",
    "write_binary",
    "read_binary",
    "load_graph",
    "write_edge_list",
    "degree_relabel",
    "MAGIC",
    "VERSION",
]

MAGIC = b"PGBB"
VERSION = 1
_HEADER = struct.Struct("<4sQQQB")

_OK, _MALFORMED, _OVERFLOW = 0, 1, 2
_INT64_MAX = np.iinfo(np.int64).max


@njit(cache=True)
def _is_space(c):
    return c == 32 or c == 9 or c == 13 or c == 11 or c == 12


@njit(nogil=True, cache=True)
def _parse_chunk(buf, start, stop, first_line, src, dst):
    """Parse ``buf[start:stop]`` (whole lines) into ``src``/``dst``.

    Returns ``(records, status, line_of_error)``.
    """
    count = 0
    line = first_line
    pos = start
    limit = np.int64(_INT64_MAX)
    while pos < stop:
        while pos < stop and _is_space(buf[pos]):
            pos += 1
        if pos >= stop:
            break
        c = buf[pos]
        if c == 10:
            pos += 1
            line += 1
            continue
        if c == 35 or c == 37:  # '#' or '%'
            while pos < stop and buf[pos] != 10:
                pos += 1
            continue
        ntok = 0
        while pos < stop and buf[pos] != 10:
            if ntok < 2:
                val = np.int64(0)
                digits = 0
                while pos < stop and not _is_space(buf[pos]) and buf[pos] != 10:
                    d = buf[pos] - 48
                    if d < 0 or d > 9:
                        return count, _MALFORMED, line
                    if val > (limit - d) // 10:
                        return count, _OVERFLOW, line
                    val = val * 10 + d
                    digits += 1
                    pos += 1
                if digits == 0:
                    return count, _MALFORMED, line
                if ntok == 0:
                    src[count] = val
                else:
                    dst[count] = val
            elif ntok == 2:
                # weight: accepted when it looks numeric, otherwise malformed
                seen = 0
                while pos < stop and not _is_space(buf[pos]) and buf[pos] != 10:
                    ch = buf[pos]
                    ok = (48 <= ch <= 57) or ch == 43 or ch == 45 or ch == 46 or ch == 101 or ch == 69
                    if not ok:
                        return count, _MALFORMED, line
                    seen += 1
                    pos += 1
            else:
                return count, _MALFORMED, line
            ntok += 1
            while pos < stop and _is_space(buf[pos]):
                pos += 1
        if ntok < 2:
            return count, _MALFORMED, line
        count += 1
    return count, _OK, line


def _next_newline(buf: np.ndarray, pos: int, end: int) -> int:
    step = 1 << 16
    while pos < end:
        hit = np.flatnonzero(buf[pos : min(pos + step, end)] == 10)
        if len(hit):
            return pos + int(hit[0])
        pos += step
    return end


def _chunk_starts(buf: np.ndarray, lo: int, hi: int, chunks: int) -> list[int]:
    """Byte offsets of chunk starts, each advanced to the start of a line."""
    starts = [lo]
    size = hi - lo
    for i in range(1, chunks):
        pos = lo + (i * size) // chunks
        pos = max(pos, starts[-1])
        if pos > lo and buf[pos - 1] != 10:
            pos = min(_next_newline(buf, pos, hi) + 1, hi)
        starts.append(pos)
    starts.append(hi)
    return starts


def _scan_header(buf: np.ndarray) -> tuple[int, int, tuple[int, int, int] | None]:
    """Locate the first data line and report it when it looks like ``n n m``.

    Returns ``(data_start, data_line, header)`` where ``header`` is set only
    for a candidate MatrixMarket size line (which is then excluded from the
    data range).
    """
    pos, line, end = 0, 1, len(buf)
    while pos < end:
        stop = _next_newline(buf, pos, end)
        text = bytes(buf[pos:stop]).strip()
        if text and text[:1] not in (b"#", b"%"):
            toks = text.split()
            if len(toks) == 3 and all(t.isdigit() for t in toks):
                r, c, k = (int(t) for t in toks)
                if r == c:
                    return min(stop + 1, end), line + 1, (r, c, k)
            return pos, line, None
        pos, line = stop + 1, line + 1
    return end, line, None


def _parse_range(buf, lo, hi, first_line, chunks) -> tuple[np.ndarray, np.ndarray]:
    starts = _chunk_starts(buf, lo, hi, chunks)
    spans = [(starts[i], starts[i + 1]) for i in range(chunks) if starts[i] < starts[i + 1]]
    newline_at = np.flatnonzero(buf[lo:hi] == 10) + lo

    def work(span):
        a, b = span
        line = first_line + int(np.searchsorted(newline_at, a))
        cap = int(np.count_nonzero(buf[a:b] == 10)) + 1
        s = np.empty(cap, dtype=ID_DTYPE)
        d = np.empty(cap, dtype=ID_DTYPE)
        got, status, err_line = _parse_chunk(buf, a, b, line, s, d)
        if status == _MALFORMED:
            raise ParseError("malformed edge record", err_line)
        if status == _OVERFLOW:
            raise RangeError(f"line {err_line}: vertex id does not fit in 64 bits")
        return s[:got], d[:got]

    if len(spans) <= 1:
        parts = [work(sp) for sp in spans]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            parts = list(pool.map(work, spans))
    if not parts:
        empty = np.empty(0, dtype=ID_DTYPE)
        return empty, empty
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def parse_edge_list(
    path,
    *,
    symmetrize: bool = True,
    dedupe: bool = True,
    drop_self_loops: bool = True,
    one_indexed: bool = False,
    chunks: int | None = None,
) -> Graph:
    """Read a whitespace-separated ``u v [w]`` edge list.

    Lines starting with ``#`` or ``%`` are comments.  A leading ``n n m``
    size line (MatrixMarket) is dropped when ``m`` matches the number of
    records and no id exceeds ``n``.
    """
    buf = np.fromfile(path, dtype=np.uint8)
    if chunks is None:
        chunks = max(1, min(os.cpu_count() or 1, len(buf) // (1 << 20) + 1))
    lo, first_line, header = _scan_header(buf)
    src, dst = _parse_range(buf, lo, len(buf), first_line, chunks)
    if header is not None:
        r, c, k = header
        max_id = int(max(src.max(initial=0), dst.max(initial=0)))
        if not (k == len(src) and max_id <= r):
            src = np.concatenate([np.array([r], dtype=ID_DTYPE), src])
            dst = np.concatenate([np.array([c], dtype=ID_DTYPE), dst])
    if one_indexed:
        if len(src) and min(src.min(), dst.min()) < 1:
            raise RangeError("vertex id 0 in a one-indexed file")
        src = src - 1
        dst = dst - 1
    return build_csr(src, dst, symmetrize=symmetrize, dedupe=dedupe, drop_self_loops=drop_self_loops)


def write_edge_list(graph: Graph, path, *, one_indexed: bool = False) -> None:
    """Write every stored (directed) edge as a ``u<TAB>v`` line."""
    src, dst = graph.edge_arrays()
    shift = 1 if one_indexed else 0
    np.savetxt(path, np.column_stack([src + shift, dst + shift]), fmt="%d", delimiter="\t")


def write_binary(graph: Graph, path) -> None:
    id_width = 4 if graph.n < 2**32 else 8
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, graph.n, graph.m, id_width))
        fh.write(np.ascontiguousarray(graph.offsets, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(graph.adjacency, dtype="<u4" if id_width == 4 else "<u8").tobytes())


def read_binary(path) -> Graph:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a PGBB graph file")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated")
    _, version, n, m, id_width = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if id_width not in (4, 8):
        raise UnsupportedVersionError(f"{path}: unsupported id width {id_width}")
    need = _HEADER.size + (n + 1) * 8 + m * id_width
    if len(data) < need:
        raise TruncatedFileError(f"{path}: expected {need} bytes, found {len(data)}")
    pos = _HEADER.size
    offsets = np.frombuffer(data, dtype="<u8", count=n + 1, offset=pos).astype(ID_DTYPE)
    pos += (n + 1) * 8
    adjacency = np.frombuffer(data, dtype="<u4" if id_width == 4 else "<u8", count=m, offset=pos)
    adjacency = adjacency.astype(ID_DTYPE)
    if offsets[0] != 0 or offsets[-1] != m or np.any(np.diff(offsets) < 0):
        raise TruncatedFileError(f"{path}: offsets are inconsistent")
    if m and adjacency.max() >= n:
        raise RangeError(f"{path}: adjacency entry exceeds n={n}")
    src = np.repeat(np.arange(n, dtype=ID_DTYPE), np.diff(offsets))
    from .core import _is_symmetric

    return Graph(int(n), int(m), offsets, adjacency, _is_symmetric(n, src, adjacency))


def is_binary_file(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def load_graph(path, **parse_options) -> Graph:
    """Read either format, picking by the magic bytes."""
    if is_binary_file(path):
        return read_binary(path)
    return parse_edge_list(path, **parse_options)


def degree_relabel(graph: Graph) -> tuple[Graph, np.ndarray]:
    """Renumber vertices by ascending degree, ties by original id.

    Returns the relabeled graph and ``perm`` with ``perm[old] = new``.
    """
    order = np.argsort(graph.degrees, kind="stable")
    perm = np.empty(graph.n, dtype=ID_DTYPE)
    perm[order] = np.arange(graph.n, dtype=ID_DTYPE)
    src, dst = graph.edge_arrays()
    relabeled = build_csr(
        perm[src], perm[dst], n=graph.n,
        symmetrize=False, dedupe=False, drop_self_loops=False,
    )
    return relabeled, perm
