"""The five kernels and a name-keyed registry used by the command line."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ..core import Graph
from ..partition import BlockGrid, partition
from .afforest import afforest_components
from .bfs import BFSResult, bfs, depths_from_parents
from .pagerank import PageRankResult, pagerank
from .sv import ComponentsResult, sv_components
from .tc import TriangleResult, prepare_triangle_grid, triangle_count

__all__ = [
    "pagerank",
    "sv_components",
    "afforest_components",
    "bfs",
    "triangle_count",
    "prepare_triangle_grid",
    "depths_from_parents",
    "PageRankResult",
    "ComponentsResult",
    "BFSResult",
    "TriangleResult",
    "REGISTRY",
    "Algorithm",
    "component_sizes",
]


def component_sizes(labels: np.ndarray) -> np.ndarray:
    _, counts = np.unique(labels, return_counts=True)
    return np.sort(counts)[::-1]


@dataclass(frozen=True)
class Algorithm:
    name: str
    execute: Callable[..., Any]
    summarize: Callable[[Any], dict]
    fingerprint: Callable[[Any], Any]
    triangular: bool = False
    needs_source: bool = False

    def prepare(self, graph: Graph, p: int, method: str = "2d") -> tuple[Graph, BlockGrid]:
        if self.triangular:
            return prepare_triangle_grid(graph, p, method)
        return graph, partition(graph, p, method)


def _pr_summary(res: PageRankResult) -> dict:
    top = np.argsort(-res.rank, kind="stable")[:10]
    return {
        "iterations": res.iterations,
        "rank_sum": float(res.rank.sum()),
        "top10": [[int(v), float(res.rank[v])] for v in top],
    }


def _cc_summary(res: ComponentsResult) -> dict:
    sizes = component_sizes(res.labels)
    return {"components": int(len(sizes)), "largest": int(sizes[0]) if len(sizes) else 0}


def _bfs_summary(res: BFSResult) -> dict:
    reached = res.depth[res.depth >= 0]
    hist = np.bincount(reached) if len(reached) else np.zeros(0, dtype=np.int64)
    return {
        "reached": int(len(reached)),
        "depth": int(reached.max()) if len(reached) else 0,
        "depth_histogram": hist.tolist(),
    }


def _canonical_labels(labels):
    # relabel by first occurrence so equal partitions compare equal
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    return tuple(first[inv].tolist())


REGISTRY: dict[str, Algorithm] = {
    "pagerank": Algorithm(
        "pagerank",
        lambda g, grid, cfg, **kw: pagerank(g, grid, cfg),
        _pr_summary,
        lambda r: r.rank.tobytes(),
    ),
    "sv": Algorithm(
        "sv",
        lambda g, grid, cfg, **kw: sv_components(g, grid, cfg),
        _cc_summary,
        lambda r: _canonical_labels(r.labels),
    ),
    "cc": Algorithm(
        "cc",
        lambda g, grid, cfg, **kw: afforest_components(g, grid, cfg),
        _cc_summary,
        lambda r: _canonical_labels(r.labels),
    ),
    "bfs": Algorithm(
        "bfs",
        lambda g, grid, cfg, source=0, **kw: bfs(g, grid, cfg, source=source),
        _bfs_summary,
        lambda r: r.depth.tobytes(),
        needs_source=True,
    ),
    "tc": Algorithm(
        "tc",
        lambda g, grid, cfg, **kw: triangle_count(g, grid, cfg),
        lambda r: {"triangles": r.count},
        lambda r: r.count,
        triangular=True,
    ),
}
