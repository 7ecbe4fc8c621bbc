"""Seeded random graph generators used by tests, benchmarks and the CLI."""

from __future__ import annotations

import numpy as np

from .core import Graph, build_csr


def erdos_renyi(n: int, p: float, seed: int = 1) -> Graph:
    """G(n, p) on undirected pairs."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return build_csr(iu[keep], ju[keep], n=n)


def rmat(scale: int, edge_factor: int = 16, a: float = 0.57, b: float = 0.19, c: float = 0.19, seed: int = 1) -> Graph:
    """Recursive-matrix (Kronecker) graph with ``2**scale`` vertices.

    Draws ``edge_factor * 2**scale`` directed pairs, then symmetrizes and
    removes duplicates and self loops.  Vertex ids are shuffled so degree
    does not correlate with id.
    """
    rng = np.random.default_rng(seed)
    n = 1 << scale
    m = edge_factor * n
    src = np.zeros(m, dtype=np.int64)
    dst = np.zeros(m, dtype=np.int64)
    ab, abc = a + b, a + b + c
    for bit in range(scale):
        r = rng.random(m)
        down = r >= ab
        right = ((r >= a) & (r < ab)) | (r >= abc)
        src |= down.astype(np.int64) << bit
        dst |= right.astype(np.int64) << bit
    perm = rng.permutation(n)
    return build_csr(perm[src], perm[dst], n=n)
