import numpy as np
import pytest

from blockgraph.core import build_csr


def graph_of(edges, n=None, **kw):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return build_csr(edges[:, 0], edges[:, 1], n=n, **kw)


def complete(k):
    return graph_of([(i, j) for i in range(k) for j in range(i + 1, k)], n=k)


def path(k):
    return graph_of([(i, i + 1) for i in range(k - 1)], n=k)


def star(k):
    return graph_of([(0, i) for i in range(1, k)], n=k)


@pytest.fixture
def k3():
    return complete(3)


@pytest.fixture
def k4():
    return complete(4)


@pytest.fixture
def p4():
    return path(4)


@pytest.fixture
def two_k2():
    return graph_of([(0, 1), (2, 3)], n=4)
