import threading

import numpy as np
from numba import njit

from blockgraph.atomics import atomic_add, atomic_min, cas


def test_cas_semantics():
    a = np.array([5, 6], dtype=np.int64)
    assert cas(a, 0, 5, 9)
    assert a[0] == 9
    assert not cas(a, 1, 5, 9)
    assert a[1] == 6


def test_atomic_add_returns_previous():
    a = np.zeros(1, dtype=np.int64)
    assert atomic_add(a, 0, 3) == 0
    assert a[0] == 3
    f = np.zeros(1)
    atomic_add(f, 0, 0.5)
    assert f[0] == 0.5


def test_atomic_min():
    a = np.array([10], dtype=np.int64)
    atomic_min(a, 0, 4)
    atomic_min(a, 0, 8)
    assert a[0] == 4


@njit(nogil=True)
def _hammer(cell, counts, reps):
    for _ in range(reps):
        atomic_add(cell, 0, 1)
        while True:
            old = counts[0]
            if cas(counts, 0, old, old + 2):
                break


def test_atomics_are_exact_under_threads():
    cell = np.zeros(1, dtype=np.int64)
    counts = np.zeros(1, dtype=np.int64)
    reps = 200_000
    _hammer(cell, counts, 1)
    cell[:] = 0
    counts[:] = 0
    threads = [threading.Thread(target=_hammer, args=(cell, counts, reps)) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert cell[0] == 4 * reps
    assert counts[0] == 8 * reps
