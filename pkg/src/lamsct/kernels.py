"""Dense size-change-graph composition kernels.

A graph over ``n`` indexed names is an ``n×n`` int8 matrix: 0 no arc,
1 ``=``, 2 ``>``.  Composition takes, for each (x, z), the maximum over
intermediate y of ``max(A[x,y], B[y,z])`` where both are nonzero, which is
exactly "``>`` if any connecting path decreases, ``=`` if all are equal".

The numba kernels are used when numba imports and ``LAMSCT_DISABLE_NUMBA``
is unset or ``0``; otherwise the numpy versions are used.
"""
from __future__ import annotations

import os

import numpy as np

NONE, EQ_CODE, DEC_CODE = 0, 1, 2


def compose_batch_numpy(a: np.ndarray, bs: np.ndarray) -> np.ndarray:
    """``a ; bs[k]`` for every k.  ``a`` is (n, n), ``bs`` is (k, n, n)."""
    left = a[None, :, :, None]      # k, x, y, z
    right = bs[:, None, :, :]
    both = (left > 0) & (right > 0)
    return np.where(both, np.maximum(left, right), 0).max(axis=2).astype(np.int8)


def _compose_batch_py(a, bs, out):
    k, n, _ = bs.shape
    for j in range(k):
        for x in range(n):
            for y in range(n):
                ay = a[x, y]
                if ay == 0:
                    continue
                for z in range(n):
                    b = bs[j, y, z]
                    if b == 0:
                        continue
                    v = ay if ay > b else b
                    if v > out[j, x, z]:
                        out[j, x, z] = v
    return out


def _disabled() -> bool:
    return os.environ.get("LAMSCT_DISABLE_NUMBA", "0") not in ("", "0")


try:
    if _disabled():
        raise ImportError("disabled by LAMSCT_DISABLE_NUMBA")
    from numba import njit

    _compose_batch_jit = njit(cache=True, nogil=True)(_compose_batch_py)

    def compose_batch_numba(a: np.ndarray, bs: np.ndarray) -> np.ndarray:
        out = np.zeros(bs.shape, dtype=np.int8)
        return _compose_batch_jit(a, bs, out)

    BACKEND = "numba"
except ImportError:
    compose_batch_numba = None
    BACKEND = "numpy"


def compose_batch(a: np.ndarray, bs: np.ndarray) -> np.ndarray:
    if BACKEND == "numba":
        return compose_batch_numba(a, bs)
    return compose_batch_numpy(a, bs)


def compose_pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return compose_batch(a, b[None])[0]


def is_idempotent(m: np.ndarray) -> bool:
    return bool(np.array_equal(compose_pair(m, m), m))


def has_descent_loop(m: np.ndarray) -> bool:
    return bool((np.diagonal(m) == DEC_CODE).any())
