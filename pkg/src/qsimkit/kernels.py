"""In-place state-vector kernels.

Every kernel walks a range ``[start, stop)`` of *group indices*; a group is
the set of ``2**k`` amplitudes one k-qubit matrix mixes. Groups are disjoint,
so splitting the range across threads changes nothing about the arithmetic
done per amplitude: results are bitwise identical for any worker count.
Kernels are compiled with ``nogil`` so a thread pool gets real parallelism.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

_CACHE = os.environ.get("QSIMKIT_NUMBA_CACHE", "1") != "0"


@njit(nogil=True, cache=_CACHE)
def _k1(state, m00, m01, m10, m11, q, start, stop):
    low = (1 << q) - 1
    bit = 1 << q
    for g in range(start, stop):
        i0 = ((g >> q) << (q + 1)) | (g & low)
        i1 = i0 | bit
        a = state[i0]
        b = state[i1]
        state[i0] = m00 * a + m01 * b
        state[i1] = m10 * a + m11 * b


@njit(nogil=True, cache=_CACHE)
def _k2(state, m, qa, qb, start, stop):
    lo = min(qa, qb)
    hi = max(qa, qb)
    ba = 1 << qa
    bb = 1 << qb
    for g in range(start, stop):
        i = ((g >> lo) << (lo + 1)) | (g & ((1 << lo) - 1))
        i = ((i >> hi) << (hi + 1)) | (i & ((1 << hi) - 1))
        i1 = i | bb
        i2 = i | ba
        i3 = i2 | bb
        a0 = state[i]
        a1 = state[i1]
        a2 = state[i2]
        a3 = state[i3]
        state[i] = m[0, 0] * a0 + m[0, 1] * a1 + m[0, 2] * a2 + m[0, 3] * a3
        state[i1] = m[1, 0] * a0 + m[1, 1] * a1 + m[1, 2] * a2 + m[1, 3] * a3
        state[i2] = m[2, 0] * a0 + m[2, 1] * a1 + m[2, 2] * a2 + m[2, 3] * a3
        state[i3] = m[3, 0] * a0 + m[3, 1] * a1 + m[3, 2] * a2 + m[3, 3] * a3


@njit(nogil=True, cache=_CACHE)
def _kg(state, m, offsets, sorted_qubits, chunk, start, stop):
    # Gather `chunk` groups into a (dim, chunk) buffer, multiply with BLAS,
    # scatter back. Every call sees the same buffer shape, so per-amplitude
    # arithmetic does not depend on how [start, stop) was split.
    dim = offsets.shape[0]
    buf = np.empty((dim, chunk), dtype=np.complex128)
    base = np.empty(chunk, dtype=np.int64)
    for c0 in range(start, stop, chunk):
        for t in range(chunk):
            i = c0 + t
            for q in sorted_qubits:
                i = ((i >> q) << (q + 1)) | (i & ((1 << q) - 1))
            base[t] = i
        for c in range(dim):
            o = offsets[c]
            for t in range(chunk):
                buf[c, t] = state[base[t] + o]
        out = np.dot(m, buf)
        for r in range(dim):
            o = offsets[r]
            for t in range(chunk):
                state[base[t] + o] = out[r, t]


GEMM_CHUNK = 256

_POOLS: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    pool = _POOLS.get(workers)
    if pool is None:
        pool = _POOLS[workers] = ThreadPoolExecutor(workers, thread_name_prefix="qsimkit")
    return pool


def _dispatch(fn, args, total: int, workers: int, align: int = 1):
    if workers <= 1 or total < 2 * workers * align:
        fn(*args, 0, total)
        return
    units = total // align
    bounds = np.linspace(0, units, workers + 1).astype(np.int64) * align
    futs = [_pool(workers).submit(fn, *args, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    for f in futs:
        f.result()


def offsets_for(qubits) -> np.ndarray:
    """Index offsets of each matrix column; ``qubits[0]`` is the matrix MSB."""
    k = len(qubits)
    off = np.zeros(1 << k, dtype=np.int64)
    for j in range(1 << k):
        for b, q in enumerate(qubits):
            if (j >> (k - 1 - b)) & 1:
                off[j] |= 1 << q
    return off


def apply_matrix(state: np.ndarray, n: int, mat: np.ndarray, qubits,
                 workers: int = 1, threshold: int = 1 << 14) -> None:
    """Apply ``mat`` (on ``qubits``, first = MSB) to ``state`` in place.

    Multi-worker execution engages only when ``2**n >= threshold``.
    ``mat`` need not be unitary (the partial-amplitude branches use projectors).
    """
    k = len(qubits)
    total = 1 << (n - k)
    workers = workers if (1 << n) >= threshold else 1
    mat = np.ascontiguousarray(mat, dtype=np.complex128)
    if k == 1:
        args = (state, mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1], int(qubits[0]))
        _dispatch(_k1, args, total, workers)
    elif k == 2:
        _dispatch(_k2, (state, mat, int(qubits[0]), int(qubits[1])), total, workers)
    else:
        sq = np.array(sorted(qubits), dtype=np.int64)
        chunk = min(GEMM_CHUNK, total)
        _dispatch(_kg, (state, mat, offsets_for(qubits), sq, chunk), total, workers, chunk)
