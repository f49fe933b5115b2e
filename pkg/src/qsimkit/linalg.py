"""Small dense helpers on batches of state vectors."""

from __future__ import annotations

import numpy as np


def apply_operator(states: np.ndarray, mat: np.ndarray, qubits, n: int) -> np.ndarray:
    """Return ``mat`` applied to every vector in ``states`` (shape ``(..., 2**n)``).

    ``qubits[0]`` is the most significant bit of ``mat``'s index; qubit 0 is
    the least significant bit of the state index. ``mat`` may be non-unitary.
    """
    k = len(qubits)
    lead = states.shape[:-1]
    nb = len(lead)
    t = states.reshape(lead + (2,) * n)
    axes = [nb + (n - 1 - q) for q in qubits]
    tail = list(range(nb + n - k, nb + n))
    t = np.moveaxis(t, axes, tail)
    shp = t.shape
    t = (t.reshape(shp[:-k] + (1 << k,)) @ np.asarray(mat).T).reshape(shp)
    t = np.moveaxis(t, tail, axes)
    return np.ascontiguousarray(t).reshape(states.shape)


def compose(ops, qubits_desc) -> np.ndarray:
    """Matrix of a gate sequence restricted to ``qubits_desc`` (descending order).

    ``ops`` yields ``(matrix, qubits)`` pairs in circuit order.
    """
    b = len(qubits_desc)
    local = {q: b - 1 - j for j, q in enumerate(qubits_desc)}
    rows = np.eye(1 << b, dtype=complex)
    for mat, qs in ops:
        rows = apply_operator(rows, mat, [local[q] for q in qs], b)
    return rows.T


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """True if ``a == e^{i phi} b`` elementwise within ``atol`` for some phi."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) < atol:
        return float(np.max(np.abs(a), initial=0.0)) <= atol
    phase = a[k] / b[k]
    if abs(abs(phase) - 1) > max(atol, 1e-12) * 10 / max(abs(b[k]), 1e-300):
        return False
    phase /= abs(phase)
    return float(np.max(np.abs(a - phase * b))) <= atol
