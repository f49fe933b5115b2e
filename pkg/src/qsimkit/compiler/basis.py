"""Control decomposition and rewriting into a {U3, CZ}-style basis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cossin, schur

from ..circuit import (Gate, GateKind, Measure, Program, cnot, cz, gate_matrix, h, rz, ry,
                       t, tdg, u3, unitary)
from ..errors import FlatCircuitRequired, Unsupported

DEGENERATE_ATOL = 1e-12
_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class BasisSet:
    one_qubit: frozenset = field(default_factory=lambda: frozenset({GateKind.U3}))
    two_qubit: frozenset = field(default_factory=lambda: frozenset({GateKind.CZ}))

    def __post_init__(self):
        object.__setattr__(self, "one_qubit", frozenset(self.one_qubit))
        object.__setattr__(self, "two_qubit", frozenset(self.two_qubit))
        if not self.one_qubit or not self.two_qubit:
            raise ValueError("basis sets must be non-empty")
        if not self.two_qubit <= {GateKind.CZ, GateKind.CNOT, GateKind.SWAP}:
            raise ValueError("two-qubit basis must be a subset of {CZ, CNOT, SWAP}")
        if any(k.n_targets != 1 for k in self.one_qubit):
            raise ValueError("one-qubit basis holds one-qubit kinds only")
        if GateKind.U3 not in self.one_qubit:
            raise ValueError("one-qubit basis must contain U3 (the synthesis target)")
        if not self.two_qubit & {GateKind.CZ, GateKind.CNOT}:
            raise ValueError("two-qubit basis needs CZ or CNOT")


def _wrap(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if a == -math.pi else a


def zyz(u: np.ndarray) -> tuple[float, float, float, float]:
    """``(alpha, theta, phi, lam)`` with ``u = e^{i alpha} RZ(phi) RY(theta) RZ(lam)``.

    ``phi`` and ``lam`` lie in (-pi, pi]; when ``theta`` is 0 or pi only one of
    them is determined and ``phi`` is set to 0.
    """
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    v = u / np.sqrt(det)
    a, b = v[0, 0], v[1, 0]
    theta = 2 * math.atan2(abs(b), abs(a))
    if abs(b) <= DEGENERATE_ATOL:
        phi, lam = 0.0, _wrap(-2 * np.angle(a))
    elif abs(a) <= DEGENERATE_ATOL:
        phi, lam = 0.0, _wrap(-2 * np.angle(b))
    else:
        s, d = -2 * np.angle(a), 2 * np.angle(b)
        phi, lam = _wrap((s + d) / 2), _wrap((s - d) / 2)
    w = _rz(phi) @ _ry(theta) @ _rz(lam)
    k = int(np.argmax(np.abs(w)))
    alpha = float(np.angle(u.flat[k] / w.flat[k]))
    return alpha, theta, phi, lam


def _rz(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def _ry(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def to_u3(u: np.ndarray, q: int) -> Gate:
    """One U3 gate equal to the 2x2 unitary ``u`` up to global phase."""
    _, theta, phi, lam = zyz(u)
    return u3(q, theta, phi, lam)


# --------------------------------------------------------------------------- controls

def toffoli_network(a: int, b: int, tq: int) -> list[Gate]:
    """Six-CNOT Toffoli network (controls a, b; target tq)."""
    return [h(tq), cnot(b, tq), tdg(tq), cnot(a, tq), t(tq), cnot(b, tq), tdg(tq),
            cnot(a, tq), t(b), t(tq), h(tq), cnot(a, b), t(a), tdg(b), cnot(a, b)]


def controlled_1q(c: int, tq: int, u: np.ndarray) -> list[Gate]:
    """Single-control U as two CNOTs and one-qubit rotations (A X B X C construction)."""
    alpha, gamma, beta, delta = zyz(u)
    out = []
    if abs(delta - beta) > 1e-14:
        out.append(rz(tq, (delta - beta) / 2))
    out.append(cnot(c, tq))
    out += [rz(tq, -(delta + beta) / 2), ry(tq, -gamma / 2)]
    out.append(cnot(c, tq))
    out += [ry(tq, gamma / 2), rz(tq, beta)]
    if abs(_wrap(alpha)) > 1e-14:
        out.append(u3(c, 0.0, 0.0, alpha))
    return out


def _sqrt_unitary(u: np.ndarray) -> np.ndarray:
    tm, z = schur(u, output="complex")
    return z @ np.diag(np.sqrt(np.diag(tm))) @ z.conj().T


def multi_controlled(controls, tq: int, u: np.ndarray) -> list[Gate]:
    """C^k(U) on ``tq`` using only one- and two-qubit gates (recursive square roots)."""
    controls = list(controls)
    k = len(controls)
    if k == 0:
        return [unitary((tq,), u)]
    if k == 1:
        return controlled_1q(controls[0], tq, u)
    if k == 2 and np.allclose(u, _X, atol=1e-14):
        return toffoli_network(controls[0], controls[1], tq)
    v = _sqrt_unitary(u)
    *rest, last = controls
    return (controlled_1q(last, tq, v)
            + multi_controlled(rest, last, _X)
            + controlled_1q(last, tq, v.conj().T)
            + multi_controlled(rest, last, _X)
            + multi_controlled(rest, tq, v))


# --------------------------------------------------------------------------- synthesis

def synthesize(u: np.ndarray, qubits) -> list[Gate]:
    """Exact gate list (global phase included) for ``u`` on ``qubits`` (first = MSB).

    Recursive cosine-sine decomposition: ``u = (u1 + u2) CS (v1 + v2)`` where
    the block-diagonal factors are multiplexed on the first qubit and ``CS``
    is a multiplexed RY on it. Output gates have one target, possibly with
    controls; X gates with one control stand in for CNOT.
    """
    qubits = list(qubits)
    u = np.asarray(u, dtype=complex)
    if len(qubits) == 1:
        return [unitary((qubits[0],), u)]
    half = u.shape[0] // 2
    (u1, u2), theta, (v1, v2) = cossin(u, p=half, q=half, separate=True)
    top, rest = qubits[0], qubits[1:]
    return _mux(v1, v2, top, rest) + _mux_ry(2 * theta, top, rest) + _mux(u1, u2, top, rest)


def _with_control(g: Gate, c: int) -> Gate:
    return g.replace(controls=(c,) + g.controls)


def _mux(a, b, top, rest) -> list[Gate]:
    """``a`` on ``rest`` when ``top`` is 0, ``b`` when it is 1."""
    return synthesize(a, rest) + [_with_control(g, top) for g in synthesize(b @ a.conj().T, rest)]


def _mux_ry(angles, top, rest) -> list[Gate]:
    """RY(angles[i]) on ``top`` for ``rest`` in basis state i (first of rest = MSB)."""
    if len(rest) == 1:
        c = rest[0]
        s, d = (angles[0] + angles[1]) / 2, (angles[0] - angles[1]) / 2
        return [ry(top, s), cnot(c, top), ry(top, d), cnot(c, top)]
    k = len(rest)
    out = []
    for i, a in enumerate(angles):
        if abs(a) <= 1e-14:
            continue
        flips = [Gate(GateKind.X, (q,)) for j, q in enumerate(rest) if not (i >> (k - 1 - j)) & 1]
        out += flips + [Gate(GateKind.RY, (top,), (float(a),), tuple(rest))] + flips
    return out


def _decompose_gate(g: Gate) -> list[Gate]:
    if g.arity <= 2 and not (g.kind is GateKind.SWAP and g.controls):
        return [g]
    if g.kind is GateKind.TOFFOLI:
        a, b, tq = g.targets
        if not g.controls:
            return toffoli_network(a, b, tq)
        return multi_controlled(list(g.controls) + [a, b], tq, _X)
    if g.kind is GateKind.CNOT:
        c, tq = g.targets
        return multi_controlled(list(g.controls) + [c], tq, _X)
    if g.kind is GateKind.CZ:
        c, tq = g.targets
        return multi_controlled(list(g.controls) + [c], tq, np.diag([1, -1]).astype(complex))
    if g.kind is GateKind.SWAP:
        a, b = g.targets
        return [cnot(b, a)] + multi_controlled(list(g.controls) + [a], b, _X) + [cnot(b, a)]
    if len(g.targets) == 1:
        return multi_controlled(g.controls, g.targets[0], g.base_matrix())
    out = []
    for s in synthesize(gate_matrix(g), g.qubits):
        out.extend(_decompose_gate(s))
    return out


def decompose_multicontrol(p: Program) -> Program:
    """Rewrite every gate on three or more qubits into one- and two-qubit gates."""
    _require_flat(p)
    body = []
    for ins in p.body:
        body.extend(_decompose_gate(ins) if isinstance(ins, Gate) else [ins])
    return p.with_body(body)


# --------------------------------------------------------------------------- basis

def _two_qubit(g: Gate, basis: BasisSet) -> list[Gate]:
    k = g.kind
    if g.controls:
        if len(g.targets) != 1:
            raise Unsupported(f"controlled {k.value} must be decomposed first")
        if k in (GateKind.X, GateKind.Z):
            as_2q = cnot if k is GateKind.X else cz
            return _rebase([as_2q(g.controls[0], g.targets[0])], basis)
        return _rebase(controlled_1q(g.controls[0], g.targets[0], g.base_matrix()), basis)
    if k is GateKind.CUSTOM:
        return _rebase(synthesize(g.base_matrix(), g.targets), basis)
    if k in basis.two_qubit:
        return [Gate(k, g.targets)]
    a, b = g.targets
    if k is GateKind.SWAP:
        return _rebase([cnot(a, b), cnot(b, a), cnot(a, b)], basis)
    hh = [to_u3(h(b).base_matrix(), b)]
    if k is GateKind.CNOT:                       # CZ in basis
        return hh + [cz(a, b)] + hh
    if k is GateKind.CZ:                         # CNOT in basis
        return hh + [cnot(a, b)] + hh
    raise Unsupported(f"no basis rule for {k.value}")


def _rebase(gates, basis: BasisSet) -> list[Gate]:
    out = []
    for g in gates:
        if g.arity == 1:
            if g.kind in basis.one_qubit and g.kind is not GateKind.U3:
                out.append(g)
            else:
                out.append(to_u3(gate_matrix(g), g.qubits[0]))
        elif g.arity == 2:
            out.extend(_two_qubit(g, basis))
        else:
            raise Unsupported(f"{g.kind.value} on {g.arity} qubits: decompose controls first")
    return out


def to_basis(p: Program, basis: BasisSet | None = None) -> Program:
    """Rewrite one-qubit gates as U3 (ZYZ) and two-qubit gates by fixed rules."""
    basis = basis or BasisSet()
    _require_flat(p)
    body = []
    for ins in p.body:
        body.extend(_rebase([ins], basis) if isinstance(ins, Gate) else [ins])
    return p.with_body(body)


def _require_flat(p: Program) -> None:
    for ins in p.body:
        if not isinstance(ins, (Gate, Measure)):
            raise FlatCircuitRequired(f"{type(ins).__name__} is not allowed here")
