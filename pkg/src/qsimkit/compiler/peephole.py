"""Local rewrites on DAG-adjacent gates.

Two gates are adjacent when, on every qubit of the first, the next
instruction is the second and both act on the same qubit set. Each pass
collects non-overlapping rewrites; passes repeat until nothing changes, so
the result is a fixpoint and running it again is a no-op.
"""

from __future__ import annotations

import math

import numpy as np

from ..circuit import Gate, GateKind, Measure, Program, cnot, gate_matrix, h, u3
from ..errors import FlatCircuitRequired
from ..linalg import equal_up_to_phase
from .basis import zyz

ZERO_ANGLE_ATOL = 1e-12
IDENTITY_ATOL = 1e-12
_CANCEL = frozenset({GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.CNOT, GateKind.CZ,
                     GateKind.SWAP})
_ROT = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
_SYMMETRIC = frozenset({GateKind.CZ, GateKind.SWAP})


def _next_on_wire(body) -> list[dict[int, int]]:
    """``nxt[i][q]``: index of the next instruction touching qubit ``q`` after ``i``."""
    nxt: list[dict[int, int]] = [dict() for _ in body]
    last: dict[int, int] = {}
    for i in range(len(body) - 1, -1, -1):
        ins = body[i]
        for q in _qubits(ins):
            if q in last:
                nxt[i][q] = last[q]
            last[q] = i
    return nxt


def _qubits(ins) -> tuple[int, ...]:
    return ins.qubits if isinstance(ins, Gate) else (ins.qubit,)


def _adjacent(body, nxt, i):
    g = body[i]
    if not isinstance(g, Gate):
        return None
    js = {nxt[i].get(q) for q in g.qubits}
    if len(js) != 1:
        return None
    j = js.pop()
    if j is None:
        return None
    o = body[j]
    if not isinstance(o, Gate) or set(o.qubits) != set(g.qubits):
        return None
    return j


def _signed_angle(g: Gate) -> float:
    return -g.params[0] if g.dagger else g.params[0]


def _is_zero_rotation(g: Gate) -> bool:
    if g.kind not in _ROT or g.controls:
        return False
    r = math.remainder(g.params[0], 4 * math.pi)
    return abs(r) <= ZERO_ANGLE_ATOL


def _pair_rewrite(a: Gate, b: Gate):
    """Replacement list for the adjacent pair (a, b), or None if no rule applies."""
    if a.controls or b.controls or a.kind is not b.kind:
        return None
    k = a.kind
    if k in _CANCEL:
        same = (set(a.targets) == set(b.targets)) if k in _SYMMETRIC else a.targets == b.targets
        return [] if same else None
    if k in _ROT:
        return [Gate(k, a.targets, (_signed_angle(a) + _signed_angle(b),))]
    return None


def _run_passes(p: Program, pair_rule, single_rule) -> Program:
    for ins in p.body:
        if not isinstance(ins, (Gate, Measure)):
            raise FlatCircuitRequired(f"{type(ins).__name__} is not allowed here")
    body = list(p.body)
    while True:
        changed = False
        keep = []
        for g in body:
            if isinstance(g, Gate) and single_rule(g):
                changed = True
            else:
                keep.append(g)
        body = keep
        nxt = _next_on_wire(body)
        out: list = [None] * len(body)
        dead = [False] * len(body)
        for i, g in enumerate(body):
            if dead[i]:
                continue
            j = _adjacent(body, nxt, i)
            rep = None
            if j is not None and not dead[j]:
                rep = pair_rule(g, body[j])
            if rep is None:
                out[i] = [g]
                continue
            changed = True
            dead[j] = True
            out[i] = rep
            out[j] = []
        body = [x for xs in out if xs is not None for x in xs]
        if not changed:
            return p.with_body(body)


def peephole(p: Program) -> Program:
    """Cancel self-inverse pairs, merge same-axis rotations, drop zero rotations."""
    return _run_passes(p, _pair_rewrite, _is_zero_rotation)


# --------------------------------------------------------------------------- swaps

def _swap_absorption(g: Gate, a: int, b: int):
    """Two-qubit-gate list equal to ``g`` followed by SWAP(a, b), or None."""
    if g.controls or set(g.qubits) != {a, b}:
        return None
    if g.kind is GateKind.SWAP:
        return []
    if g.kind is GateKind.CNOT:
        c, t = g.targets
        return [cnot(t, c), cnot(c, t)]
    if g.kind is GateKind.CZ:
        return [h(b), cnot(b, a), cnot(a, b), h(a)]
    return None


def absorb_swaps(p: Program) -> Program:
    """Merge each SWAP into the last two-qubit gate on the same pair.

    One-qubit gates between the two are moved past the SWAP by exchanging
    their qubit; a CNOT or CZ followed by a SWAP then needs two CNOTs
    instead of four.
    """
    body = list(p.body)
    j = 0
    while j < len(body):
        sw = body[j]
        if not (isinstance(sw, Gate) and sw.kind is GateKind.SWAP and not sw.controls):
            j += 1
            continue
        a, b = sw.targets
        between = []
        rep = None
        for k in range(j - 1, -1, -1):
            ins = body[k]
            qs = _qubits(ins)
            if a not in qs and b not in qs:
                continue
            if isinstance(ins, Gate) and ins.arity == 1:
                between.append(k)
                continue
            if isinstance(ins, Gate):
                rep = _swap_absorption(ins, a, b)
            break
        if rep is None:
            j += 1
            continue
        flip = {a: b, b: a}
        for i in between:
            g = body[i]
            body[i] = g.replace(targets=(flip[g.targets[0]],))
        del body[j]
        body[k:k + 1] = rep
        j = k + len(rep)
    return p.with_body(body)


# --------------------------------------------------------------------------- ansatz

def _is_identity_1q(g: Gate) -> bool:
    if g.arity != 1 or g.kind is not GateKind.U3:
        return False
    return equal_up_to_phase(gate_matrix(g), np.eye(2), IDENTITY_ATOL)


def _merge_u3(a: Gate, b: Gate):
    if a.arity != 1 or b.arity != 1 or GateKind.U3 not in (a.kind, b.kind):
        return None
    _, th, ph, la = zyz(gate_matrix(b) @ gate_matrix(a))
    return [u3(a.qubits[0], th, ph, la)]


def fuse_to_ansatz(p: Program) -> Program:
    """Collapse each run of adjacent one-qubit gates containing a U3 into one U3.

    U3 gates equal to the identity up to phase are removed.
    """
    return _run_passes(p, _merge_u3, _is_identity_1q)


def optimize(p: Program) -> Program:
    """Alternate peephole and ansatz fusion until neither changes the program."""
    while True:
        q = fuse_to_ansatz(peephole(p))
        if q == p:
            return q
        p = q
