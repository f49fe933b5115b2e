"""Gate fusion: aggregate neighbouring gates into dense unitary blocks.

Single-qubit gates are held back per qubit and folded into the next block
that touches that qubit, so they never cost a pass of their own. A
multi-qubit gate joins the latest block it may legally join (no later block
touches its qubits) whose combined support stays within ``max_qubits``;
among legal candidates the one sharing the most qubits wins, then the
earliest. Everything else opens a new block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Gate, Measure, Program, gate_matrix, unitary
from .dag import build_dag
from .linalg import compose


@dataclass
class Block:
    qubits: set[int] = field(default_factory=set)
    gates: list[Gate] = field(default_factory=list)
    closed: bool = False

    def matrix(self) -> tuple[np.ndarray, tuple[int, ...]]:
        qs = tuple(sorted(self.qubits, reverse=True))
        return compose(((gate_matrix(g), g.qubits) for g in self.gates), qs), qs


def plan_blocks(items, max_qubits: int) -> list:
    """Group ``items`` (Gates and Measures in a valid order) into Blocks.

    Measures are passed through and act as barriers on their qubit.
    """
    if max_qubits < 1:
        raise ValueError("max_qubits must be >= 1")
    out: list = []
    last: dict[int, int] = {}
    pending: dict[int, list[Gate]] = {}

    def place(support: set[int], gates: list[Gate]) -> None:
        lo = max((last.get(q, -1) for q in support), default=-1)
        best, best_key = None, None
        if len(support) <= max_qubits:
            for b in range(max(lo, 0), len(out)):
                blk = out[b]
                if not isinstance(blk, Block) or blk.closed:
                    continue
                if len(blk.qubits | support) > max_qubits:
                    continue
                key = (-len(blk.qubits & support), b)
                if best_key is None or key < best_key:
                    best, best_key = b, key
        if best is None:
            out.append(Block(set(), [], closed=len(support) > max_qubits))
            best = len(out) - 1
        blk = out[best]
        blk.qubits |= support
        blk.gates.extend(gates)
        for q in support:
            last[q] = best

    def flush(q: int) -> None:
        gs = pending.pop(q, None)
        if gs:
            place({q}, gs)

    for ins in items:
        if isinstance(ins, Measure):
            flush(ins.qubit)
            out.append(ins)
            last[ins.qubit] = len(out) - 1
            continue
        qs = ins.qubits
        if len(qs) == 1:
            pending.setdefault(qs[0], []).append(ins)
            continue
        pre: list[Gate] = []
        for q in sorted(qs):
            pre.extend(pending.pop(q, ()))
        place(set(qs), pre + [ins])
    for q in sorted(pending):
        flush(q)
    return out


def fuse_gates(gates, max_qubits: int = 3) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """Fuse a gate list into ``(matrix, qubits)`` pairs ready for the kernels."""
    return [b.matrix() for b in plan_blocks(gates, max_qubits)]


def fuse_circuit(p: Program, max_fused_qubits: int = 3) -> Program:
    """Return ``p`` with its gates aggregated into custom-unitary blocks."""
    dag = build_dag(p)
    items = [p.body[i] for i in dag.topological_order()]
    body = []
    for blk in plan_blocks(items, max_fused_qubits):
        if isinstance(blk, Measure):
            body.append(blk)
        else:
            mat, qs = blk.matrix()
            body.append(unitary(qs, mat))
    return p.with_body(body)
