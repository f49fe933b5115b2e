"""Dependency DAG over a flat circuit."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .circuit import Gate, Measure, Program
from .errors import FlatCircuitRequired


def wires(ins) -> tuple:
    """Qubit wires (ints) and classical wires (``("c", i)``) touched by ``ins``."""
    if isinstance(ins, Gate):
        return ins.qubits
    return (ins.qubit, ("c", ins.cbit))


@dataclass(frozen=True)
class CircuitDAG:
    """Nodes are the program's instructions by index; edges follow each wire.

    ``preds[i]``/``succs[i]`` hold node indices. Immutable once built.
    """

    nodes: tuple
    preds: tuple[tuple[int, ...], ...]
    succs: tuple[tuple[int, ...], ...]
    qubit_count: int

    @property
    def in_degree_zero(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.preds) if not p)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, ss in enumerate(self.succs) for j in ss]

    def __len__(self):
        return len(self.nodes)

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, lowest node index first (reproduces program order)."""
        indeg = [len(p) for p in self.preds]
        heap = [i for i, d in enumerate(indeg) if d == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            i = heapq.heappop(heap)
            out.append(i)
            for j in self.succs[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(heap, j)
        return out

    def layers(self) -> list[list[int]]:
        """ASAP layering: node depth = 1 + max depth of predecessors."""
        level = [0] * len(self.nodes)
        for i in self.topological_order():
            level[i] = 1 + max((level[p] for p in self.preds[i]), default=0)
        out: list[list[int]] = [[] for _ in range(max(level, default=0))]
        for i, lv in enumerate(level):
            out[lv - 1].append(i)
        return out

    def depth(self) -> int:
        return len(self.layers())


def build_dag(p: Program) -> CircuitDAG:
    """Build the per-wire dependency DAG of a flat program."""
    for ins in p.body:
        if not isinstance(ins, (Gate, Measure)):
            raise FlatCircuitRequired(
                f"{type(ins).__name__} present; DAG construction needs a flat circuit")
    last: dict = {}
    preds: list[list[int]] = []
    succs: list[list[int]] = [[] for _ in p.body]
    for i, ins in enumerate(p.body):
        ps: list[int] = []
        for w in wires(ins):
            j = last.get(w)
            if j is not None and j not in ps:
                ps.append(j)
            last[w] = i
        ps.sort()
        preds.append(ps)
        for j in ps:
            succs[j].append(i)
    return CircuitDAG(
        nodes=p.body,
        preds=tuple(tuple(x) for x in preds),
        succs=tuple(tuple(x) for x in succs),
        qubit_count=p.qubit_count,
    )


def circuit_depth(p: Program) -> int:
    """Longest DAG path counting every gate (and measurement) as 1."""
    return build_dag(p).depth()
