"""End-to-end compilation and its report."""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from ..circuit import Gate, Program, cnot, gate_matrix, h, rx, rz
from ..dag import circuit_depth
from ..errors import CompilationError
from ..linalg import apply_operator, equal_up_to_phase
from .basis import BasisSet, decompose_multicontrol, to_basis
from .mapping import map_to_topology
from .peephole import absorb_swaps, fuse_to_ansatz, optimize, peephole
from .topology import Layout, Topology

EQUIV_ATOL = 1e-8


def two_qubit_count(p: Program) -> int:
    return sum(1 for g in p.gates() if g.arity == 2)


@dataclass
class StageMetrics:
    gates: int
    two_qubit: int
    depth: int

    @classmethod
    def of(cls, p: Program) -> "StageMetrics":
        return cls(len(p.gates()), two_qubit_count(p), circuit_depth(p) if p.body else 0)


@dataclass
class CompileReport:
    """``stages`` maps stage name to metrics, in pipeline order.

    ``compiled`` is the hardware-legal circuit straight after mapping (SWAPs
    rewritten into the basis); ``optimized`` is the final output.
    """

    stages: dict[str, StageMetrics] = field(default_factory=dict)
    swaps: int = 0
    initial_layout: Layout | None = None
    final_layout: Layout | None = None
    equivalence_checked: bool = False

    @property
    def compiled(self) -> StageMetrics:
        return self.stages["compiled"]

    @property
    def optimized(self) -> StageMetrics:
        return self.stages["optimized"]

    def as_dict(self) -> dict:
        return {
            "stages": {k: vars(v) for k, v in self.stages.items()},
            "swaps": self.swaps,
            "initial_layout": list(self.initial_layout.v2p) if self.initial_layout else None,
            "final_layout": list(self.final_layout.v2p) if self.final_layout else None,
            "equivalence_checked": self.equivalence_checked,
        }


def compile(p: Program, topo: Topology, basis: BasisSet | None = None,
            check: bool = True) -> tuple[Program, CompileReport]:
    """decompose -> basis -> peephole -> ansatz fusion -> map -> basis -> optimize."""
    basis = basis or BasisSet()
    rep = CompileReport()
    rep.stages["input"] = StageMetrics.of(p)
    q = decompose_multicontrol(p)
    rep.stages["decomposed"] = StageMetrics.of(q)
    q = to_basis(q, basis)
    rep.stages["basis"] = StageMetrics.of(q)
    q = peephole(q)
    rep.stages["peephole"] = StageMetrics.of(q)
    q = fuse_to_ansatz(q)
    rep.stages["ansatz"] = StageMetrics.of(q)
    mapped, final, mrep = map_to_topology(q, topo)
    q = to_basis(mapped, basis)
    compiled = rep.stages["compiled"] = StageMetrics.of(q)
    q = _best_optimized(mapped, q, basis, compiled)
    rep.stages["optimized"] = StageMetrics.of(q)
    rep.swaps = mrep.swaps
    rep.initial_layout = mrep.initial_layout
    rep.final_layout = final
    for g in q.gates():
        if g.arity == 2 and not topo.has_edge(*g.qubits):
            raise CompilationError(f"{g.kind.value} on {g.qubits} is not on a topology edge")
    if check and p.qubit_count <= 8 and topo.n <= 14:
        if not mapped_equivalent(p, q, rep.initial_layout, final):
            raise CompilationError("compiled circuit is not equivalent to the source")
        rep.equivalence_checked = True
    return q, rep


def _best_optimized(mapped: Program, compiled_prog: Program, basis: BasisSet,
                    compiled: StageMetrics) -> Program:
    """Optimize with and without SWAP absorption; keep the better result.

    The absorbed variant is only taken when it is no worse than the compiled
    circuit in depth and two-qubit count.
    """
    plain = optimize(compiled_prog)
    absorbed = optimize(to_basis(absorb_swaps(mapped), basis))
    m = StageMetrics.of(absorbed)
    pm = StageMetrics.of(plain)
    if m.depth <= compiled.depth and m.two_qubit <= compiled.two_qubit and \
            (m.two_qubit, m.depth, m.gates) < (pm.two_qubit, pm.depth, pm.gates):
        return absorbed
    return plain


# --------------------------------------------------------------------------- equivalence

def _gates_only(p: Program) -> list[Gate]:
    return [g for g in p.body if isinstance(g, Gate)]


def _evolve(states: np.ndarray, gates, n: int) -> np.ndarray:
    for g in gates:
        states = apply_operator(states, gate_matrix(g), g.qubits, n)
    return states


def _embed_index(x: np.ndarray, layout: Layout) -> np.ndarray:
    out = np.zeros_like(x)
    for v, pq in enumerate(layout.v2p):
        out |= ((x >> v) & 1) << pq
    return out


def mapped_equivalent(src: Program, out: Program, initial: Layout, final: Layout,
                      atol: float = EQUIV_ATOL) -> bool:
    """True if ``out`` acts like ``src`` up to global phase under the layouts.

    Virtual qubit ``v`` enters on ``initial[v]`` and leaves on ``final[v]``;
    spare physical qubits enter in |0>. The columns for every virtual basis
    input are compared as one matrix, so the phase must be common to all.
    """
    n, big = src.qubit_count, out.qubit_count
    dim = 1 << n
    ref = _evolve(np.eye(dim, dtype=complex), _gates_only(src), n)       # rows = U e_x
    x = np.arange(dim)
    ins = np.zeros((dim, 1 << big), dtype=complex)
    ins[x, _embed_index(x, initial)] = 1.0
    got = _evolve(ins, _gates_only(out), big)
    want = np.zeros_like(got)
    want[:, _embed_index(x, final)] = ref
    return equal_up_to_phase(got, want, atol)


def unitary_of(p: Program) -> np.ndarray:
    """Dense unitary of the gates in ``p`` (qubit 0 = least significant bit)."""
    n = p.qubit_count
    return _evolve(np.eye(1 << n, dtype=complex), _gates_only(p), n).T


# --------------------------------------------------------------------------- workloads

def qaoa_circuit(n: int, layers: int = 1, seed: int = 0, edge_prob: float = 0.5) -> Program:
    """QAOA-style MaxCut circuit on a seeded random graph.

    Each cost term is CNOT - RZ - CNOT on an edge; each layer ends with an RX
    mixer on every qubit. Angles are drawn from the same seeded generator.
    """
    rng = np.random.default_rng(seed)
    g = nx.gnp_random_graph(n, edge_prob, seed=int(rng.integers(2 ** 31)))
    edges = sorted(g.edges) or ([(0, 1)] if n > 1 else [])
    body = [h(q) for q in range(n)]
    for _ in range(layers):
        gamma, beta = rng.uniform(0, np.pi, size=2)
        for a, b in edges:
            body += [cnot(a, b), rz(b, 2 * gamma), cnot(a, b)]
        body += [rx(q, 2 * beta) for q in range(n)]
    return Program(n, 0, tuple(body))
