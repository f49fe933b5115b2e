"""Compilation for chips: control decomposition, basis rewrite, peephole, mapping."""

from .basis import (BasisSet, controlled_1q, decompose_multicontrol, multi_controlled, synthesize,
                    to_basis, to_u3, toffoli_network, zyz)
from .mapping import MappingReport, map_to_topology, token_swaps
from .peephole import absorb_swaps, fuse_to_ansatz, optimize, peephole
from .pipeline import (CompileReport, StageMetrics, compile, mapped_equivalent, qaoa_circuit,
                       two_qubit_count, unitary_of)
from .topology import Layout, Topology

__all__ = [
    "absorb_swaps", "synthesize", "BasisSet", "CompileReport", "Layout", "MappingReport", "StageMetrics", "Topology",
    "compile", "controlled_1q", "decompose_multicontrol", "fuse_to_ansatz", "map_to_topology",
    "mapped_equivalent", "multi_controlled", "optimize", "peephole", "qaoa_circuit",
    "to_basis", "to_u3", "toffoli_network", "token_swaps", "two_qubit_count", "unitary_of",
    "zyz",
]
