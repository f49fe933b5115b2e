"""Quantum circuit simulation, noise, path sums, compilation and IR tooling."""

from .circuit import (Assign, BinOp, CBit, Const, Gate, GateKind, Measure, Program, QIf, QWhile,
                      circuit, cnot, cz, gate_matrix, h, i_, rx, ry, rz, s, sdg, swap, t, tdg,
                      toffoli, u3, unitary, validate, x, y, z)
from .errors import (BudgetExceeded, CompilationError, FlatCircuitRequired, InvalidProgramError,
                     NoiseModelError, NonHermitianError, NonTerminationGuard, NonUnitaryError,
                     ParameterPositionError, QSimError, TopologyError, Unsupported)
from .irio import draw, emit_ir, emit_qasm, emit_quil, parse_ir
from .noise import DecoherenceParams, KrausChannel, NoiseModel, make_channel, run_noisy
from .pathsum import CutPlan, partial_amplitude, plan_cut, single_amplitude
from .statevector import RunResult, SimOptions, StateVector, probabilities, run, simulate
from .varops import ParamCircuit, PauliOperator, expectation, gradient, pauli_multiply

__version__ = "0.1.0"
