"""Full-amplitude state-vector simulator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .circuit import Assign, Gate, Measure, Program, QIf, QWhile, gate_matrix, validate
from .errors import InvalidProgramError, NonTerminationGuard
from .fusion import fuse_gates
from .kernels import apply_matrix


@dataclass
class SimOptions:
    parallel_threshold: int = 1 << 14
    fusion_enabled: bool = False
    max_fused_qubits: int = 3
    seed: int = 0
    workers: int = 1
    max_while_iterations: int = 10 ** 6

    def __post_init__(self):
        if self.parallel_threshold < 1:
            raise ValueError("parallel_threshold must be >= 1")
        if not 1 <= self.max_fused_qubits <= 5:
            raise ValueError("max_fused_qubits must be in [1, 5]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_while_iterations < 0:
            raise ValueError("max_while_iterations must be >= 0")


class StateVector:
    """``amps[i]`` is the amplitude of basis state ``i``; qubit 0 is the LSB."""

    def __init__(self, n: int, amps: np.ndarray | None = None):
        if n < 0:
            raise ValueError("qubit count must be >= 0")
        self.n = n
        if amps is None:
            amps = np.zeros(1 << n, dtype=np.complex128)
            amps[0] = 1.0
        else:
            amps = np.ascontiguousarray(amps, dtype=np.complex128)
            if amps.shape != (1 << n,):
                raise ValueError(f"expected {1 << n} amplitudes, got {amps.shape}")
        self.amps = amps

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.amps.copy())

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def amplitude(self, bits: str) -> complex:
        """Amplitude of a basis state written most significant qubit first."""
        return complex(self.amps[int(bits, 2)])

    def probabilities(self, qubits=None) -> np.ndarray:
        return probabilities(self, range(self.n) if qubits is None else qubits)

    def __repr__(self):
        return f"StateVector(n={self.n})"


class RunResult(NamedTuple):
    counts: dict[str, int]
    state: StateVector | None


def _check_qubits(sv: StateVector, qubits) -> None:
    for q in qubits:
        if not 0 <= q < sv.n:
            raise IndexError(f"qubit {q} out of range for {sv.n}-qubit state")


def apply_gate(sv: StateVector, g: Gate, opts: SimOptions | None = None) -> StateVector:
    """Apply ``g`` in place (dense matrix on controls + targets) and return ``sv``."""
    _check_qubits(sv, g.qubits)
    opts = opts or SimOptions()
    apply_matrix(sv.amps, sv.n, gate_matrix(g), g.qubits, opts.workers, opts.parallel_threshold)
    return sv


def evolve(sv: StateVector, gates, opts: SimOptions | None = None) -> StateVector:
    """Apply a gate sequence, fusing it first when ``opts.fusion_enabled``."""
    opts = opts or SimOptions()
    gates = list(gates)
    for g in gates:
        _check_qubits(sv, g.qubits)
    if opts.fusion_enabled:
        for mat, qs in fuse_gates(gates, opts.max_fused_qubits):
            apply_matrix(sv.amps, sv.n, mat, qs, opts.workers, opts.parallel_threshold)
    else:
        for g in gates:
            apply_gate(sv, g, opts)
    return sv


def simulate(p: Program, opts: SimOptions | None = None) -> StateVector:
    """Final state of a measurement-free program."""
    _validate(p)
    if not p.is_unitary:
        raise ValueError("simulate() needs a program made only of gates; use run()")
    return evolve(StateVector(p.qubit_count), p.body, opts)


def probabilities(sv: StateVector, qubits) -> np.ndarray:
    """Marginal Born probabilities of ``qubits``; ``qubits[0]`` is the output MSB."""
    qubits = list(qubits)
    if not qubits:
        raise ValueError("probabilities() needs a non-empty qubit subset")
    if len(set(qubits)) != len(qubits):
        raise ValueError("repeated qubit in subset")
    _check_qubits(sv, qubits)
    n = sv.n
    p = (sv.amps.real ** 2 + sv.amps.imag ** 2).reshape((2,) * n)
    axes = [n - 1 - q for q in qubits]
    rest = tuple(a for a in range(n) if a not in axes)
    m = p.sum(axis=rest) if rest else p
    # remaining axes are in increasing axis order; reorder to match `qubits`
    kept = sorted(axes)
    m = np.transpose(m, [kept.index(a) for a in axes])
    return m.reshape(-1)


def _validate(p: Program) -> None:
    diags = validate(p)
    if diags:
        raise InvalidProgramError(diags)


def _terminal_measurements(p: Program) -> bool:
    """True when the program is flat and no gate touches an already measured qubit."""
    measured: set[int] = set()
    for ins in p.body:
        if isinstance(ins, Measure):
            measured.add(ins.qubit)
        elif isinstance(ins, Gate):
            if measured.intersection(ins.qubits):
                return False
        else:
            return False
    return True


def _counts_from_keys(keys: np.ndarray, m: int) -> dict[str, int]:
    vals, cnt = np.unique(keys, return_counts=True)
    return {format(int(v), f"0{m}b") if m else "": int(c) for v, c in zip(vals, cnt)}


def sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling of basis indices (one uniform draw per shot)."""
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(shots) * cdf[-1], side="right")
    return np.minimum(idx, len(probs) - 1)


def run(p: Program, opts: SimOptions | None = None, shots: int = 1024) -> RunResult:
    """Execute ``p`` for ``shots`` shots.

    Programs whose measurements are all terminal are simulated once and
    sampled; the final state is returned. Anything with mid-circuit
    measurement or classical control is executed shot by shot and the state
    is ``None``. Counts are keyed by the classical register, highest cbit
    first, using bit 0 of each cbit's value.
    """
    opts = opts or SimOptions()
    _validate(p)
    if shots < 0:
        raise ValueError("shots must be >= 0")
    rng = np.random.default_rng(opts.seed)
    m = p.cbit_count
    if _terminal_measurements(p):
        sv = evolve(StateVector(p.qubit_count), p.gates(), opts)
        meas = [ins for ins in p.body if isinstance(ins, Measure)]
        if not meas:
            return RunResult({"0" * m: shots} if shots else {}, sv)
        probs = sv.amps.real ** 2 + sv.amps.imag ** 2
        idx = sample_indices(probs, shots, rng)
        last: dict[int, int] = {}
        for ins in meas:
            last[ins.cbit] = ins.qubit
        keys = np.zeros(shots, dtype=np.int64)
        for c, q in last.items():
            keys |= ((idx >> q) & 1) << c
        return RunResult(_counts_from_keys(keys, m), sv)
    return RunResult(_run_dynamic(p, opts, shots, rng), None)


def _run_dynamic(p: Program, opts: SimOptions, shots: int, rng) -> dict[str, int]:
    prefix = 0
    while prefix < len(p.body) and isinstance(p.body[prefix], Gate):
        prefix += 1
    start = evolve(StateVector(p.qubit_count), p.body[:prefix], opts)
    rest = p.body[prefix:]
    keys = np.zeros(shots, dtype=np.int64)
    for s in range(shots):
        ex = _Executor(start.copy(), p.cbit_count, opts, rng)
        ex.exec_block(rest)
        keys[s] = sum((int(v) & 1) << c for c, v in enumerate(ex.cbits))
    return _counts_from_keys(keys, p.cbit_count)


def measure_qubit(sv: StateVector, q: int, u: float) -> int:
    """Collapse qubit ``q`` using the uniform draw ``u``; return the outcome."""
    t = sv.amps.reshape(-1, 2, 1 << q)
    p1 = float(np.sum(t[:, 1, :].real ** 2 + t[:, 1, :].imag ** 2))
    total = sv.norm()
    bit = 1 if u * total < p1 else 0
    keep = p1 if bit else total - p1
    t[:, 1 - bit, :] = 0.0
    if keep > 0:
        t *= 1.0 / np.sqrt(keep)
    return bit


class _Executor:
    def __init__(self, sv: StateVector, m: int, opts: SimOptions, rng):
        self.sv = sv
        self.cbits = [0] * m
        self.opts = opts
        self.rng = rng

    def exec_block(self, body) -> None:
        for ins in body:
            if isinstance(ins, Gate):
                apply_gate(self.sv, ins, self.opts)
            elif isinstance(ins, Measure):
                self.cbits[ins.cbit] = measure_qubit(self.sv, ins.qubit, self.rng.random())
            elif isinstance(ins, Assign):
                self.cbits[ins.cbit] = int(ins.expr.evaluate(self.cbits))
            elif isinstance(ins, QIf):
                if ins.condition.evaluate(self.cbits):
                    self.exec_block(ins.then_body)
                elif ins.else_body is not None:
                    self.exec_block(ins.else_body)
            elif isinstance(ins, QWhile):
                it = 0
                while ins.condition.evaluate(self.cbits):
                    if it >= self.opts.max_while_iterations:
                        raise NonTerminationGuard(
                            f"loop exceeded {self.opts.max_while_iterations} iterations")
                    self.exec_block(ins.body)
                    it += 1
            else:
                raise TypeError(f"unknown instruction {ins!r}")
