"""Layered random-circuit benchmark and per-phase timing."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .circuit import Gate, GateKind, Measure, Program, cnot
from .compiler.peephole import peephole
from .fusion import fuse_circuit
from .noise import NoiseModel, run_noisy
from .pathsum import single_amplitude
from .statevector import SimOptions, StateVector, evolve

BACKENDS = ("statevector", "noisy", "path")
_AXES = (GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class BenchSpec:
    n: int
    d: int
    seed: int = 0
    backend: str = "statevector"
    fusion: bool = False
    peephole: bool = False
    workers: int = 1
    max_fused_qubits: int = 3
    shots: int = 1000
    noise: NoiseModel | None = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("bench needs n >= 1 and d >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.workers < 1 or self.shots < 1 or self.max_fused_qubits < 1:
            raise ValueError("workers, shots and max_fused_qubits must be positive")

    @property
    def opt_label(self) -> str:
        flags = [f for f, on in (("fusion", self.fusion), ("peephole", self.peephole)) if on]
        return ",".join(flags) or "none"


@dataclass
class BenchResult:
    spec: BenchSpec
    times: dict[str, float] = field(default_factory=dict)
    gates_before: int = 0
    gates_after: int = 0
    checksum: float = 0.0

    @property
    def total(self) -> float:
        return sum(self.times.values())


def gen_random_circuit(spec: BenchSpec) -> Program:
    """``d`` layers of random-axis rotations followed by a ring of CNOTs.

    For each qubit the axis and then the angle are drawn from one generator
    seeded with ``spec.seed``. The CNOT layer uses control ``(i+1) % n`` and
    target ``i`` and is empty for a single qubit.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    body: list[Gate] = []
    for _ in range(spec.d):
        for q in range(n):
            kind = _AXES[int(rng.integers(3))]
            body.append(Gate(kind, (q,), (float(rng.uniform(0.0, 2 * math.pi)),)))
        if n > 1:
            body += [cnot((i + 1) % n, i) for i in range(n)]
    return Program(n, 0, tuple(body))


def checksum(probs: np.ndarray) -> float:
    """Order-sensitive digest: sum of p_i * (i + 1)."""
    return math.fsum(np.asarray(probs, dtype=float) * np.arange(1, len(probs) + 1))


def run_bench(spec: BenchSpec) -> BenchResult:
    res = BenchResult(spec)
    t0 = time.perf_counter()
    p = gen_random_circuit(spec)
    t1 = time.perf_counter()
    res.gates_before = len(p.body)
    if spec.peephole:
        p = peephole(p)
    if spec.fusion and spec.backend == "statevector":
        p = fuse_circuit(p, spec.max_fused_qubits)
    res.gates_after = len(p.body)
    t2 = time.perf_counter()
    opts = SimOptions(workers=spec.workers, seed=spec.seed)
    if spec.backend == "statevector":
        sv = evolve(StateVector(spec.n), p.body, opts)
        probs = sv.amps.real ** 2 + sv.amps.imag ** 2
    elif spec.backend == "noisy":
        measured = Program(spec.n, spec.n, p.body + tuple(Measure(q, q) for q in range(spec.n)))
        counts = run_noisy(measured, spec.noise or NoiseModel(), opts, spec.shots)
        probs = np.zeros(1 << spec.n)
        for bits, c in counts.items():
            probs[int(bits, 2)] = c / spec.shots
    else:
        probs = np.array([abs(single_amplitude(p, format(i, f"0{spec.n}b"))) ** 2
                          for i in range(1 << spec.n)])
    t3 = time.perf_counter()
    res.checksum = checksum(probs)
    res.times = {"build": t1 - t0, "compile": t2 - t1, "execute": t3 - t2}
    return res


TABLE_HEADER = ("n", "d", "seed", "backend", "opt", "workers", "build_s", "compile_s",
                "execute_s", "gates_before", "gates_after", "checksum")


def table_row(r: BenchResult) -> str:
    s = r.spec
    cells = (s.n, s.d, s.seed, s.backend, s.opt_label, s.workers,
             f"{r.times['build']:.6f}", f"{r.times['compile']:.6f}", f"{r.times['execute']:.6f}",
             r.gates_before, r.gates_after, repr(r.checksum))
    return "\t".join(map(str, cells))
