"""Kraus-operator noise: channels, noise models, trajectory and density engines.

The production engine samples trajectories in fixed-size chunks; chunk ``c``
draws from ``default_rng([seed, c])``, so counts do not depend on how many
workers process the chunks. The density-matrix engine is exact and meant as
a reference for small registers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import (Assign, Gate, GateKind, Measure, Program, QIf, QWhile, gate_matrix,
                      validate)
from .errors import InvalidProgramError, NoiseModelError, NonTerminationGuard
from .linalg import apply_operator
from .statevector import SimOptions, run

COMPLETENESS_ATOL = 1e-10
TRAJECTORY_CHUNK = 4096
FAMILIES = ("damping", "dephasing", "decoherence", "depolarizing", "bit_phase_flip",
            "phase_damping")

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.ops)
        if not ops:
            raise NoiseModelError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if d < 2 or d & (d - 1) or any(k.shape != (d, d) for k in ops):
            raise NoiseModelError("Kraus operators must be square with a common 2^k size")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "ops", ops)
        err = completeness_error(ops)
        if err > COMPLETENESS_ATOL:
            raise NoiseModelError(f"Kraus operators are not complete (error {err:.3g})")

    @property
    def arity(self) -> int:
        return self.ops[0].shape[0].bit_length() - 1

    def is_identity(self, atol: float = 1e-14) -> bool:
        """True if every operator is a multiple of the identity."""
        eye = np.eye(self.ops[0].shape[0])
        return all(np.max(np.abs(k - k[0, 0] * eye)) <= atol for k in self.ops)

    def superop_apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.ops)


def completeness_error(ops) -> float:
    """``max |sum K^dag K - I|`` over entries."""
    s = sum(k.conj().T @ k for k in ops)
    return float(np.max(np.abs(s - np.eye(s.shape[0]))))


@dataclass(frozen=True)
class DecoherenceParams:
    t_gate: float
    T1: float
    T2: float

    def __post_init__(self):
        if not (self.t_gate > 0 and self.T1 > 0 and self.T2 > 0):
            raise NoiseModelError("t_gate, T1 and T2 must be positive")
        if self.T2 > 2 * self.T1:
            raise NoiseModelError("T2 must not exceed 2*T1")

    @property
    def p_damping(self) -> float:
        return 1.0 - math.exp(-self.t_gate / self.T1)

    @property
    def p_dephasing(self) -> float:
        return 0.5 * (1.0 - math.exp(-(self.t_gate / self.T2 - self.t_gate / (2 * self.T1))))


def _damping(p):
    return [np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex),
            np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)]


def _dephasing(p):
    return [math.sqrt(1 - p) * _I, math.sqrt(p) * _Z]


def make_channel(family: str, p: float | None = None,
                 params: DecoherenceParams | None = None) -> KrausChannel:
    """Build one of the six single-qubit channel families."""
    family = family.lower()
    if family == "decoherence":
        if params is None:
            raise NoiseModelError("decoherence needs DecoherenceParams")
        kd = _damping(params.p_damping)
        kp = _dephasing(params.p_dephasing)
        return KrausChannel((kd[0] @ kp[0], kd[0] @ kp[1], kd[1] @ kp[0], kd[1] @ kp[1]))
    if family not in FAMILIES:
        raise NoiseModelError(f"unknown channel family {family!r}")
    if p is None or not 0.0 <= p <= 1.0:
        raise NoiseModelError(f"error rate must be in [0, 1], got {p}")
    if family == "damping":
        ops = _damping(p)
    elif family == "dephasing":
        ops = _dephasing(p)
    elif family == "depolarizing":
        r = math.sqrt(p) / 2
        ops = [math.sqrt(1 - 3 * p / 4) * _I, r * _X, r * _Y, r * _Z]
    elif family == "bit_phase_flip":
        r = math.sqrt(p)
        ops = [math.sqrt(1 - p) * _I, np.array([[0, -1j * r], [1j * r, 0]])]
    else:
        ops = [np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex),
               np.array([[0, 0], [0, math.sqrt(p)]], dtype=complex)]
    return KrausChannel(tuple(ops))


# --------------------------------------------------------------------------- model

@dataclass(frozen=True)
class NoiseRule:
    """Channel applied after gates of ``kinds`` (None: any kind) on ``qubits`` (None: any)."""

    channel: KrausChannel
    kinds: frozenset | None = None
    qubits: frozenset | None = None

    def targets(self, g: Gate) -> list[tuple[int, ...]]:
        """Qubit tuples the channel acts on after ``g`` (empty if the rule does not match)."""
        if self.kinds is not None and g.kind not in self.kinds:
            return []
        qs = g.qubits
        if self.channel.arity == 1:
            return [(q,) for q in qs if self.qubits is None or q in self.qubits]
        if self.channel.arity != len(qs):
            raise NoiseModelError(
                f"{self.channel.arity}-qubit channel cannot follow a {len(qs)}-qubit gate")
        if self.qubits is not None and not set(qs) <= self.qubits:
            return []
        return [qs]


def confusion_matrix(v) -> np.ndarray:
    """A 2x2 confusion matrix, or a readout fidelity f meaning [[f, 1-f], [1-f, f]]."""
    if np.isscalar(v):
        f = float(v)
        if not 0 <= f <= 1:
            raise NoiseModelError("readout fidelity must be in [0, 1]")
        m = np.array([[f, 1 - f], [1 - f, f]])
    else:
        m = np.array(v, dtype=float)
    if m.shape != (2, 2) or np.any(m < 0):
        raise NoiseModelError("confusion matrix must be 2x2 and non-negative")
    if np.max(np.abs(m.sum(axis=1) - 1)) > 1e-10:
        raise NoiseModelError("confusion matrix rows must sum to 1")
    return m


@dataclass
class NoiseModel:
    """``readout[q][i, j]`` is the probability of reporting ``j`` when qubit ``q`` is ``i``."""

    rules: list[NoiseRule] = field(default_factory=list)
    readout: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.readout = {int(q): confusion_matrix(m) for q, m in self.readout.items()}

    def add(self, channel: KrausChannel, kinds=None, qubits=None) -> "NoiseModel":
        if kinds is not None:
            kinds = frozenset(k if isinstance(k, GateKind) else GateKind.from_name(k)
                              for k in kinds)
        if qubits is not None:
            qubits = frozenset(int(q) for q in qubits)
        self.rules.append(NoiseRule(channel, kinds, qubits))
        return self

    def set_readout(self, qubit: int, m) -> "NoiseModel":
        self.readout[int(qubit)] = confusion_matrix(m)
        return self

    def channels_after(self, g: Gate) -> list[tuple[KrausChannel, tuple[int, ...]]]:
        return [(r.channel, qs) for r in self.rules for qs in r.targets(g)]

    def active(self) -> "NoiseModel":
        """Copy without identity channels and without identity readout matrices."""
        return NoiseModel([r for r in self.rules if not r.channel.is_identity()],
                          {q: m for q, m in self.readout.items()
                           if not np.array_equal(m, np.eye(2))})

    @property
    def is_empty(self) -> bool:
        return not self.rules and not self.readout

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        """Schema::

            {"rules": [{"family": "depolarizing", "p": 0.01,
                        "gates": ["H", "CNOT"], "qubits": [0, 1]},
                       {"family": "decoherence", "t_gate": 5e-8, "T1": 2e-5, "T2": 1e-5}],
             "readout": {"0": [[0.97, 0.03], [0.05, 0.95]], "1": 0.98}}

        ``gates`` and ``qubits`` are optional; a bare number under ``readout``
        is a symmetric readout fidelity.
        """
        unknown = set(d) - {"rules", "readout"}
        if unknown:
            raise NoiseModelError(f"unknown noise model keys: {sorted(unknown)}")
        nm = cls()
        for r in d.get("rules", []):
            extra = set(r) - {"family", "p", "t_gate", "T1", "T2", "gates", "qubits"}
            if extra or "family" not in r:
                raise NoiseModelError(f"bad noise rule {r!r}")
            if r["family"] == "decoherence":
                ch = make_channel("decoherence",
                                  params=DecoherenceParams(r["t_gate"], r["T1"], r["T2"]))
            else:
                ch = make_channel(r["family"], r.get("p"))
            try:
                nm.add(ch, r.get("gates"), r.get("qubits"))
            except ValueError as e:
                raise NoiseModelError(str(e)) from e
        for q, m in d.get("readout", {}).items():
            nm.set_readout(int(q), m)
        return nm

    @classmethod
    def load(cls, path) -> "NoiseModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as e:
            raise NoiseModelError(f"{path}: {e}") from e


# --------------------------------------------------------------------------- density engine

def evolve_density(rho: np.ndarray, ch: KrausChannel, qubits, n: int | None = None) -> np.ndarray:
    """``sum_i K_i rho K_i^dag`` with the channel acting on ``qubits`` (first = MSB)."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if rho.ndim != 2 or rho.shape != (dim, dim) or dim & (dim - 1):
        raise ValueError("density matrix must be square with a power-of-two size")
    n = dim.bit_length() - 1 if n is None else n
    if dim != 1 << n or len(qubits) != ch.arity or any(not 0 <= q < n for q in qubits):
        raise ValueError("channel arity or qubits do not match the density matrix")
    return sum(_conj_apply(rho, k, qubits, n) for k in ch.ops)


def _conj_apply(rho, k, qubits, n):
    """``K rho K^dag`` for a (possibly non-unitary) operator on ``qubits``."""
    t = apply_operator(rho.T, k, qubits, n).T           # K rho
    return apply_operator(t.conj(), k, qubits, n).conj()  # (K (K rho)^dag)^dag


def density_distribution(p: Program, nm: NoiseModel | None = None,
                         max_while_iterations: int = 10 ** 4) -> dict[str, float]:
    """Exact distribution over classical registers, tracking measurement branches."""
    _validate(p)
    nm = nm or NoiseModel()
    n = p.qubit_count
    rho0 = np.zeros((1 << n, 1 << n), dtype=complex)
    rho0[0, 0] = 1.0
    branches = _DensityExec(n, nm, max_while_iterations).block(
        p.body, [(rho0, (0,) * p.cbit_count)])
    out: dict[str, float] = {}
    for rho, cb in branches:
        key = "".join(str(v & 1) for v in reversed(cb))
        out[key] = out.get(key, 0.0) + float(np.trace(rho).real)
    return out


class _DensityExec:
    def __init__(self, n, nm, guard):
        self.n, self.nm, self.guard = n, nm, guard

    def block(self, body, branches):
        for ins in body:
            branches = self.step(ins, branches)
        return branches

    def step(self, ins, branches):
        n = self.n
        if isinstance(ins, Gate):
            u = gate_matrix(ins)
            chans = self.nm.channels_after(ins)
            out = []
            for rho, cb in branches:
                rho = _conj_apply(rho, u, ins.qubits, n)
                for ch, qs in chans:
                    rho = evolve_density(rho, ch, qs, n)
                out.append((rho, cb))
            return out
        if isinstance(ins, Measure):
            conf = self.nm.readout.get(ins.qubit, np.eye(2))
            merged: dict = {}
            for rho, cb in branches:
                for b in (0, 1):
                    proj = np.diag([1.0 - b, float(b)])
                    r = _conj_apply(rho, proj, (ins.qubit,), n)
                    if np.trace(r).real <= 0:
                        continue
                    for rep in (0, 1):
                        if conf[b, rep] == 0:
                            continue
                        nc = list(cb)
                        nc[ins.cbit] = rep
                        key = tuple(nc)
                        merged[key] = merged.get(key, 0) + conf[b, rep] * r
            return [(r, k) for k, r in merged.items()]
        if isinstance(ins, Assign):
            out = []
            for rho, cb in branches:
                nc = list(cb)
                nc[ins.cbit] = int(ins.expr.evaluate(cb))
                out.append((rho, tuple(nc)))
            return out
        if isinstance(ins, QIf):
            yes = [b for b in branches if ins.condition.evaluate(b[1])]
            no = [b for b in branches if not ins.condition.evaluate(b[1])]
            yes = self.block(ins.then_body, yes)
            if ins.else_body is not None:
                no = self.block(ins.else_body, no)
            return yes + no
        if isinstance(ins, QWhile):
            done = []
            live = branches
            for _ in range(self.guard + 1):
                done += [b for b in live if not ins.condition.evaluate(b[1])]
                live = [b for b in live if ins.condition.evaluate(b[1])]
                if not live:
                    return done
                live = self.block(ins.body, live)
            raise NonTerminationGuard(f"loop exceeded {self.guard} iterations")
        raise TypeError(f"unknown instruction {ins!r}")


# --------------------------------------------------------------------------- trajectories

def _validate(p):
    diags = validate(p)
    if diags:
        raise InvalidProgramError(diags)


def _check_model(p: Program, nm: NoiseModel) -> None:
    def walk(body):
        for ins in body:
            if isinstance(ins, Gate):
                nm.channels_after(ins)
            elif isinstance(ins, QIf):
                walk(ins.then_body)
                walk(ins.else_body or ())
            elif isinstance(ins, QWhile):
                walk(ins.body)
    walk(p.body)


def run_noisy(p: Program, nm: NoiseModel, opts: SimOptions | None = None,
              shots: int = 1024) -> dict[str, int]:
    """Sample ``shots`` noisy trajectories and return classical-register counts."""
    opts = opts or SimOptions()
    _validate(p)
    _check_model(p, nm)
    nm = nm.active()
    if nm.is_empty:
        return run(p, opts, shots).counts
    sizes = [TRAJECTORY_CHUNK] * (shots // TRAJECTORY_CHUNK)
    if shots % TRAJECTORY_CHUNK:
        sizes.append(shots % TRAJECTORY_CHUNK)

    def chunk(c):
        rng = np.random.default_rng([opts.seed, c])
        return _TrajectoryExec(p, nm, sizes[c], rng, opts.max_while_iterations).keys()

    if opts.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(opts.workers) as ex:
            parts = list(ex.map(chunk, range(len(sizes))))
    else:
        parts = [chunk(c) for c in range(len(sizes))]
    keys = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    vals, cnt = np.unique(keys, return_counts=True)
    m = p.cbit_count
    return {format(int(v), f"0{m}b") if m else "": int(c) for v, c in zip(vals, cnt)}


class _TrajectoryExec:
    def __init__(self, p: Program, nm: NoiseModel, size: int, rng, guard: int):
        self.n = p.qubit_count
        self.nm = nm
        self.rng = rng
        self.guard = guard
        self.states = np.zeros((size, 1 << self.n), dtype=complex)
        self.states[:, 0] = 1.0
        self.cbits = [np.zeros(size, dtype=np.int64) for _ in range(p.cbit_count)]
        self.body = p.body

    def keys(self) -> np.ndarray:
        self.block(self.body, np.arange(self.states.shape[0]))
        keys = np.zeros(self.states.shape[0], dtype=np.int64)
        for c, v in enumerate(self.cbits):
            keys |= (v & 1) << c
        return keys

    def block(self, body, idx):
        for ins in body:
            if idx.size == 0:
                return
            self.step(ins, idx)

    def _cond(self, expr, idx):
        v = expr.evaluate([c[idx] for c in self.cbits])
        return np.broadcast_to(np.asarray(v) != 0, idx.shape)

    def step(self, ins, idx):
        n = self.n
        if isinstance(ins, Gate):
            s = apply_operator(self.states[idx], gate_matrix(ins), ins.qubits, n)
            for ch, qs in self.nm.channels_after(ins):
                s = self._kraus(s, ch, qs)
            self.states[idx] = s
        elif isinstance(ins, Measure):
            s = self.states[idx]
            q = ins.qubit
            t = s.reshape(len(idx), -1, 2, 1 << q)
            p1 = np.sum(np.abs(t[:, :, 1, :]) ** 2, axis=(1, 2))
            bit = (self.rng.random(len(idx)) < p1).astype(np.int64)
            keep = np.where(bit == 1, p1, 1.0 - p1)
            t[bit == 1, :, 0, :] = 0
            t[bit == 0, :, 1, :] = 0
            t *= (1.0 / np.sqrt(np.maximum(keep, 1e-300)))[:, None, None, None]
            self.states[idx] = s
            conf = self.nm.readout.get(q)
            if conf is not None:
                flip = self.rng.random(len(idx)) < conf[bit, 1 - bit]
                bit = np.where(flip, 1 - bit, bit)
            self.cbits[ins.cbit][idx] = bit
        elif isinstance(ins, Assign):
            v = ins.expr.evaluate([c[idx] for c in self.cbits])
            self.cbits[ins.cbit][idx] = np.broadcast_to(np.asarray(v, dtype=np.int64), idx.shape)
        elif isinstance(ins, QIf):
            m = self._cond(ins.condition, idx)
            self.block(ins.then_body, idx[m])
            if ins.else_body is not None:
                self.block(ins.else_body, idx[~m])
        elif isinstance(ins, QWhile):
            live = idx[self._cond(ins.condition, idx)]
            it = 0
            while live.size:
                if it >= self.guard:
                    raise NonTerminationGuard(f"loop exceeded {self.guard} iterations")
                self.block(ins.body, live)
                live = live[self._cond(ins.condition, live)]
                it += 1
        else:
            raise TypeError(f"unknown instruction {ins!r}")

    def _kraus(self, s, ch: KrausChannel, qs):
        # pick K_i with probability ||K_i psi||^2, then renormalise
        outs = np.stack([apply_operator(s, k, qs, self.n) for k in ch.ops])
        w = np.sum(np.abs(outs) ** 2, axis=2)                  # (r, B)
        cdf = np.cumsum(w, axis=0)
        u = self.rng.random(s.shape[0]) * cdf[-1]
        pick = np.minimum((cdf <= u[None, :]).sum(axis=0), len(ch.ops) - 1)
        b = np.arange(s.shape[0])
        chosen = outs[pick, b]
        return chosen / np.sqrt(np.maximum(w[pick, b], 1e-300))[:, None]
