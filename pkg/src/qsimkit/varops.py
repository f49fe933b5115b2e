"""Pauli operators, Hamiltonian expectations and parameter-shift gradients."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .circuit import Gate, GateKind, Program
from .errors import NonHermitianError, ParameterPositionError
from .statevector import SimOptions, StateVector, evolve

PRUNE_ATOL = 1e-14
HERMITIAN_ATOL = 1e-12
IMAG_RESIDUE_ATOL = 1e-10

# (a, b) -> (phase, product) for single-qubit Paulis
_TABLE = {
    ("X", "X"): (1, ""), ("Y", "Y"): (1, ""), ("Z", "Z"): (1, ""),
    ("X", "Y"): (1j, "Z"), ("Y", "Z"): (1j, "X"), ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"), ("Z", "Y"): (-1j, "X"), ("X", "Z"): (-1j, "Y"),
}
_WORD = re.compile(r"([XYZ])(\d+)$")


def parse_pauli_string(s: str) -> tuple[tuple[int, str], ...]:
    """``"X0 Z2"`` -> ``((0, "X"), (2, "Z"))``; ``""`` or ``"I"`` is the identity."""
    out = {}
    for w in s.split():
        if w == "I":
            continue
        m = _WORD.match(w)
        if not m:
            raise ValueError(f"bad Pauli factor {w!r}")
        q = int(m.group(2))
        if q in out:
            raise ValueError(f"qubit {q} repeated in {s!r}")
        out[q] = m.group(1)
    return tuple(sorted(out.items()))


def _fmt_key(key) -> str:
    return " ".join(f"{p}{q}" for q, p in key) or "I"


@dataclass(frozen=True)
class PauliOperator:
    """Sum of Pauli strings with complex coefficients. Immutable."""

    terms: Mapping = field(default_factory=dict)

    def __post_init__(self):
        acc: dict = {}
        for k, c in dict(self.terms).items():
            key = parse_pauli_string(k) if isinstance(k, str) else tuple(sorted(k))
            if any(q < 0 for q, _ in key):
                raise ValueError("qubit indices must be non-negative")
            acc[key] = acc.get(key, 0) + complex(c)
        pruned = {k: c for k, c in acc.items() if abs(c) > PRUNE_ATOL}
        object.__setattr__(self, "terms", dict(sorted(pruned.items())))

    @classmethod
    def identity(cls, c: complex = 1.0) -> "PauliOperator":
        return cls({(): c})

    def __add__(self, other):
        other = _as_op(other)
        d = dict(self.terms)
        for k, c in other.terms.items():
            d[k] = d.get(k, 0) + c
        return PauliOperator(d)

    __radd__ = __add__

    def __neg__(self):
        return PauliOperator({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_op(other))

    def __rsub__(self, other):
        return _as_op(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return PauliOperator({k: c * other for k, c in self.terms.items()})
        return pauli_multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        return isinstance(other, PauliOperator) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def allclose(self, other: "PauliOperator", atol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= atol for k in keys)

    @property
    def num_qubits(self) -> int:
        return max((q + 1 for k in self.terms for q, _ in k), default=0)

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return all(abs(c.imag) <= atol for c in self.terms.values())

    def to_text(self) -> str:
        lines = []
        for k, c in self.terms.items():
            cs = repr(c.real) if c.imag == 0 else repr(c)
            lines.append(f"{cs} {_fmt_key(k)}".rstrip() if k else cs)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PauliOperator":
        """One ``coefficient pauli-string`` per line, e.g. ``0.5 X0 Z1``."""
        terms: dict = {}
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, rest = line.partition(" ")
            try:
                c = complex(head.replace("i", "j"))
                key = parse_pauli_string(rest)
            except ValueError as e:
                raise ValueError(f"line {no}: {e}") from None
            terms[key] = terms.get(key, 0) + c
        return cls(terms)

    @classmethod
    def load(cls, path) -> "PauliOperator":
        return cls.from_text(Path(path).read_text())

    def __repr__(self):
        inner = " + ".join(f"{c:g}*[{_fmt_key(k)}]" for k, c in self.terms.items())
        return f"PauliOperator({inner or '0'})"


def _as_op(x) -> PauliOperator:
    if isinstance(x, PauliOperator):
        return x
    return PauliOperator.identity(complex(x))


def _mul_strings(a, b):
    da, db = dict(a), dict(b)
    phase = 1 + 0j
    out = {}
    for q in sorted(set(da) | set(db)):
        pa, pb = da.get(q), db.get(q)
        if pa is None or pb is None:
            out[q] = pa or pb
            continue
        ph, prod = _TABLE[(pa, pb)]
        phase *= ph
        if prod:
            out[q] = prod
    return phase, tuple(sorted(out.items()))


def pauli_multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    acc: dict = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            ph, k = _mul_strings(ka, kb)
            acc[k] = acc.get(k, 0) + ph * ca * cb
    return PauliOperator(acc)


# --------------------------------------------------------------------------- expectation

def pauli_expectation(amps: np.ndarray, key) -> complex:
    """``<psi|P|psi>`` for one Pauli string, using bit masks on basis indices."""
    flip = zmask = 0
    ny = 0
    for q, p in key:
        if p in "XY":
            flip |= 1 << q
        if p in "YZ":
            zmask |= 1 << q
        ny += p == "Y"
    idx = np.arange(amps.shape[0], dtype=np.int64)
    sign = 1 - 2 * (np.bitwise_count(idx & zmask) & 1).astype(np.float64)
    # P|i> = i^ny (-1)^{popcount(i & zmask)} |i ^ flip>
    val = np.vdot(amps[idx ^ flip], sign * amps)
    return complex(val) * (1j ** ny)


def expectation_state(sv: StateVector, H: PauliOperator) -> float:
    if not H.is_hermitian():
        raise NonHermitianError("Hamiltonian is not Hermitian (complex coefficients)")
    if H.num_qubits > sv.n:
        raise ValueError(f"Hamiltonian acts on {H.num_qubits} qubits, state has {sv.n}")
    total = 0j
    for key, c in H.terms.items():
        total += c.real * pauli_expectation(sv.amps, key)
    if abs(total.imag) > IMAG_RESIDUE_ATOL:
        raise ArithmeticError(f"expectation has imaginary part {total.imag:.3g}")
    return float(total.real)


def expectation(p: Program, H: PauliOperator, opts: SimOptions | None = None) -> float:
    """``<psi|H|psi>`` for the final state of a measurement-free program."""
    if not p.is_unitary:
        raise ValueError("expectation needs a measurement-free program")
    return expectation_state(evolve(StateVector(p.qubit_count), p.body, opts), H)


# --------------------------------------------------------------------------- parameters

@dataclass(frozen=True)
class Param:
    """Symbolic angle ``scale * value(name) + offset``."""

    name: str
    scale: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class ParamGate:
    kind: GateKind
    targets: tuple
    params: tuple
    controls: tuple = ()
    dagger: bool = False

    def bind(self, values: Mapping[str, float]) -> Gate:
        ps = tuple(values[a.name] * a.scale + a.offset if isinstance(a, Param) else a
                   for a in self.params)
        return Gate(self.kind, self.targets, ps, self.controls, self.dagger)


def var_rx(q, name, scale=1.0, offset=0.0):
    return ParamGate(GateKind.RX, (q,), (Param(name, scale, offset),))


def var_ry(q, name, scale=1.0, offset=0.0):
    return ParamGate(GateKind.RY, (q,), (Param(name, scale, offset),))


def var_rz(q, name, scale=1.0, offset=0.0):
    return ParamGate(GateKind.RZ, (q,), (Param(name, scale, offset),))


@dataclass(frozen=True)
class ParamCircuit:
    """Gate template with symbolic angles; ``params`` names them in order."""

    qubit_count: int
    body: tuple
    params: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "params", tuple(self.params))
        if len(set(self.params)) != len(self.params):
            raise ValueError("duplicate parameter name")
        declared = set(self.params)
        for g in self.body:
            if not isinstance(g, (Gate, ParamGate)):
                raise TypeError("parameterised circuits hold gates only")
            for a in getattr(g, "params", ()):
                if isinstance(a, Param) and a.name not in declared:
                    raise ValueError(f"parameter {a.name!r} is not declared")

    def _values(self, at) -> dict[str, float]:
        if isinstance(at, Mapping):
            missing = set(self.params) - set(at)
            if missing:
                raise ValueError(f"missing parameter values: {sorted(missing)}")
            return {k: float(at[k]) for k in self.params}
        at = list(at)
        if len(at) != len(self.params):
            raise ValueError(f"expected {len(self.params)} values, got {len(at)}")
        return dict(zip(self.params, map(float, at)))

    def bind(self, at) -> Program:
        """A fresh Program with every symbolic angle evaluated."""
        vals = self._values(at)
        return Program(self.qubit_count, 0,
                       tuple(g.bind(vals) if isinstance(g, ParamGate) else g for g in self.body))


_SHIFTABLE = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})


def gradient(pc: ParamCircuit, H: PauliOperator, at, opts: SimOptions | None = None) -> np.ndarray:
    """Parameter-shift gradient of ``<H>`` with respect to ``pc.params``.

    Each occurrence of a parameter is shifted by +-pi/2 in its rotation angle;
    the chain-rule factor is its scale (negated for daggered rotations).
    """
    vals = pc._values(at)
    occ: dict[str, list[tuple[int, float]]] = {n: [] for n in pc.params}
    for i, g in enumerate(pc.body):
        if not isinstance(g, ParamGate):
            continue
        for j, a in enumerate(g.params):
            if not isinstance(a, Param):
                continue
            if g.kind not in _SHIFTABLE or g.controls:
                where = ("controlled " if g.controls else "") + g.kind.value
                raise ParameterPositionError(
                    f"parameter {a.name!r} appears in a non-rotation position ({where})")
            occ[a.name].append((i, -a.scale if g.dagger else a.scale))
    base = [g.bind(vals) if isinstance(g, ParamGate) else g for g in pc.body]
    grad = np.zeros(len(pc.params))
    for k, name in enumerate(pc.params):
        acc = []
        for i, factor in occ[name]:
            g = base[i]
            # shift the applied angle; a daggered rotation applies -param
            s = -1.0 if g.dagger else 1.0
            ev = []
            for shift in (math.pi / 2, -math.pi / 2):
                body = list(base)
                body[i] = g.replace(params=(g.params[0] + s * shift,))
                ev.append(expectation(Program(pc.qubit_count, 0, tuple(body)), H, opts))
            acc.append(factor * 0.5 * (ev[0] - ev[1]))
        grad[k] = math.fsum(acc)
    return grad


def finite_difference(pc: ParamCircuit, H: PauliOperator, at, h: float = 1e-5,
                      opts: SimOptions | None = None) -> np.ndarray:
    """Central finite differences of ``<H>`` (reference for ``gradient``)."""
    vals = pc._values(at)
    out = np.zeros(len(pc.params))
    for k, name in enumerate(pc.params):
        plus, minus = dict(vals), dict(vals)
        plus[name] += h
        minus[name] -= h
        out[k] = (expectation(pc.bind(plus), H, opts) - expectation(pc.bind(minus), H, opts)) / (2 * h)
    return out
