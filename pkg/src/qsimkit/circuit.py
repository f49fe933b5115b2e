"""Circuit IR: gates, measurements, classical control flow, and gate matrices.

Conventions used throughout the package:

* State-vector index ``i`` encodes basis states with qubit 0 as the least
  significant bit.
* A gate matrix acts on the ordered qubit list ``controls + targets`` and the
  *first* listed qubit is the *most* significant bit of the matrix index, so
  controls occupy the high positions: ``|1..1><1..1| (x) U + rest (x) I``.
* Bit strings (counts keys, amplitude targets) are written most significant
  first: character 0 is the highest qubit / classical bit.
* Angles are radians. Global phase is not tracked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import NonUnitaryError

UNITARY_ATOL = 1e-10


class GateKind(Enum):
    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"
    H = "H"
    S = "S"
    T = "T"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    U3 = "U3"
    CNOT = "CNOT"
    CZ = "CZ"
    SWAP = "SWAP"
    TOFFOLI = "TOFFOLI"
    CUSTOM = "UNITARY"

    @property
    def n_targets(self) -> int | None:
        """Fixed target count, or None for CUSTOM (derived from its matrix)."""
        return _N_TARGETS.get(self)

    @property
    def n_params(self) -> int:
        return _N_PARAMS.get(self, 0)

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @classmethod
    def from_name(cls, name: str) -> "GateKind":
        return cls(name.upper())


_N_TARGETS = {k: 1 for k in ("I", "X", "Y", "Z", "H", "S", "T", "RX", "RY", "RZ", "U3")}
_N_TARGETS.update(CNOT=2, CZ=2, SWAP=2, TOFFOLI=3)
_N_TARGETS = {GateKind(k): v for k, v in _N_TARGETS.items()}
_N_PARAMS = {GateKind.RX: 1, GateKind.RY: 1, GateKind.RZ: 1, GateKind.U3: 3}

SELF_INVERSE = frozenset(
    {GateKind.I, GateKind.X, GateKind.Y, GateKind.Z, GateKind.H,
     GateKind.CNOT, GateKind.CZ, GateKind.SWAP, GateKind.TOFFOLI}
)


# --------------------------------------------------------------------------- matrices

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED = {
    GateKind.I: np.eye(2, dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.H: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.T: np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.SWAP: np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_tof = np.eye(8, dtype=complex)
_tof[[6, 7]] = _tof[[7, 6]]
_FIXED[GateKind.TOFFOLI] = _tof
for _m in _FIXED.values():
    _m.setflags(write=False)


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s],
         [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c]],
        dtype=complex,
    )


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])), initial=0.0)) <= atol


def controlled(u: np.ndarray, n_controls: int) -> np.ndarray:
    """Embed ``u`` under ``n_controls`` controls placed in the high index bits."""
    if n_controls == 0:
        return u
    d = u.shape[0]
    full = np.eye(d << n_controls, dtype=complex)
    full[-d:, -d:] = u
    return full


# --------------------------------------------------------------------------- gates

@dataclass(frozen=True, eq=False)
class Gate:
    """A gate application. ``targets`` order matters (CNOT is (control, target))."""

    kind: GateKind
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    controls: tuple[int, ...] = ()
    dagger: bool = False
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "controls", tuple(int(q) for q in self.controls))
        object.__setattr__(self, "params", tuple(float(a) for a in self.params))
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=complex)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    @property
    def arity(self) -> int:
        return len(self.controls) + len(self.targets)

    def base_matrix(self) -> np.ndarray:
        """Matrix on ``targets`` only, with ``dagger`` applied."""
        m = _kind_matrix(self)
        return m.conj().T if self.dagger else m

    def inverse(self) -> "Gate":
        return self.replace(dagger=not self.dagger)

    def replace(self, **kw) -> "Gate":
        d = dict(kind=self.kind, targets=self.targets, params=self.params,
                 controls=self.controls, dagger=self.dagger, matrix=self.matrix)
        d.update(kw)
        return Gate(**d)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.kind, self.targets, self.params, self.controls, self.dagger) != (
                other.kind, other.targets, other.params, other.controls, other.dagger):
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is None and other.matrix is None
        return self.matrix.shape == other.matrix.shape and bool(np.all(self.matrix == other.matrix))

    def __hash__(self):
        return hash((self.kind, self.targets, self.params, self.controls, self.dagger))


def _kind_matrix(g: Gate) -> np.ndarray:
    k = g.kind
    if k in _FIXED:
        return _FIXED[k]
    if k is GateKind.RX:
        return rx_matrix(g.params[0])
    if k is GateKind.RY:
        return ry_matrix(g.params[0])
    if k is GateKind.RZ:
        return rz_matrix(g.params[0])
    if k is GateKind.U3:
        return u3_matrix(*g.params)
    if k is GateKind.CUSTOM:
        if g.matrix is None:
            raise NonUnitaryError("custom unitary gate without a matrix")
        if g.matrix.shape != (1 << len(g.targets),) * 2:
            raise NonUnitaryError(
                f"custom matrix shape {g.matrix.shape} does not match {len(g.targets)} targets")
        if not is_unitary(g.matrix):
            raise NonUnitaryError("custom matrix is not unitary")
        return g.matrix
    raise ValueError(f"unknown gate kind {k}")


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary on ``controls + targets`` (controls in the most significant bits)."""
    return controlled(g.base_matrix(), len(g.controls))


# Convenience constructors --------------------------------------------------

def i_(q): return Gate(GateKind.I, (q,))
def x(q): return Gate(GateKind.X, (q,))
def y(q): return Gate(GateKind.Y, (q,))
def z(q): return Gate(GateKind.Z, (q,))
def h(q): return Gate(GateKind.H, (q,))
def s(q): return Gate(GateKind.S, (q,))
def t(q): return Gate(GateKind.T, (q,))
def sdg(q): return Gate(GateKind.S, (q,), dagger=True)
def tdg(q): return Gate(GateKind.T, (q,), dagger=True)
def rx(q, theta): return Gate(GateKind.RX, (q,), (theta,))
def ry(q, theta): return Gate(GateKind.RY, (q,), (theta,))
def rz(q, theta): return Gate(GateKind.RZ, (q,), (theta,))
def u3(q, theta, phi, lam): return Gate(GateKind.U3, (q,), (theta, phi, lam))
def cnot(c, tq): return Gate(GateKind.CNOT, (c, tq))
def cz(a, b): return Gate(GateKind.CZ, (a, b))
def swap(a, b): return Gate(GateKind.SWAP, (a, b))
def toffoli(c0, c1, tq): return Gate(GateKind.TOFFOLI, (c0, c1, tq))


def unitary(targets: Sequence[int], matrix) -> Gate:
    return Gate(GateKind.CUSTOM, tuple(targets), matrix=np.asarray(matrix, dtype=complex))


# --------------------------------------------------------------------------- classical

BINARY_OPS = ("+", "-", "*", "/", "==", "!=", "<", ">", "&&", "||", "^")


class ClassicalExpr:
    """Integer-valued expression over classical bits.

    ``&&`` and ``||`` are logical (yield 0/1), ``^`` is bitwise xor and ``/``
    truncates toward zero. Evaluation broadcasts over numpy arrays so a batch
    of trajectories can be evaluated at once.
    """

    def evaluate(self, cbits):
        raise NotImplementedError

    def cbit_refs(self) -> Iterator[int]:
        return iter(())


@dataclass(frozen=True)
class Const(ClassicalExpr):
    value: int

    def evaluate(self, cbits):
        return self.value


@dataclass(frozen=True)
class CBit(ClassicalExpr):
    index: int

    def evaluate(self, cbits):
        return cbits[..., self.index] if isinstance(cbits, np.ndarray) else cbits[self.index]

    def cbit_refs(self):
        yield self.index


def _truncdiv(a, b):
    if np.any(np.asarray(b) == 0):
        raise ZeroDivisionError("classical division by zero")
    q = np.abs(a) // np.abs(b)
    return np.where((np.asarray(a) < 0) != (np.asarray(b) < 0), -q, q)


_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _truncdiv,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "&&": lambda a, b: np.logical_and(a != 0, b != 0),
    "||": lambda a, b: np.logical_or(a != 0, b != 0),
    "^": lambda a, b: np.bitwise_xor(a, b),
}


@dataclass(frozen=True)
class BinOp(ClassicalExpr):
    op: str
    left: ClassicalExpr
    right: ClassicalExpr

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown classical operator {self.op!r}")

    def evaluate(self, cbits):
        out = _OPS[self.op](self.left.evaluate(cbits), self.right.evaluate(cbits))
        out = np.asarray(out).astype(np.int64)
        return int(out) if out.ndim == 0 else out

    def cbit_refs(self):
        yield from self.left.cbit_refs()
        yield from self.right.cbit_refs()


def as_expr(v) -> ClassicalExpr:
    return v if isinstance(v, ClassicalExpr) else Const(int(v))


# --------------------------------------------------------------------------- instructions

@dataclass(frozen=True)
class Measure:
    qubit: int
    cbit: int


@dataclass(frozen=True)
class Assign:
    """``c[cbit] = expr``"""

    cbit: int
    expr: ClassicalExpr


@dataclass(frozen=True)
class QIf:
    condition: ClassicalExpr
    then_body: tuple
    else_body: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "then_body", tuple(self.then_body))
        if self.else_body is not None:
            object.__setattr__(self, "else_body", tuple(self.else_body))


@dataclass(frozen=True)
class QWhile:
    condition: ClassicalExpr
    body: tuple

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))


Instruction = Union[Gate, Measure, Assign, QIf, QWhile]


@dataclass(frozen=True)
class Program:
    qubit_count: int
    cbit_count: int = 0
    body: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    def __iter__(self):
        return iter(self.body)

    def __len__(self):
        return len(self.body)

    def with_body(self, body: Iterable) -> "Program":
        return Program(self.qubit_count, self.cbit_count, tuple(body))

    def gates(self) -> list[Gate]:
        return [ins for ins in self.body if isinstance(ins, Gate)]

    @property
    def is_flat(self) -> bool:
        return all(isinstance(ins, (Gate, Measure)) for ins in self.body)

    @property
    def is_unitary(self) -> bool:
        return all(isinstance(ins, Gate) for ins in self.body)


def circuit(n: int, *gates, cbits: int = 0) -> Program:
    """Shorthand: ``circuit(2, h(0), cnot(0, 1))``."""
    return Program(n, cbits, gates)


# --------------------------------------------------------------------------- validation

@dataclass(frozen=True)
class Diagnostic:
    index: int
    reason: str

    def __str__(self):
        return f"instruction {self.index}: {self.reason}"


def validate(p: Program) -> list[Diagnostic]:
    """Return every invariant violation found in ``p`` (empty if valid)."""
    out: list[Diagnostic] = []
    for i, ins in enumerate(p.body):
        for reason in _check(ins, p.qubit_count, p.cbit_count):
            out.append(Diagnostic(i, reason))
    return out


def _check(ins, nq: int, nc: int) -> Iterator[str]:
    if isinstance(ins, Gate):
        yield from _check_gate(ins, nq)
    elif isinstance(ins, Measure):
        if not 0 <= ins.qubit < nq:
            yield f"qubit q[{ins.qubit}] out of range (qubit_count={nq})"
        if not 0 <= ins.cbit < nc:
            yield f"cbit c[{ins.cbit}] out of range (cbit_count={nc})"
    elif isinstance(ins, Assign):
        if not 0 <= ins.cbit < nc:
            yield f"cbit c[{ins.cbit}] out of range (cbit_count={nc})"
        yield from _check_expr(ins.expr, nc)
    elif isinstance(ins, QIf):
        yield from _check_expr(ins.condition, nc)
        for branch, body in (("then", ins.then_body), ("else", ins.else_body or ())):
            for j, sub in enumerate(body):
                for r in _check(sub, nq, nc):
                    yield f"{branch}[{j}]: {r}"
    elif isinstance(ins, QWhile):
        yield from _check_expr(ins.condition, nc)
        for j, sub in enumerate(ins.body):
            for r in _check(sub, nq, nc):
                yield f"body[{j}]: {r}"
    else:
        yield f"unknown instruction type {type(ins).__name__}"


def _check_expr(e: ClassicalExpr, nc: int) -> Iterator[str]:
    for c in e.cbit_refs():
        if not 0 <= c < nc:
            yield f"cbit c[{c}] out of range (cbit_count={nc})"


def _check_gate(g: Gate, nq: int) -> Iterator[str]:
    for q in g.qubits:
        if not 0 <= q < nq:
            yield f"qubit q[{q}] out of range (qubit_count={nq})"
    if len(set(g.targets)) != len(g.targets):
        yield "repeated target qubit"
    if len(set(g.controls)) != len(g.controls):
        yield "repeated control qubit"
    if set(g.controls) & set(g.targets):
        yield "control overlaps target"
    if g.kind is GateKind.CUSTOM:
        if g.matrix is None:
            yield "custom unitary without matrix"
        elif g.matrix.shape != (1 << len(g.targets),) * 2:
            yield f"custom matrix shape {g.matrix.shape} does not fit {len(g.targets)} targets"
        elif not is_unitary(g.matrix):
            yield "custom matrix is not unitary"
    elif len(g.targets) != g.kind.n_targets:
        yield f"{g.kind.value} expects {g.kind.n_targets} targets, got {len(g.targets)}"
    if g.kind is not GateKind.CUSTOM and len(g.params) != g.kind.n_params:
        yield f"{g.kind.value} expects {g.kind.n_params} params, got {len(g.params)}"
