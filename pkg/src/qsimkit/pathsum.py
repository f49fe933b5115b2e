"""Feynman path sums and cut-based partial-amplitude simulation.

Single amplitudes: every path is a product state (one 2-vector per qubit).
One-qubit gates act on a path in place. A gate with controls is written as
``I + P1...P1 (x) (U - I)``, so it doubles the paths; an uncontrolled
multi-qubit unitary is expanded into a sum of tensor products of 2x2
operators (repeated SVD), one path per term. The amplitude is the sum over
paths of the overlap of the product state with the target.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .circuit import Gate, GateKind, Program, gate_matrix, validate
from .errors import BudgetExceeded, InvalidProgramError, Unsupported
from .kernels import apply_matrix

DEFAULT_BUDGET = 1 << 22
_BATCH = 1 << 16
_P1 = np.diag([0.0, 1.0]).astype(complex)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_Z = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class PathQuery:
    program: Program
    target: str

    def __post_init__(self):
        if len(self.target) != self.program.qubit_count or set(self.target) - {"0", "1"}:
            raise ValueError("target must be a bit string with one bit per qubit")


def product_expansion(u: np.ndarray, k: int, tol: float = 1e-13) -> list[list[np.ndarray]]:
    """Write a 2^k x 2^k matrix as a sum of k-fold tensor products of 2x2 matrices.

    Each term is a list of k factors, first factor on the most significant qubit.
    """
    if k == 1:
        return [[u]]
    d = 1 << (k - 1)
    # regroup u[(a,r),(b,s)] -> M[(a,b),(r,s)]
    m = u.reshape(2, d, 2, d).transpose(0, 2, 1, 3).reshape(4, d * d)
    uu, sv, vh = np.linalg.svd(m, full_matrices=False)
    scale = max(float(sv[0]) if sv.size else 0.0, 1.0)
    out = []
    for r in range(len(sv)):
        if sv[r] <= tol * scale:
            continue
        head = (uu[:, r] * sv[r]).reshape(2, 2)
        for rest in product_expansion(vh[r].reshape(d, d), k - 1, tol):
            out.append([head] + rest)
    return out


def _gate_terms(g: Gate) -> list[dict[int, np.ndarray]] | str:
    """Path terms of a gate: each maps qubit -> 2x2 factor. "swap" marks a wire swap."""
    if g.kind is GateKind.SWAP and not g.controls:
        return "swap"
    base = g.base_matrix()
    k = len(g.targets)
    if not g.controls:
        return [dict(zip(g.targets, fs)) for fs in product_expansion(base, k)]
    terms: list[dict[int, np.ndarray]] = [{}]
    for fs in product_expansion(base - np.eye(1 << k), k):
        t = {c: _P1 for c in g.controls}
        t.update(zip(g.targets, fs))
        terms.append(t)
    return terms


def _ops(p: Program):
    if not p.is_unitary:
        raise ValueError("path sums need a measurement-free flat circuit")
    diags = validate(p)
    if diags:
        raise InvalidProgramError(diags)
    return [(g, _gate_terms(g)) for g in p.body]


def estimate_paths(p: Program) -> int:
    """Upper bound on the number of summands (product of per-gate term counts)."""
    total = 1
    for _, terms in _ops(p):
        total *= 1 if isinstance(terms, str) else len(terms)
    return total


def single_amplitude(q, target: str | None = None, budget: int = DEFAULT_BUDGET) -> complex:
    """``<target|U|0...0>`` by a path sum. ``q`` is a PathQuery or a Program."""
    if not isinstance(q, PathQuery):
        q = PathQuery(q, target)
    p = q.program
    ops = _ops(p)
    est = 1
    for _, terms in ops:
        est *= 1 if isinstance(terms, str) else len(terms)
    if est > budget:
        raise BudgetExceeded(est, budget)
    n = p.qubit_count
    tbits = np.array([int(q.target[n - 1 - i]) for i in range(n)], dtype=np.int64)
    v = np.zeros((1, n, 2), dtype=complex)
    v[:, :, 0] = 1.0
    return complex(_walk(v, ops, 0, tbits))


def _walk(v: np.ndarray, ops, start: int, tbits: np.ndarray) -> complex:
    for i in range(start, len(ops)):
        g, terms = ops[i]
        if isinstance(terms, str):
            a, b = g.targets
            v[:, [a, b]] = v[:, [b, a]]
            continue
        if len(terms) == 1:
            for qb, f in terms[0].items():
                v[:, qb] = v[:, qb] @ f.T
            continue
        parts = []
        for t in terms:
            w = v.copy()
            for qb, f in t.items():
                w[:, qb] = w[:, qb] @ f.T
            parts.append(w)
        v = np.concatenate(parts)
        alive = np.all(np.any(v != 0, axis=2), axis=1)
        if not alive.all():
            v = v[alive]
        if len(v) > _BATCH:
            return sum(_walk(v[s:s + _BATCH].copy(), ops, i + 1, tbits)
                       for s in range(0, len(v), _BATCH))
    if len(v) == 0:
        return 0j
    n = v.shape[1]
    return complex(np.sum(np.prod(v[:, np.arange(n), tbits], axis=1)))


# --------------------------------------------------------------------------- cuts

_CUTTABLE = (GateKind.CZ, GateKind.CNOT)


@dataclass(frozen=True)
class CutPlan:
    block_a: tuple[int, ...]
    block_b: tuple[int, ...]
    crossing_gates: tuple[int, ...]

    @property
    def branch_count(self) -> int:
        return 1 << len(self.crossing_gates)


def _cuttable(g: Gate) -> bool:
    return g.kind in _CUTTABLE and not g.controls and not g.dagger


def _crossings(gates, in_a) -> list[int] | None:
    out = []
    for i, g in enumerate(gates):
        qs = g.qubits
        if len(qs) < 2:
            continue
        sides = {in_a[q] for q in qs}
        if len(sides) > 1:
            if not _cuttable(g):
                return None
            out.append(i)
    return out


def plan_cut(p: Program) -> CutPlan:
    """Balanced bipartition minimising CZ/CNOT crossings.

    Exhaustive over all ``ceil(n/2)``-subsets for n <= 12 (first minimum in
    lexicographic order), greedy pairwise exchange otherwise.
    """
    if not p.is_unitary:
        raise ValueError("plan_cut needs a measurement-free flat circuit")
    n = p.qubit_count
    gates = list(p.body)
    size = (n + 1) // 2
    best = None

    def score(a):
        in_a = [False] * n
        for q in a:
            in_a[q] = True
        return _crossings(gates, in_a)

    if n <= 12:
        for a in itertools.combinations(range(n), size):
            c = score(a)
            if c is not None and (best is None or len(c) < len(best[1])):
                best = (a, c)
    else:
        a = list(range(size))
        c = score(a)
        best = (tuple(a), c) if c is not None else None
        improved = True
        while improved:
            improved = False
            for i, j in itertools.product(range(size), range(n)):
                if j in a:
                    continue
                cand = sorted(a[:i] + [j] + a[i + 1:])
                cc = score(cand)
                if cc is not None and (best is None or len(cc) < len(best[1])):
                    a, best, improved = cand, (tuple(cand), cc), True
                    break
    if best is None:
        raise Unsupported("no balanced cut avoids splitting a gate other than CZ/CNOT")
    a, crossing = best
    b = tuple(q for q in range(n) if q not in a)
    return CutPlan(tuple(a), b, tuple(crossing))


def _check_plan(p: Program, plan: CutPlan) -> None:
    n = p.qubit_count
    if sorted(plan.block_a + plan.block_b) != list(range(n)):
        raise ValueError("cut blocks must partition the qubits")
    in_a = [False] * n
    for q in plan.block_a:
        in_a[q] = True
    c = _crossings(list(p.body), in_a)
    if c is None or tuple(c) != tuple(plan.crossing_gates):
        raise ValueError("cut plan does not match the program")


def branch_circuits(p: Program, plan: CutPlan):
    """Yield ``(ops_a, ops_b)`` per branch; ops are ``(matrix, qubits)`` on one block.

    A crossing CZ is ``P0 (x) I + P1 (x) Z``: branch bit ``s`` puts ``P_s`` on
    the A-side qubit and ``Z^s`` on the B-side qubit. CNOT(c, t) is first
    rewritten as ``H_t CZ H_t``.
    """
    _check_plan(p, plan)
    a_set = set(plan.block_a)
    seq_a: list = []
    seq_b: list = []
    k = 0
    for i, g in enumerate(p.body):
        if i not in plan.crossing_gates:
            (seq_a if g.qubits[0] in a_set else seq_b).append(("op", gate_matrix(g), g.qubits))
            continue
        u, v = g.qubits
        qa, qb = (u, v) if u in a_set else (v, u)
        h_seq = (seq_a if v in a_set else seq_b) if g.kind is GateKind.CNOT else None
        if h_seq is not None:
            h_seq.append(("op", _H, (v,)))
        seq_a.append(("proj", k, (qa,)))
        seq_b.append(("zpow", k, (qb,)))
        if h_seq is not None:
            h_seq.append(("op", _H, (v,)))
        k += 1
    for s in itertools.product((0, 1), repeat=k):
        yield tuple(_resolve(seq, s) for seq in (seq_a, seq_b))


def _resolve(seq, s):
    ops = []
    for kind, x, qs in seq:
        if kind == "op":
            ops.append((x, qs))
        elif kind == "proj":
            ops.append((_P1 if s[x] else _P0, qs))
        elif s[x]:
            ops.append((_Z, qs))
    return ops


def _block_amps(ops, block) -> np.ndarray:
    local = {q: j for j, q in enumerate(block)}
    m = len(block)
    st = np.zeros(1 << m, dtype=complex)
    st[0] = 1.0
    for mat, qs in ops:
        apply_matrix(st, m, mat, [local[q] for q in qs])
    return st


def partial_amplitude(p: Program, plan: CutPlan, targets) -> dict[str, complex]:
    """Amplitudes of ``targets`` summed over the 2^c branches of the cut."""
    n = p.qubit_count
    targets = list(targets)
    for t in targets:
        if len(t) != n or set(t) - {"0", "1"}:
            raise ValueError(f"target {t!r} must be a bit string of length {n}")

    def sub(t, block):
        return sum(int(t[n - 1 - q]) << j for j, q in enumerate(block))

    ia = np.array([sub(t, plan.block_a) for t in targets], dtype=np.int64)
    ib = np.array([sub(t, plan.block_b) for t in targets], dtype=np.int64)
    acc = np.zeros(len(targets), dtype=complex)
    for ops_a, ops_b in branch_circuits(p, plan):
        sa = _block_amps(ops_a, plan.block_a)
        sb = _block_amps(ops_b, plan.block_b)
        acc += sa[ia] * sb[ib]
    return {t: complex(v) for t, v in zip(targets, acc)}
