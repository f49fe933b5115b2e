import math

import networkx as nx
import numpy as np
from hypothesis import given, settings, strategies as st

from qsimkit.circuit import (BinOp, CBit, Const, Gate, GateKind, Measure, Program, QIf, QWhile,
                             cnot, gate_matrix, h, rz, unitary, validate, x)
from qsimkit.dag import build_dag, circuit_depth
from qsimkit.statevector import simulate

import oracles


def test_x_matrix():
    assert np.array_equal(gate_matrix(x(0)), [[0, 1], [1, 0]])


def test_dagger_inverts_rotation():
    assert np.allclose(gate_matrix(rz(0, math.pi / 2).inverse()), oracles.rz(-math.pi / 2))


def test_controlled_x_is_cnot():
    g = Gate(GateKind.X, (1,), controls=(0,))
    assert np.allclose(gate_matrix(g), oracles.CNOT)
    assert np.allclose(gate_matrix(cnot(0, 1)), oracles.CNOT)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gate_matrices_are_unitary_and_match_oracle(seed):
    rng = np.random.default_rng(seed)
    g = oracles.random_gate(rng, 4)
    m = gate_matrix(g)
    assert m.shape == (1 << g.arity,) * 2
    assert np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=1e-10)
    assert np.allclose(m, oracles.full_gate_matrix(g), atol=1e-12)


def test_dag_roots_and_edges():
    d = build_dag(Program(2, 0, (h(0), x(1))))
    assert set(d.in_degree_zero) == {0, 1} and d.edges == []
    d = build_dag(Program(2, 0, (h(0), cnot(0, 1))))
    assert d.edges == [(0, 1)]


def test_every_linearization_gives_same_state():
    rng = np.random.default_rng(5)
    for _ in range(5):
        p = oracles.random_program(rng, 3, 6, allow_controls=False, allow_custom=False)
        d = build_dag(p)
        g = nx.DiGraph()
        g.add_nodes_from(range(len(p.body)))
        g.add_edges_from(d.edges)
        ref = oracles.statevector(p)
        for order in nx.all_topological_sorts(g):
            q = Program(3, 0, tuple(p.body[i] for i in order))
            assert np.allclose(oracles.statevector(q), ref, atol=1e-12)


def test_dag_edges_only_between_gates_sharing_a_wire():
    rng = np.random.default_rng(9)
    p = oracles.random_program(rng, 5, 30)
    for a, b in build_dag(p).edges:
        assert a < b
        assert set(p.body[a].qubits) & set(p.body[b].qubits)


def test_depth():
    p = Program(3, 0, (h(0), h(1), cnot(0, 1), x(2), cnot(1, 2)))
    assert circuit_depth(p) == 3


def test_validate_examples():
    assert validate(Program(3, 0, ())) == []
    diags = validate(Program(3, 0, (h(5),)))
    assert len(diags) == 1 and "out of range" in diags[0].reason
    diags = validate(Program(2, 0, (Gate(GateKind.X, (1,), controls=(1,)),)))
    assert len(diags) == 1 and "overlap" in diags[0].reason


def test_validate_nested_and_classical():
    body = (Measure(0, 3),
            QIf(BinOp("==", CBit(7), Const(1)), (h(4),), None),
            QWhile(BinOp("<", CBit(0), Const(2)), (x(0),)))
    reasons = [d.reason for d in validate(Program(2, 1, body))]
    assert len(reasons) == 3


def test_custom_unitary_checks():
    diags = validate(Program(1, 0, (unitary((0,), [[1, 1], [0, 1]]),)))
    assert len(diags) == 1 and "unitary" in diags[0].reason
    assert validate(Program(1, 0, (unitary((0,), oracles.H),))) == []


def test_simulate_depends_only_on_gate_list():
    rng = np.random.default_rng(3)
    p = oracles.random_program(rng, 3, 12)
    assert np.allclose(simulate(p).amps, oracles.statevector(p), atol=1e-12)
