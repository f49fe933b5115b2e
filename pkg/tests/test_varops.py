import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsimkit.circuit import GateKind, Program, cnot, h, rx
from qsimkit.errors import NonHermitianError, ParameterPositionError
from qsimkit.statevector import SimOptions, StateVector, simulate
from qsimkit.varops import (Param, ParamCircuit, ParamGate, PauliOperator, expectation,
                            expectation_state, finite_difference, gradient, parse_pauli_string,
                            pauli_multiply, var_rx, var_ry, var_rz)

import oracles

LETTERS = ("X", "Y", "Z")


def dense(op: PauliOperator, n: int) -> np.ndarray:
    return oracles.pauli_dense(dict(op.terms), n)


def random_operator(rng, n, n_terms, hermitian=True) -> PauliOperator:
    terms = {}
    for _ in range(n_terms):
        key = tuple((q, LETTERS[int(rng.integers(3))]) for q in range(n) if rng.random() < 0.6)
        c = rng.normal()
        if not hermitian:
            c = c + 1j * rng.normal()
        terms[key] = terms.get(key, 0) + c
    return PauliOperator(terms)


def test_parse_pauli_string():
    assert parse_pauli_string("X0 Z2") == ((0, "X"), (2, "Z"))
    assert parse_pauli_string("Z3 X1") == ((1, "X"), (3, "Z"))
    assert parse_pauli_string("") == () == parse_pauli_string("I")
    for bad in ("X0 Y0", "Q1", "X"):
        with pytest.raises(ValueError):
            parse_pauli_string(bad)


def test_multiplication_examples():
    X0, Y0, Z0 = (PauliOperator({f"{p}0": 1}) for p in LETTERS)
    assert pauli_multiply(X0, Y0) == PauliOperator({"Z0": 1j})
    assert X0 * X0 == PauliOperator({"": 1})
    half = 0.5 * X0 + 0.5 * Z0
    assert (half * half).allclose(PauliOperator.identity(0.5))
    assert np.allclose(dense(half * half, 1), 0.5 * np.eye(2))


def test_cyclic_table():
    for a, b, c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
        A, B = PauliOperator({f"{a}1": 1}), PauliOperator({f"{b}1": 1})
        assert A * B == PauliOperator({f"{c}1": 1j})
        assert B * A == PauliOperator({f"{c}1": -1j})


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_product_matches_dense_and_is_associative(seed):
    rng = np.random.default_rng(seed)
    n = 3
    a, b, c = (random_operator(rng, n, 3, hermitian=False) for _ in range(3))
    assert np.allclose(dense(a * b, n), dense(a, n) @ dense(b, n), atol=1e-12)
    assert ((a * b) * c).allclose(a * (b * c), atol=1e-10)
    assert np.allclose(dense(a + b - c, n), dense(a, n) + dense(b, n) - dense(c, n), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_single_strings_square_to_identity(seed):
    rng = np.random.default_rng(seed)
    key = tuple((q, LETTERS[int(rng.integers(3))]) for q in range(4) if rng.random() < 0.7)
    p = PauliOperator({key: 1})
    assert p * p == PauliOperator.identity()


def test_zero_terms_pruned_and_hermitian_flag():
    X0 = PauliOperator({"X0": 1})
    assert (X0 - X0).terms == {}
    assert X0.is_hermitian() and not PauliOperator({"X0": 1j}).is_hermitian()
    assert PauliOperator({"X0 Z4": 1}).num_qubits == 5


def test_text_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    op = random_operator(rng, 4, 5)
    assert PauliOperator.from_text(op.to_text()).allclose(op, atol=0)
    f = tmp_path / "h.ham"
    f.write_text("# ising\n1.0 Z0 Z1\n-0.5 X0\n0.25i Y2\n")
    loaded = PauliOperator.load(f)
    assert loaded == PauliOperator({"Z0 Z1": 1, "X0": -0.5, "Y2": 0.25j})


# --------------------------------------------------------------------------- expectation

def test_expectation_examples():
    assert math.isclose(expectation(Program(1, 0, ()), PauliOperator({"Z0": 1})), 1)
    assert math.isclose(expectation(Program(1, 0, (h(0),)), PauliOperator({"X0": 0.5})), 0.5)


def test_expectation_matches_dense_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = oracles.random_program(rng, 4, 15)
        H = random_operator(rng, 4, 3)
        psi = oracles.statevector(p)
        want = (psi.conj() @ dense(H, 4) @ psi).real
        assert abs(expectation(p, H) - want) <= 1e-10


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianError):
        expectation_state(StateVector(1), PauliOperator({"X0": 1j}))


def test_operator_wider_than_state_rejected():
    with pytest.raises(ValueError):
        expectation_state(simulate(Program(1, 0, (h(0),))), PauliOperator({"Z3": 1}))


# --------------------------------------------------------------------------- gradients

def test_gradient_examples():
    pc = ParamCircuit(1, (var_ry(0, "t"),), ("t",))
    Z0 = PauliOperator({"Z0": 1})
    assert math.isclose(gradient(pc, Z0, [math.pi / 2])[0], -1, abs_tol=1e-12)
    assert math.isclose(gradient(pc, Z0, [0.0])[0], 0, abs_tol=1e-12)


def test_two_parameter_gradient_vs_finite_difference():
    rng = np.random.default_rng(3)
    pc = ParamCircuit(2, (var_ry(0, "a"), h(1), cnot(0, 1), var_rx(1, "b"), var_rz(0, "a")),
                      ("a", "b"))
    H = PauliOperator({"Z0 Z1": 1.0, "X1": 0.5, "Y0": -0.3})
    for _ in range(5):
        at = rng.uniform(-math.pi, math.pi, size=2)
        assert np.allclose(gradient(pc, H, at), finite_difference(pc, H, at), atol=1e-6)


def test_scaled_daggered_and_shared_parameters():
    rng = np.random.default_rng(4)
    body = (var_rx(0, "a", scale=2.0, offset=0.3), cnot(0, 1),
            ParamGate(GateKind.RY, (1,), (Param("b", -0.5),), dagger=True),
            var_rz(1, "a"), rx(0, 0.2), var_ry(0, "b"))
    pc = ParamCircuit(2, body, ("a", "b"))
    H = PauliOperator({"X0 X1": 0.7, "Z1": 1.0, "Y0 Z1": 0.2})
    at = {"a": float(rng.normal()), "b": float(rng.normal())}
    assert np.allclose(gradient(pc, H, at), finite_difference(pc, H, at), atol=1e-6)


def test_gradient_with_parallel_options_is_identical():
    pc = ParamCircuit(2, (var_ry(0, "a"), cnot(0, 1), var_rx(1, "b")), ("a", "b"))
    H = PauliOperator({"Z0 Z1": 1.0, "X1": 0.5})
    g1 = gradient(pc, H, [0.4, -1.1], SimOptions(workers=1))
    g8 = gradient(pc, H, [0.4, -1.1], SimOptions(workers=8))
    assert np.array_equal(g1, g8)


def test_bad_parameter_positions():
    H = PauliOperator({"Z0": 1})
    pc = ParamCircuit(2, (ParamGate(GateKind.U3, (0,), (Param("t"), 0.0, 0.0)),), ("t",))
    with pytest.raises(ParameterPositionError):
        gradient(pc, H, [0.1])
    pc = ParamCircuit(2, (ParamGate(GateKind.RY, (1,), (Param("t"),), controls=(0,)),), ("t",))
    with pytest.raises(ParameterPositionError):
        gradient(pc, H, [0.1])
    with pytest.raises(ValueError):
        ParamCircuit(1, (var_rx(0, "zz"),), ("t",))


def test_bind_produces_fresh_program():
    pc = ParamCircuit(1, (var_rx(0, "t", scale=2.0, offset=1.0),), ("t",))
    p = pc.bind({"t": 0.5})
    assert p.body[0].params == (2.0,)
    with pytest.raises(ValueError):
        pc.bind([])
