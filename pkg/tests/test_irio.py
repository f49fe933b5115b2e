import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsimkit.circuit import (BinOp, CBit, Const, Gate, GateKind, Measure, Program, QIf, QWhile,
                             cnot, cz, h, rz, swap, toffoli, u3, unitary, x)
from qsimkit.errors import Unsupported
from qsimkit.irio import (ArityError, IRParseError, IRSyntaxError, RangeError, UnknownMnemonic,
                          UnterminatedBlock, draw, emit_ir, emit_qasm, emit_quil, parse_ir)

import oracles

BELL = Program(2, 2, (h(0), cnot(0, 1), Measure(0, 0), Measure(1, 1)))


def test_emit_bell():
    assert emit_ir(BELL) == ("QINIT 2\nCREG 2\nH q[0]\nCNOT q[0],q[1]\n"
                             "MEASURE q[0],c[0]\nMEASURE q[1],c[1]\n")


def test_emit_rotation_parameter():
    assert "RZ q[0],(1.5)" in emit_ir(Program(1, 0, (rz(0, 1.5),))).splitlines()


def test_emit_qif_block():
    p = Program(2, 1, (QIf(BinOp("==", CBit(0), Const(1)), (x(1),), None),))
    assert "QIF c[0]==1\nX q[1]\nENDQIF" in emit_ir(p)


def test_parse_examples():
    assert parse_ir(emit_ir(BELL)) == BELL
    text = "# comment\nQINIT 1\n\nCREG 0\nRZ q[0],(1.5)  # trailing\n"
    assert parse_ir(text) == Program(1, 0, (rz(0, 1.5),))


def test_dagger_and_control_blocks():
    text = ("QINIT 3\nCREG 0\nCONTROL q[2]\nDAGGER\nS q[0]\nRX q[1],(0.25)\nENDDAGGER\n"
            "ENDCONTROL\n")
    p = parse_ir(text)
    # the inverse of a block reverses it and daggers each gate
    assert [g.kind for g in p.body] == [GateKind.RX, GateKind.S]
    assert all(g.dagger and g.controls == (2,) for g in p.body)
    want = oracles.unitary(Program(3, 0, (Gate(GateKind.S, (0,), controls=(2,)),
                                          Gate(GateKind.RX, (1,), (0.25,), controls=(2,)))))
    assert np.allclose(oracles.unitary(p), want.conj().T, atol=1e-12)


def test_unitary_round_trip_is_exact():
    rng = np.random.default_rng(1)
    g = unitary((1, 0), oracles.random_unitary(4, rng))
    p = Program(2, 0, (g,))
    assert parse_ir(emit_ir(p)) == p


def test_range_error_line():
    with pytest.raises(RangeError) as ei:
        parse_ir("QINIT 2\nCREG 0\nH q[9]\n")
    assert ei.value.line == 3


@pytest.mark.parametrize("text,exc,line", [
    ("QINIT 1\nCREG 0\nFOO q[0]\n", UnknownMnemonic, 3),
    ("QINIT 2\nCREG 0\nCNOT q[0]\n", ArityError, 3),
    ("QINIT 1\nCREG 0\nRZ q[0]\n", ArityError, 3),
    ("QINIT 1\nCREG 0\nQIF c[0]==1\nX q[0]\nENDQIF\n", RangeError, 3),
    ("QINIT 1\nCREG 1\nQIF c[0]==1\nX q[0]\n", UnterminatedBlock, 3),
    ("QINIT 1\nCREG 1\nDAGGER\nX q[0]\n", UnterminatedBlock, 3),
    ("QINIT 1\nCREG 1\nENDQIF\n", IRSyntaxError, 3),
    ("CREG 1\n", IRSyntaxError, 1),
    ("QINIT 1\nCREG 1\nH q[0] junk\n", IRParseError, 3),
])
def test_parse_errors(text, exc, line):
    with pytest.raises(exc) as ei:
        parse_ir(text)
    assert ei.value.line == line


def test_round_trip_structured_programs():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p = oracles.random_structured_program(rng)
        assert parse_ir(emit_ir(p)) == p


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_property(seed):
    p = oracles.random_structured_program(np.random.default_rng(seed), size=6)
    text = emit_ir(p)
    assert parse_ir(text) == p
    assert emit_ir(parse_ir(text)) == text


# --------------------------------------------------------------------------- QASM / Quil

_QASM_1Q = {"id": oracles.I2, "x": oracles.X, "y": oracles.Y, "z": oracles.Z, "h": oracles.H,
            "s": oracles.S, "sdg": oracles.S.conj().T, "t": oracles.T, "tdg": oracles.T.conj().T}
_QASM_2Q = {"cx": oracles.CNOT, "cz": oracles.CZ, "swap": oracles.SWAP}
_LINE = re.compile(r"(\w+)(?:\(([^)]*)\))?\s+(.+);$")


def qasm_unitary(text: str) -> np.ndarray:
    """Dense unitary of the gate lines of a small QASM 2.0 file."""
    n = int(re.search(r"qreg q\[(\d+)\];", text).group(1))
    u = np.eye(1 << n, dtype=complex)
    for line in text.splitlines():
        m = _LINE.match(line)
        if not m or m.group(1) in ("OPENQASM", "qreg", "creg", "measure", "include"):
            continue
        name, args, ops = m.groups()
        qs = [int(v) for v in re.findall(r"q\[(\d+)\]", ops)]
        vals = [float(v) for v in args.split(",")] if args else []
        if name in _QASM_1Q:
            mat = _QASM_1Q[name]
        elif name in _QASM_2Q:
            mat = _QASM_2Q[name]
        elif name in ("rx", "ry", "rz"):
            mat = getattr(oracles, name)(vals[0])
        elif name == "u3":
            mat = oracles.u3(*vals)
        else:
            raise AssertionError(f"unexpected QASM gate {name}")
        u = oracles.embed(mat, qs, n) @ u
    return u


def test_qasm_examples():
    assert "h q[0];" in emit_qasm(Program(1, 0, (h(0),))).splitlines()
    line = emit_qasm(Program(1, 0, (u3(0, 0.5, 1.25, -2.0),))).splitlines()[-1]
    assert line == "u3(0.5,1.25,-2) q[0];"
    text = emit_qasm(BELL)
    assert text.startswith('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncreg c[2];\n')
    assert "measure q[1] -> c[1];" in text


def test_qasm_toffoli_truth_table():
    text = emit_qasm(Program(3, 0, (toffoli(0, 1, 2),)))
    assert "ccx" not in text
    u = qasm_unitary(text)
    for i in range(8):
        out = i ^ 4 if (i & 3) == 3 else i
        col = u[:, i]
        k = int(np.argmax(np.abs(col)))
        assert k == out and abs(abs(col[k]) - 1) <= 1e-12


def test_qasm_random_flat_programs_match():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = oracles.random_program(rng, 3, 10, allow_custom=False)
        assert oracles.equal_up_to_phase(qasm_unitary(emit_qasm(p)), oracles.unitary(p), 1e-9)


def test_qasm_rejects_control_flow():
    p = Program(1, 1, (QWhile(BinOp("==", CBit(0), Const(0)), (h(0),)),))
    with pytest.raises(Unsupported):
        emit_qasm(p)


def test_quil_examples():
    assert emit_quil(Program(1, 0, (h(0),))) == "H 0\n"
    text = emit_quil(BELL)
    assert text.splitlines() == ["DECLARE ro BIT[2]", "H 0", "CNOT 0 1",
                                 "MEASURE 0 ro[0]", "MEASURE 1 ro[1]"]
    assert emit_quil(Program(3, 0, (Gate(GateKind.X, (2,), controls=(0, 1)),))) == \
        "CONTROLLED CONTROLLED X 0 1 2\n"
    assert emit_quil(Program(1, 0, (rz(0, 0.5).inverse(),))) == "DAGGER RZ(0.5) 0\n"


# --------------------------------------------------------------------------- drawing

def test_draw_single_h():
    rows = draw(Program(1, 0, (h(0),))).splitlines()
    assert len(rows) == 1 and "H" in rows[0]


def test_draw_cnot_column():
    rows = draw(Program(2, 0, (cnot(0, 1),))).splitlines()
    c = rows[0].index("●")
    assert rows[1][c] == "⊕"


def test_draw_bell_layers():
    rows = draw(BELL).splitlines()
    assert len(rows) == 2
    assert rows[0].split(": ")[1].strip("─").split("──") == ["H", "●", "M"]
    assert [r.index("M") for r in rows] == [rows[0].index("M")] * 2


def test_draw_is_deterministic_and_fixed_width():
    rng = np.random.default_rng(4)
    p = oracles.random_program(rng, 4, 15)
    a = draw(p)
    assert a == draw(p)
    assert len({len(r) for r in a.splitlines()}) == 1


def test_draw_long_range_gate_crosses_wires():
    rows = draw(Program(3, 0, (cz(0, 2), swap(1, 2)))).splitlines()
    assert "┼" in rows[1]
