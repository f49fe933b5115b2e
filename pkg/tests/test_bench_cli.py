import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from qsimkit.bench import BenchSpec, checksum, gen_random_circuit, run_bench
from qsimkit.circuit import GateKind
from qsimkit.cli import (EXIT_BACKEND, EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_PARSE, EXIT_USAGE,
                         main)
from qsimkit.irio import emit_ir, parse_ir
from qsimkit.statevector import simulate

import oracles

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def cli(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


# --------------------------------------------------------------------------- generator

def test_cnot_ring_for_three_qubits():
    p = gen_random_circuit(BenchSpec(3, 1))
    cnots = [g.targets for g in p.body if g.kind is GateKind.CNOT]
    assert cnots == [(1, 0), (2, 1), (0, 2)]
    assert [g.kind for g in p.body[:3]] != [] and all(
        g.kind in (GateKind.RX, GateKind.RY, GateKind.RZ) for g in p.body[:3])


def test_single_qubit_has_no_cnots():
    p = gen_random_circuit(BenchSpec(1, 4))
    assert len(p.body) == 4 and all(g.kind is not GateKind.CNOT for g in p.body)


def test_generator_is_deterministic():
    a = emit_ir(gen_random_circuit(BenchSpec(6, 5, seed=42)))
    assert a == emit_ir(gen_random_circuit(BenchSpec(6, 5, seed=42)))
    assert a != emit_ir(gen_random_circuit(BenchSpec(6, 5, seed=43)))


def test_generator_angles_and_shape():
    p = gen_random_circuit(BenchSpec(5, 7, seed=1))
    rots = [g for g in p.body if g.kind is not GateKind.CNOT]
    assert len(rots) == 35 and len(p.body) == 35 + 35
    assert all(0 <= g.params[0] < 2 * math.pi for g in rots)


def test_bench_spec_validation():
    for kw in ({"n": 0, "d": 1}, {"n": 2, "d": -1}, {"n": 2, "d": 1, "backend": "gpu"},
               {"n": 2, "d": 1, "workers": 0}):
        with pytest.raises(ValueError):
            BenchSpec(**kw)


def test_bench_checksums_agree_across_options():
    base = run_bench(BenchSpec(8, 4, seed=3))
    fused = run_bench(BenchSpec(8, 4, seed=3, fusion=True, peephole=True))
    assert abs(base.checksum - fused.checksum) <= 1e-9
    assert fused.gates_after < fused.gates_before
    psi = oracles.statevector(gen_random_circuit(BenchSpec(8, 4, seed=3)))
    assert math.isclose(base.checksum, checksum(np.abs(psi) ** 2), abs_tol=1e-9)


def test_bench_path_backend_matches_statevector():
    a = run_bench(BenchSpec(4, 2, seed=5))
    b = run_bench(BenchSpec(4, 2, seed=5, backend="path"))
    assert abs(a.checksum - b.checksum) <= 1e-9


# --------------------------------------------------------------------------- CLI

def test_run_bell():
    code, out = cli("run", SAMPLES / "bell.oir", "--shots", 1000, "--seed", 7)
    assert code == EXIT_OK
    lines = [line.split() for line in out.splitlines()]
    assert {b for b, _ in lines} <= {"00", "11"}
    assert sum(int(c) for _, c in lines) == 1000
    assert [b for b, _ in lines] == sorted(b for b, _ in lines)


def test_run_is_reproducible_and_backends_agree():
    a = cli("run", SAMPLES / "bell.oir", "--seed", 7, "--workers", 1)
    assert a == cli("run", SAMPLES / "bell.oir", "--seed", 7, "--workers", 8)
    code, out = cli("run", SAMPLES / "bell.oir", "--backend", "path", "--seed", 7)
    assert code == EXIT_OK and {ln.split()[0] for ln in out.splitlines()} <= {"00", "11"}
    code, out = cli("run", SAMPLES / "bell.oir", "--backend", "noisy",
                    "--noise", SAMPLES / "noise.json", "--shots", 2000)
    assert code == EXIT_OK and sum(int(ln.split()[1]) for ln in out.splitlines()) == 2000


def test_run_path_target_amplitude():
    code, out = cli("run", SAMPLES / "bell.oir", "--backend", "path", "--target", "11")
    bits, re_, im = out.split()
    assert code == EXIT_OK and bits == "11"
    assert math.isclose(float(re_), 1 / math.sqrt(2)) and abs(float(im)) < 1e-15


def test_run_feedback_program():
    code, out = cli("run", SAMPLES / "feedback.oir", "--shots", 500)
    assert code == EXIT_OK and sum(int(ln.split()[1]) for ln in out.splitlines()) == 500


def test_compile_qaoa_on_circle(tmp_path):
    dest = tmp_path / "out.oir"
    rep = tmp_path / "rep.json"
    code, _ = cli("compile", SAMPLES / "qaoa6.oir", "--topology", SAMPLES / "circle6.topo",
                  "-o", dest, "--report", rep, "--report-format", "json")
    assert code == EXIT_OK
    d = json.loads(rep.read_text())
    st = d["stages"]
    assert st["optimized"]["depth"] <= st["compiled"]["depth"]
    assert st["optimized"]["two_qubit"] <= st["compiled"]["two_qubit"]
    kinds = {g.kind for g in parse_ir(dest.read_text()).gates()}
    assert kinds <= {GateKind.U3, GateKind.CZ}


def test_compile_formats_and_builtin_topology():
    code, out = cli("compile", SAMPLES / "bell.oir", "--topology", "path:2", "--format", "qasm")
    assert code == EXIT_OK and out.startswith("OPENQASM 2.0;")
    code, out = cli("compile", SAMPLES / "bell.oir", "--topology", "grid:1x2", "--format", "quil")
    assert code == EXIT_OK and "CZ 0 1" in out


def test_bench_table():
    code, out = cli("bench", "--qubits", "3,4", "--layers", "2", "--opt", "none",
                    "--opt", "fusion,peephole")
    rows = [r.split("\t") for r in out.strip().splitlines()]
    assert code == EXIT_OK and len(rows) == 1 + 4
    header = rows[0]
    col = header.index("checksum")
    by_n = {}
    for r in rows[1:]:
        by_n.setdefault(r[0], []).append(float(r[col]))
    assert all(abs(a - b) <= 1e-9 for a, b in by_n.values())


def test_draw_command():
    code, out = cli("draw", SAMPLES / "bell.oir")
    assert code == EXIT_OK and len(out.splitlines()) == 2 and "●" in out


def test_exit_codes(tmp_path):
    assert cli("run", tmp_path / "missing.oir")[0] == EXIT_IO
    bad = tmp_path / "bad.oir"
    bad.write_text("QINIT 1\nCREG 0\nFROB q[0]\n")
    assert cli("run", bad)[0] == EXIT_PARSE
    assert cli("run", SAMPLES / "bell.oir", "--opt", "turbo")[0] == EXIT_USAGE
    assert cli("nonsense")[0] == EXIT_USAGE
    assert cli("compile", SAMPLES / "qaoa6.oir", "--topology", "path:3")[0] == EXIT_BACKEND
    big = tmp_path / "big.oir"
    big.write_text("QINIT 20\nCREG 0\nH q[0]\n")
    assert cli("run", big, "--backend", "path")[0] != EXIT_OK
    assert EXIT_INVALID not in (EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PARSE, EXIT_BACKEND)


def test_sample_programs_parse_and_simulate():
    for f in SAMPLES.glob("*.oir"):
        p = parse_ir(f.read_text())
        if p.is_flat:
            assert abs(simulate(p.with_body(p.gates())).norm() - 1) <= 1e-12
