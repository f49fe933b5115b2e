"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -v -s tests/test_acceptance.py``; the summary lines are
also repeated at the end of any pytest session (see conftest.py).
"""

import functools
import math
import statistics
import time

import numpy as np

from qsimkit.bench import BenchSpec, run_bench
from qsimkit.circuit import GateKind, Measure, Program, cnot, cz, h
from qsimkit.compiler import Topology, compile, qaoa_circuit
from qsimkit.irio import emit_ir, parse_ir
from qsimkit.noise import FAMILIES, DecoherenceParams, NoiseModel, make_channel, run_noisy
from qsimkit.pathsum import partial_amplitude, plan_cut, single_amplitude
from qsimkit.statevector import SimOptions, run, simulate
from qsimkit.varops import (Param, ParamCircuit, ParamGate, PauliOperator, finite_difference,
                           gradient)

import oracles

RESULTS: dict[int, tuple[bool, str]] = {}
WORKERS = (1, 2, 8)


def criterion(num: int, title: str):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **kw) or ""
            except BaseException as e:
                RESULTS[num] = (False, f"{title}: {type(e).__name__}: {e}".splitlines()[0])
                print(f"[criterion {num:2d}] FAIL  {RESULTS[num][1]}")
                raise
            took = time.perf_counter() - t0
            RESULTS[num] = (True, f"{title} ({detail}{'; ' if detail else ''}{took:.1f} s)")
            print(f"[criterion {num:2d}] PASS  {RESULTS[num][1]}")
        return wrapper
    return deco


def bits(i: int, n: int) -> str:
    return format(i, f"0{n}b")


# --------------------------------------------------------------------------- 1

def random_decoherence(rng) -> DecoherenceParams:
    t1 = float(rng.uniform(1e-5, 1e-4))
    t2 = float(rng.uniform(0.1, 2.0)) * t1
    return DecoherenceParams(float(rng.uniform(1e-9, 1e-6)), t1, t2)


@criterion(1, "channel completeness")
def test_c1_channel_completeness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    checked = 0
    chans = [make_channel(f, p) for f in FAMILIES if f != "decoherence"
             for p in (0.0, 0.1, 0.5, 1.0)]
    chans += [make_channel("decoherence", params=random_decoherence(rng)) for _ in range(10)]
    for ch in chans:
        s = sum(k.conj().T @ k for k in ch.ops)
        err = np.linalg.norm(s - np.eye(s.shape[0]), ord=np.inf)
        worst = max(worst, err)
        checked += 1
    elapsed = time.perf_counter() - t0
    assert checked == 5 * 4 + 10
    assert worst <= 1e-10, worst
    assert elapsed < 1.0, elapsed
    return f"{checked} channels, max error {worst:.1e}"


# --------------------------------------------------------------------------- 2

def c2_programs():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        yield oracles.random_program(rng, n, int(rng.integers(1, 21)))


@criterion(2, "state-vector oracle equivalence")
def test_c2_statevector_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for p in c2_programs():
        worst = max(worst, float(np.max(np.abs(simulate(p).amps - oracles.statevector(p)))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-10, worst
    assert elapsed < 30, elapsed
    return f"100 circuits, max error {worst:.1e}"


# --------------------------------------------------------------------------- 3

def c3_cases():
    rng = np.random.default_rng(3)
    for k in range(20):
        n = int(rng.integers(1, 4))
        body = oracles.random_program(rng, n, int(rng.integers(2, 9)), allow_custom=False).body
        p = Program(n, n, body + tuple(Measure(q, q) for q in range(n)))
        fam = FAMILIES[k % len(FAMILIES)]
        if fam == "decoherence":
            ch = make_channel(fam, params=DecoherenceParams(2e-6, 2e-5, 1.5e-5))
        else:
            ch = make_channel(fam, float(rng.uniform(0.02, 0.2)))
        ro = {}
        if rng.random() < 0.5:
            e0, e1 = rng.uniform(0.0, 0.08, size=2)
            ro = {int(rng.integers(n)): np.array([[1 - e0, e0], [e1, 1 - e1]])}
        nm = NoiseModel(readout=dict(ro)).add(ch)
        want = oracles.noisy_distribution(p, lambda g, ch=ch: [(ch.ops, (q,)) for q in g.qubits],
                                          ro)
        yield k, p, nm, want


@criterion(3, "noise trajectory convergence")
def test_c3_noise_convergence():
    t0 = time.perf_counter()
    worst = 0.0
    for k, p, nm, want in c3_cases():
        counts = run_noisy(p, nm, SimOptions(seed=100 + k), 100_000)
        worst = max(worst, oracles.tv_distance(counts, want))
    elapsed = time.perf_counter() - t0
    assert worst <= 0.01, worst
    assert elapsed < 120, elapsed
    return f"20 circuits, max TV {worst:.4f}"


# --------------------------------------------------------------------------- 4

@criterion(4, "path-sum equivalence")
def test_c4_path_sum():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_single = worst_partial = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 11))
        p = oracles.random_program(rng, n, int(rng.integers(1, 21)))
        psi = oracles.statevector(p)
        for i in rng.choice(1 << n, size=min(8, 1 << n), replace=False):
            err = abs(single_amplitude(p, bits(int(i), n)) - psi[int(i)])
            worst_single = max(worst_single, err)
    for k in range(10):
        n = int(rng.integers(4, 13))
        p = oracles.block_circuit(rng, n, int(rng.integers(0, 5)))
        plan = plan_cut(p)
        assert len(plan.crossing_gates) <= 4
        psi = oracles.statevector(p)
        targets = [bits(int(i), n) for i in rng.choice(1 << n, size=16, replace=False)]
        got = partial_amplitude(p, plan, targets)
        worst_partial = max(worst_partial, max(abs(got[t] - psi[int(t, 2)]) for t in targets))
    elapsed = time.perf_counter() - t0
    assert worst_single <= 1e-9, worst_single
    assert worst_partial <= 1e-9, worst_partial
    assert elapsed < 120, elapsed
    return f"single {worst_single:.1e}, partial {worst_partial:.1e}"


# --------------------------------------------------------------------------- 5

@criterion(5, "compiler soundness")
def test_c5_compiler_soundness():
    rng = np.random.default_rng(5)
    topos = {"path3": Topology.path(3), "grid2x3": Topology.grid(2, 3),
             "circle6": Topology.circle(6)}
    done = 0
    for name, topo in topos.items():
        for _ in range(50):
            n = int(rng.integers(1, topo.n + 1))
            src = oracles.random_program(rng, n, int(rng.integers(1, 16)))
            out, rep = compile(src, topo, check=False)
            assert oracles.legal(out, topo), name
            assert {g.kind for g in out.body} <= {GateKind.U3, GateKind.CZ}
            assert oracles.mapped_equivalent(src, out, rep.initial_layout, rep.final_layout,
                                             1e-8), name
            done += 1
    return f"{done} compiles over 3 topologies"


# --------------------------------------------------------------------------- 6

GRIDS = {4: (2, 2), 5: (2, 3), 6: (2, 3), 7: (2, 4), 8: (2, 4), 9: (3, 3), 10: (2, 5)}


@criterion(6, "optimization direction on QAOA circuits")
def test_c6_qaoa_direction():
    cases = 0
    strict = 0
    for n in range(4, 11):
        for topo in (Topology.grid(*GRIDS[n]), Topology.circle(n)):
            for layers, seed in ((1, n), (2, 100 + n)):
                _, rep = compile(qaoa_circuit(n, layers, seed=seed), topo, check=n <= 8)
                c, o = rep.compiled, rep.optimized
                assert o.depth <= c.depth, (n, topo.n, layers, c, o)
                assert o.two_qubit <= c.two_qubit, (n, topo.n, layers, c, o)
                cases += 1
                strict += o.two_qubit < c.two_qubit
    return f"{cases} cases, {strict} with fewer two-qubit gates"


# --------------------------------------------------------------------------- 7

def c7_run(fused: bool, workers: int = 1):
    return run_bench(BenchSpec(20, 10, seed=7, fusion=fused, peephole=fused, workers=workers))


@criterion(7, "fusion + peephole speedup on n=20, d=10")
def test_c7_performance():
    c7_run(True)  # warm the kernels
    plain = [c7_run(False) for _ in range(5)]
    fused = [c7_run(True) for _ in range(5)]
    t_plain = statistics.median(r.total for r in plain)
    t_fused = statistics.median(r.total for r in fused)
    assert abs(plain[0].checksum - fused[0].checksum) <= 1e-9
    speedup = t_plain / t_fused
    assert speedup >= 1.5, speedup
    return f"{t_plain:.2f} s vs {t_fused:.2f} s, speedup {speedup:.2f}x"


# --------------------------------------------------------------------------- 8

@criterion(8, "IR round trip")
def test_c8_ir_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    seen = set()
    for _ in range(200):
        p = oracles.random_structured_program(rng)
        text = emit_ir(p)
        seen |= {w for w in ("DAGGER", "CONTROL", "QIF", "QWHILE") if w in text}
        assert parse_ir(text) == p
    elapsed = time.perf_counter() - t0
    assert seen == {"DAGGER", "CONTROL", "QIF", "QWHILE"}
    assert elapsed < 10, elapsed
    return "200 programs"


# --------------------------------------------------------------------------- 9

def random_param_circuit(rng):
    n = int(rng.integers(1, 4))
    names = tuple(f"t{i}" for i in range(int(rng.integers(1, 4))))
    body = []
    for _ in range(int(rng.integers(3, 10))):
        r = rng.random()
        q = int(rng.integers(n))
        if r < 0.55:
            kind = (GateKind.RX, GateKind.RY, GateKind.RZ)[int(rng.integers(3))]
            prm = Param(names[int(rng.integers(len(names)))], float(rng.choice([1.0, -0.5, 2.0])),
                        float(rng.uniform(-1, 1)))
            body.append(ParamGate(kind, (q,), (prm,), dagger=bool(rng.random() < 0.25)))
        elif r < 0.75 or n == 1:
            body.append(h(q))
        else:
            a, b = (int(v) for v in rng.permutation(n)[:2])
            body.append(cnot(a, b) if rng.random() < 0.5 else cz(a, b))
    terms = {}
    for _ in range(3):
        key = tuple((qq, "XYZ"[int(rng.integers(3))]) for qq in range(n) if rng.random() < 0.7)
        terms[key] = terms.get(key, 0) + float(rng.normal())
    return ParamCircuit(n, tuple(body), names), PauliOperator(terms)


@criterion(9, "parameter-shift gradient check")
def test_c9_gradients():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        pc, H = random_param_circuit(rng)
        at = rng.uniform(-math.pi, math.pi, size=len(pc.params))
        worst = max(worst, float(np.max(np.abs(gradient(pc, H, at) -
                                               finite_difference(pc, H, at, h=1e-5)))))
    assert worst <= 1e-6, worst
    return f"50 circuits, max deviation {worst:.1e}"


# --------------------------------------------------------------------------- 10

@criterion(10, "determinism across 1, 2 and 8 workers")
def test_c10_determinism():
    # criterion 2: amplitudes and sampled counts; a low threshold forces chunking
    for p in c2_programs():
        meas = Program(p.qubit_count, p.qubit_count,
                       p.body + tuple(Measure(q, q) for q in range(p.qubit_count)))
        ref_amps = ref_counts = None
        for w in WORKERS:
            opts = SimOptions(seed=10, workers=w, parallel_threshold=1)
            amps = simulate(p, opts).amps
            counts = run(meas, opts, 200).counts
            if ref_amps is None:
                ref_amps, ref_counts = amps, counts
            assert np.array_equal(amps, ref_amps) and counts == ref_counts
    # criterion 3: trajectory counts
    for k, p, nm, _ in c3_cases():
        ref = None
        for w in WORKERS:
            c = run_noisy(p, nm, SimOptions(seed=100 + k, workers=w), 20_000)
            ref = ref or c
            assert c == ref
    # criterion 7: checksums, fused and unfused
    for fused in (False, True):
        sums = {c7_run(fused, w).checksum for w in WORKERS}
        assert len(sums) == 1, sums
    return "criteria 2, 3 and 7"
