"""Command-line entry point: ``qsimkit run|compile|bench|draw``."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from .bench import BACKENDS, TABLE_HEADER, BenchSpec, run_bench, table_row
from .circuit import Measure, Program
from .compiler import BasisSet, Topology, compile
from .errors import InvalidProgramError, QSimError
from .irio import draw, emit_ir, emit_qasm, emit_quil, parse_ir
from .noise import NoiseModel, run_noisy
from .pathsum import single_amplitude
from .statevector import SimOptions, run, sample_indices

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_INVALID = 5
EXIT_BACKEND = 6

EPILOG = """exit codes:
  0  success
  2  bad command-line usage
  3  input file missing or unreadable
  4  parse failure (IR, topology, noise model)
  5  program fails validation
  6  backend or compiler error (budget, unsupported construct, mapping)

topologies: a file with 'nodes N' and 'edge a b [fidelity]' lines, or one of
  path:N, circle:N, grid:RxC
"""


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror or e}", EXIT_IO) from e


def _parse(fn, text: str, what: str):
    try:
        return fn(text)
    except (QSimError, ValueError, KeyError, TypeError) as e:
        raise CliError(f"{what}: {e}", EXIT_PARSE) from e


def load_program(path: str) -> Program:
    return _parse(parse_ir, _read(path), path)


def load_topology(spec: str) -> Topology:
    kind, sep, arg = spec.partition(":")
    if sep and kind in ("path", "circle", "grid") and not Path(spec).exists():
        try:
            if kind == "grid":
                r, c = arg.lower().split("x")
                return Topology.grid(int(r), int(c))
            return getattr(Topology, kind)(int(arg))
        except (QSimError, ValueError) as e:
            raise CliError(f"bad topology {spec!r}: {e}", EXIT_PARSE) from e
    return _parse(Topology.parse, _read(spec), spec)


def load_noise(path: str | None) -> NoiseModel | None:
    if path is None:
        return None
    return _parse(lambda t: NoiseModel.from_dict(json.loads(t)), _read(path), path)


def _opt_flags(s: str) -> tuple[bool, bool]:
    flags = {f.strip() for f in s.split(",") if f.strip()}
    if flags == {"none"}:
        return False, False
    bad = flags - {"fusion", "peephole"}
    if bad or not flags:
        raise CliError(f"--opt takes 'none' or a list of fusion,peephole (got {s!r})", EXIT_USAGE)
    return "fusion" in flags, "peephole" in flags


def _print_counts(counts: dict[str, int], out) -> None:
    for bits in sorted(counts):
        print(f"{bits} {counts[bits]}", file=out)


# --------------------------------------------------------------------------- commands

def _path_counts(p: Program, shots: int, seed: int) -> dict[str, int]:
    """Counts from path-sum amplitudes of every basis state (small programs)."""
    gates, meas = [], {}
    for ins in p.body:
        if isinstance(ins, Measure):
            meas[ins.cbit] = ins.qubit
        elif meas:
            raise CliError("path backend needs measurements at the end of the program",
                           EXIT_BACKEND)
        else:
            gates.append(ins)
    n = p.qubit_count
    if n > 16:
        raise CliError("path backend enumerates all outcomes; use --target above 16 qubits",
                       EXIT_BACKEND)
    q = Program(n, 0, tuple(gates))
    probs = np.array([abs(single_amplitude(q, format(i, f"0{n}b"))) ** 2 for i in range(1 << n)])
    idx = sample_indices(probs, shots, np.random.default_rng(seed))
    keys = np.zeros(shots, dtype=np.int64)
    for c, qb in meas.items():
        keys |= ((idx >> qb) & 1) << c
    vals, cnt = np.unique(keys, return_counts=True)
    m = p.cbit_count
    return {format(int(v), f"0{m}b") if m else "": int(k) for v, k in zip(vals, cnt)}


def cmd_run(a, out) -> int:
    p = load_program(a.file)
    fusion, _ = _opt_flags(a.opt)
    opts = SimOptions(seed=a.seed, workers=a.workers, fusion_enabled=fusion)
    if a.backend == "path":
        if a.target:
            q = Program(p.qubit_count, 0, tuple(p.gates()))
            for t in a.target:
                amp = single_amplitude(q, t)
                print(f"{t} {amp.real!r} {amp.imag!r}", file=out)
            return EXIT_OK
        _print_counts(_path_counts(p, a.shots, a.seed), out)
        return EXIT_OK
    if a.backend == "noisy":
        counts = run_noisy(p, load_noise(a.noise) or NoiseModel(), opts, a.shots)
    else:
        if a.noise:
            raise CliError("--noise needs --backend noisy", EXIT_USAGE)
        counts = run(p, opts, a.shots).counts
    _print_counts(counts, out)
    return EXIT_OK


def _report_text(rep) -> str:
    d = rep.as_dict()
    lines = []
    for stage, m in d["stages"].items():
        for k, v in m.items():
            lines.append(f"{stage}.{k}={v}")
    for k in ("swaps", "initial_layout", "final_layout", "equivalence_checked"):
        v = d[k]
        lines.append(f"{k}={','.join(map(str, v)) if isinstance(v, list) else v}")
    return "\n".join(lines) + "\n"


def cmd_compile(a, out) -> int:
    p = load_program(a.file)
    topo = load_topology(a.topology)
    if a.basis != "u3cz":
        raise CliError(f"unknown basis {a.basis!r}", EXIT_USAGE)
    q, rep = compile(p, topo, BasisSet(), check=not a.no_check)
    text = {"oir": emit_ir, "qasm": emit_qasm, "quil": emit_quil}[a.format](q)
    report = json.dumps(rep.as_dict(), indent=2) + "\n" if a.report_format == "json" \
        else _report_text(rep)
    if a.output:
        Path(a.output).write_text(text)
    else:
        out.write(text)
    if a.report:
        Path(a.report).write_text(report)
    else:
        sys.stderr.write(report)
    return EXIT_OK


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def cmd_bench(a, out) -> int:
    noise = load_noise(a.noise)
    opts = [_opt_flags(o) for o in (a.opt or ["none"])]
    print("\t".join(TABLE_HEADER), file=out)
    for n in a.qubits:
        for d in a.layers:
            for fusion, peep in opts:
                spec = BenchSpec(n, d, a.seed, a.backend, fusion, peep, a.workers,
                                 shots=a.shots, noise=noise)
                rows = [run_bench(spec) for _ in range(a.repeat)]
                # report the run with the median total time
                med = statistics.median_low([r.total for r in rows])
                print(table_row(next(r for r in rows if r.total == med)), file=out)
    return EXIT_OK


def cmd_draw(a, out) -> int:
    out.write(draw(load_program(a.file)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsimkit", description="Quantum circuit simulation and "
                                 "compilation toolkit.", epilog=EPILOG,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an IR file and print counts", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("file")
    r.add_argument("--backend", choices=BACKENDS, default="statevector")
    r.add_argument("--shots", type=int, default=1024)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--opt", default="none", help="none or fusion,peephole")
    r.add_argument("--noise", help="noise model JSON (noisy backend)")
    r.add_argument("--target", action="append",
                   help="path backend: print this amplitude instead of counts (repeatable)")
    r.set_defaults(fn=cmd_run)

    c = sub.add_parser("compile", help="compile an IR file for a topology", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("file")
    c.add_argument("--topology", required=True)
    c.add_argument("--basis", default="u3cz")
    c.add_argument("--format", choices=("oir", "qasm", "quil"), default="oir")
    c.add_argument("-o", "--output", help="write the program here instead of stdout")
    c.add_argument("--report", help="write the report here instead of stderr")
    c.add_argument("--report-format", choices=("text", "json"), default="text")
    c.add_argument("--no-check", action="store_true", help="skip the equivalence check")
    c.set_defaults(fn=cmd_compile)

    b = sub.add_parser("bench", help="random-circuit benchmark sweep (tab-separated table)",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    b.add_argument("--qubits", type=_int_list, default=[10])
    b.add_argument("--layers", type=_int_list, default=[10])
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--backend", choices=BACKENDS, default="statevector")
    b.add_argument("--opt", action="append", help="none or fusion,peephole (repeatable)")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--shots", type=int, default=1000)
    b.add_argument("--repeat", type=int, default=1, help="runs per row; the median is shown")
    b.add_argument("--noise", help="noise model JSON (noisy backend)")
    b.set_defaults(fn=cmd_bench)

    d = sub.add_parser("draw", help="print an ASCII circuit diagram")
    d.add_argument("file")
    d.set_defaults(fn=cmd_draw)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return a.fn(a, out)
    except CliError as e:
        print(f"qsimkit: error: {e}", file=sys.stderr)
        return e.code
    except InvalidProgramError as e:
        print(f"qsimkit: invalid program: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (QSimError, ValueError) as e:
        print(f"qsimkit: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
