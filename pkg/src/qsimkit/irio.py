"""Text formats: a line-oriented assembly IR (parse and emit), QASM 2.0 and Quil
emitters, and a console circuit drawing.

IR grammar::

    QINIT <n>
    CREG <m>
    <GATE> q[i](,q[j])*(,(<p>(,<p>)*))?      e.g.  RZ q[0],(1.5)
    UNITARY q[i](,q[j])*,(<re>,<im>,...)        row-major matrix entries
    DAGGER ... ENDDAGGER                        inverse of the enclosed block
    CONTROL q[i](,q[j])* ... ENDCONTROL         add controls to enclosed gates
    MEASURE q[i],c[j]
    QIF <expr> ... (ELSE ...) ENDQIF
    QWHILE <expr> ... ENDQWHILE
    c[i] = <expr>

Blank lines and ``#`` comments are ignored. Expressions use c[i], integer
literals, parentheses and ``* / + - < > == != ^ && ||`` (tightest first).
"""

from __future__ import annotations

import re

import numpy as np

from .circuit import (Assign, BinOp, CBit, ClassicalExpr, Const, Gate, GateKind, Measure,
                      Program, QIf, QWhile)
from .dag import build_dag
from .errors import QSimError, Unsupported

# --------------------------------------------------------------------------- errors


class IRParseError(QSimError, ValueError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line = line
        self.col = col


class IRSyntaxError(IRParseError):
    pass


class UnknownMnemonic(IRParseError):
    pass


class ArityError(IRParseError):
    pass


class RangeError(IRParseError):
    pass


class UnterminatedBlock(IRParseError):
    pass


# --------------------------------------------------------------------------- emit

def _num(x: float) -> str:
    return format(float(x), ".17g")


def _qs(qubits) -> str:
    return ",".join(f"q[{q}]" for q in qubits)


def emit_expr(e: ClassicalExpr) -> str:
    if isinstance(e, CBit):
        return f"c[{e.index}]"
    if isinstance(e, Const):
        return f"({e.value})" if e.value < 0 else str(e.value)
    if isinstance(e, BinOp):
        def sub(x):
            s = emit_expr(x)
            return f"({s})" if isinstance(x, BinOp) else s
        return f"{sub(e.left)}{e.op}{sub(e.right)}"
    raise TypeError(f"unknown expression {e!r}")


def _gate_line(g: Gate) -> str:
    if g.kind is GateKind.CUSTOM:
        vals = ",".join(f"{_num(z.real)},{_num(z.imag)}" for z in g.matrix.ravel())
        return f"UNITARY {_qs(g.targets)},({vals})"
    line = f"{g.kind.value} {_qs(g.targets)}"
    if g.params:
        line += ",(" + ",".join(_num(a) for a in g.params) + ")"
    return line


def _emit_block(body, out: list[str]) -> None:
    for ins in body:
        if isinstance(ins, Gate):
            if ins.controls:
                out.append(f"CONTROL {_qs(ins.controls)}")
            if ins.dagger:
                out.append("DAGGER")
            out.append(_gate_line(ins))
            if ins.dagger:
                out.append("ENDDAGGER")
            if ins.controls:
                out.append("ENDCONTROL")
        elif isinstance(ins, Measure):
            out.append(f"MEASURE q[{ins.qubit}],c[{ins.cbit}]")
        elif isinstance(ins, Assign):
            out.append(f"c[{ins.cbit}] = {emit_expr(ins.expr)}")
        elif isinstance(ins, QIf):
            out.append(f"QIF {emit_expr(ins.condition)}")
            _emit_block(ins.then_body, out)
            if ins.else_body is not None:
                out.append("ELSE")
                _emit_block(ins.else_body, out)
            out.append("ENDQIF")
        elif isinstance(ins, QWhile):
            out.append(f"QWHILE {emit_expr(ins.condition)}")
            _emit_block(ins.body, out)
            out.append("ENDQWHILE")
        else:
            raise TypeError(f"unknown instruction {ins!r}")


def emit_ir(p: Program) -> str:
    out = [f"QINIT {p.qubit_count}", f"CREG {p.cbit_count}"]
    _emit_block(p.body, out)
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- parse

_TOKEN = re.compile(r"\s*(?:(\d+)|(c\[\d+\])|(==|!=|&&|\|\||[-+*/<>^()]))")
_PREC = {"||": 1, "&&": 2, "^": 3, "==": 4, "!=": 4, "<": 5, ">": 5, "+": 6, "-": 6,
         "*": 7, "/": 7}


class _ExprParser:
    def __init__(self, text: str, line: int, col0: int, ncbits: int):
        self.toks: list[tuple[str, str, int]] = []
        self.line = line
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise IRSyntaxError(f"bad expression near {text[pos:]!r}", line, col0 + pos)
            start = col0 + m.start(m.lastindex)
            if m.group(1):
                self.toks.append(("int", m.group(1), start))
            elif m.group(2):
                idx = int(m.group(2)[2:-1])
                if idx >= ncbits:
                    raise RangeError(f"cbit c[{idx}] out of range (CREG {ncbits})", line, start)
                self.toks.append(("cbit", str(idx), start))
            else:
                self.toks.append(("op", m.group(3), start))
            pos = m.end()
        self.i = 0
        self.end_col = col0 + len(text)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        if t is None:
            raise IRSyntaxError("unexpected end of expression", self.line, self.end_col)
        self.i += 1
        return t

    def parse(self) -> ClassicalExpr:
        e = self.binary(1)
        if self.peek() is not None:
            raise IRSyntaxError(f"unexpected {self.peek()[1]!r}", self.line, self.peek()[2])
        return e

    def binary(self, min_prec: int) -> ClassicalExpr:
        left = self.atom()
        while True:
            t = self.peek()
            if t is None or t[0] != "op" or t[1] not in _PREC or _PREC[t[1]] < min_prec:
                return left
            self.take()
            right = self.binary(_PREC[t[1]] + 1)
            left = BinOp(t[1], left, right)

    def atom(self) -> ClassicalExpr:
        kind, val, col = self.take()
        if kind == "int":
            return Const(int(val))
        if kind == "cbit":
            return CBit(int(val))
        if val == "-":
            k2, v2, c2 = self.take()
            if k2 != "int":
                raise IRSyntaxError("expected integer after unary '-'", self.line, c2)
            return Const(-int(v2))
        if val == "(":
            e = self.binary(1)
            k2, v2, c2 = self.take()
            if v2 != ")":
                raise IRSyntaxError("expected ')'", self.line, c2)
            return e
        raise IRSyntaxError(f"unexpected {val!r}", self.line, col)


_REG = re.compile(r"(q|c)\[(\d+)\]$")
_HEADER = re.compile(r"(QINIT|CREG)\s+(\d+)$")
_GATE_NAMES = {k.value: k for k in GateKind}


class _Parser:
    def __init__(self, text: str):
        self.lines = []
        for no, raw in enumerate(text.splitlines(), 1):
            code = raw.split("#", 1)[0]
            stripped = code.strip()
            if stripped:
                self.lines.append((no, len(code) - len(code.lstrip()) + 1, stripped))
        self.i = 0
        self.nq = 0
        self.nc = 0

    def header(self):
        if not self.lines:
            raise IRSyntaxError("empty program: expected QINIT", 1)
        no, col, s = self.lines[0]
        m = _HEADER.match(s)
        if not m or m.group(1) != "QINIT":
            raise IRSyntaxError("program must start with 'QINIT n'", no, col)
        self.nq = int(m.group(2))
        self.i = 1
        if self.i < len(self.lines):
            no, col, s = self.lines[self.i]
            m = _HEADER.match(s)
            if m and m.group(1) == "CREG":
                self.nc = int(m.group(2))
                self.i += 1

    def parse(self) -> Program:
        self.header()
        body = self.block(terminators=(), opener=None)
        return Program(self.nq, self.nc, tuple(body))

    # operands ---------------------------------------------------------------

    def split_operands(self, rest: str, no: int, col: int):
        """Split ``q[0],q[1],(1.5,2)`` into register tokens and an optional param list."""
        params = None
        m = re.search(r",?\s*\(([^()]*)\)\s*$", rest)
        if m:
            params = (m.group(1), col + m.start(1))
            rest = rest[:m.start()]
        regs = []
        off = 0
        for part in rest.split(","):
            stripped = part.strip()
            c = col + off + (len(part) - len(part.lstrip()))
            off += len(part) + 1
            if stripped:
                regs.append((stripped, c))
            elif rest.strip():
                raise IRSyntaxError("empty operand", no, c)
        return regs, params

    def reg(self, tok, kind: str, no: int):
        s, c = tok
        m = _REG.match(s)
        if not m or m.group(1) != kind:
            raise IRSyntaxError(f"expected {kind}[i], got {s!r}", no, c)
        idx = int(m.group(2))
        lim = self.nq if kind == "q" else self.nc
        if idx >= lim:
            name = "QINIT" if kind == "q" else "CREG"
            raise RangeError(f"{s} out of range ({name} {lim})", no, c)
        return idx

    def floats(self, params, no: int):
        text, c = params
        vals = []
        for part in text.split(","):
            try:
                vals.append(float(part))
            except ValueError:
                raise IRSyntaxError(f"bad number {part.strip()!r}", no, c) from None
            c += len(part) + 1
        return vals

    # blocks -----------------------------------------------------------------

    def block(self, terminators, opener):
        body = []
        while self.i < len(self.lines):
            no, col, s = self.lines[self.i]
            word = s.split(None, 1)[0]
            if word in terminators:
                return body
            self.i += 1
            body.extend(self.statement(no, col, s, word))
        if opener is not None:
            no, col, name = opener
            raise UnterminatedBlock(f"{name} opened here is never closed", no, col)
        return body

    def expect(self, word):
        no, col, s = self.lines[self.i]
        if s != word:
            raise IRSyntaxError(f"expected {word}", no, col)
        self.i += 1

    def statement(self, no, col, s, word):
        rest = s[len(word):].strip()
        rest_col = col + len(s) - len(s[len(word):].lstrip())
        if word in ("QINIT", "CREG"):
            raise IRSyntaxError(f"{word} is only allowed in the header", no, col)
        if word == "MEASURE":
            regs, params = self.split_operands(rest, no, rest_col)
            if len(regs) != 2 or params is not None:
                raise ArityError("MEASURE takes q[i],c[j]", no, col)
            return [Measure(self.reg(regs[0], "q", no), self.reg(regs[1], "c", no))]
        if word == "DAGGER":
            if rest:
                raise IRSyntaxError("DAGGER takes no operands", no, rest_col)
            inner = self.block(("ENDDAGGER",), (no, col, "DAGGER"))
            self.expect("ENDDAGGER")
            out = []
            for g in reversed(inner):
                if not isinstance(g, Gate):
                    raise IRSyntaxError("only gates may appear inside DAGGER", no, col)
                out.append(g.inverse())
            return out
        if word == "CONTROL":
            regs, params = self.split_operands(rest, no, rest_col)
            if not regs or params is not None:
                raise ArityError("CONTROL needs at least one qubit", no, col)
            ctrl = tuple(self.reg(r, "q", no) for r in regs)
            inner = self.block(("ENDCONTROL",), (no, col, "CONTROL"))
            self.expect("ENDCONTROL")
            out = []
            for g in inner:
                if not isinstance(g, Gate):
                    raise IRSyntaxError("only gates may appear inside CONTROL", no, col)
                if set(ctrl) & set(g.qubits):
                    raise IRSyntaxError("control qubit also used by the controlled gate", no, col)
                out.append(g.replace(controls=ctrl + g.controls))
            return out
        if word == "QIF":
            cond = self.expr(rest, no, rest_col)
            then = self.block(("ELSE", "ENDQIF"), (no, col, "QIF"))
            other = None
            if self.lines[self.i][2] == "ELSE":
                self.i += 1
                other = self.block(("ENDQIF",), (no, col, "QIF"))
            self.expect("ENDQIF")
            return [QIf(cond, tuple(then), None if other is None else tuple(other))]
        if word == "QWHILE":
            cond = self.expr(rest, no, rest_col)
            body = self.block(("ENDQWHILE",), (no, col, "QWHILE"))
            self.expect("ENDQWHILE")
            return [QWhile(cond, tuple(body))]
        if word in ("ENDDAGGER", "ENDCONTROL", "ENDQIF", "ENDQWHILE", "ELSE"):
            raise IRSyntaxError(f"{word} without a matching opener", no, col)
        m = re.match(r"c\[(\d+)\]\s*=(?!=)\s*(.*)$", s)
        if m:
            idx = int(m.group(1))
            if idx >= self.nc:
                raise RangeError(f"c[{idx}] out of range (CREG {self.nc})", no, col)
            return [Assign(idx, self.expr(m.group(2), no, col + m.start(2)))]
        return [self.gate(no, col, word, rest, rest_col)]

    def expr(self, text, no, col):
        if not text:
            raise IRSyntaxError("missing condition", no, col)
        return _ExprParser(text, no, col, self.nc).parse()

    def gate(self, no, col, word, rest, rest_col) -> Gate:
        kind = _GATE_NAMES.get(word)
        if kind is None:
            raise UnknownMnemonic(f"unknown mnemonic {word!r}", no, col)
        regs, params = self.split_operands(rest, no, rest_col)
        qs = tuple(self.reg(r, "q", no) for r in regs)
        if len(set(qs)) != len(qs):
            raise ArityError("repeated qubit operand", no, col)
        if kind is GateKind.CUSTOM:
            if not qs or params is None:
                raise ArityError("UNITARY needs qubits and a matrix", no, col)
            vals = self.floats(params, no)
            d = 1 << len(qs)
            if len(vals) != 2 * d * d:
                raise ArityError(f"UNITARY on {len(qs)} qubits needs {2 * d * d} numbers, "
                                 f"got {len(vals)}", no, params[1])
            arr = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
            from .circuit import is_unitary
            m = arr.reshape(d, d)
            if not is_unitary(m):
                raise IRSyntaxError("UNITARY matrix is not unitary", no, params[1])
            return Gate(kind, qs, matrix=m)
        if len(qs) != kind.n_targets:
            raise ArityError(f"{word} takes {kind.n_targets} qubit(s), got {len(qs)}", no, col)
        vals = self.floats(params, no) if params is not None else []
        if len(vals) != kind.n_params:
            raise ArityError(f"{word} takes {kind.n_params} parameter(s), got {len(vals)}",
                             no, col)
        return Gate(kind, qs, tuple(vals))


def parse_ir(text: str) -> Program:
    return _Parser(text).parse()


# --------------------------------------------------------------------------- QASM / Quil

def _flat(p: Program) -> None:
    if not p.is_flat:
        raise Unsupported("control flow cannot be expressed in this target")


_QASM_FIXED = {GateKind.I: "id", GateKind.X: "x", GateKind.Y: "y", GateKind.Z: "z",
               GateKind.H: "h", GateKind.CNOT: "cx", GateKind.CZ: "cz", GateKind.SWAP: "swap"}
_QASM_ROT = {GateKind.RX: "rx", GateKind.RY: "ry", GateKind.RZ: "rz"}


def _qasm_lower(g: Gate) -> list[Gate]:
    """Rewrite ``g`` into gates the QASM table covers (compiler decompositions)."""
    from .compiler.basis import controlled_1q, decompose_multicontrol, to_u3
    if g.arity > 2 or (g.kind is GateKind.SWAP and g.controls):
        return [x for h in decompose_multicontrol(Program(max(g.qubits) + 1, 0, (g,))).body
                for x in _qasm_lower(h)]
    if g.controls:
        if g.kind in (GateKind.X, GateKind.Z) and len(g.controls) == 1:
            k = GateKind.CNOT if g.kind is GateKind.X else GateKind.CZ
            return [Gate(k, g.controls + g.targets)]
        if len(g.targets) != 1:
            raise Unsupported(f"controlled {g.kind.value} cannot be emitted")
        return [x for h in controlled_1q(g.controls[0], g.targets[0], g.base_matrix())
                for x in _qasm_lower(h)]
    if g.kind is GateKind.CUSTOM:
        if len(g.targets) != 1:
            raise Unsupported("multi-qubit UNITARY gates cannot be emitted")
        return [to_u3(g.matrix, g.targets[0])]
    return [g]


def _qasm_line(g: Gate) -> str:
    k = g.kind
    qs = ",".join(f"q[{q}]" for q in g.targets)
    if k in _QASM_FIXED:
        return f"{_QASM_FIXED[k]} {qs};"
    if k in (GateKind.S, GateKind.T):
        name = k.value.lower() + ("dg" if g.dagger else "")
        return f"{name} {qs};"
    if k in _QASM_ROT:
        a = -g.params[0] if g.dagger else g.params[0]
        return f"{_QASM_ROT[k]}({_num(a)}) {qs};"
    if k is GateKind.U3:
        th, ph, la = g.params
        if g.dagger:
            th, ph, la = -th, -la, -ph
        return f"u3({_num(th)},{_num(ph)},{_num(la)}) {qs};"
    raise Unsupported(f"{k.value} has no QASM form")


def emit_qasm(p: Program) -> str:
    """OPENQASM 2.0 text. Gates outside the qelib1 table are decomposed first."""
    _flat(p)
    out = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{p.qubit_count}];"]
    if p.cbit_count:
        out.append(f"creg c[{p.cbit_count}];")
    for ins in p.body:
        if isinstance(ins, Measure):
            out.append(f"measure q[{ins.qubit}] -> c[{ins.cbit}];")
        else:
            out.extend(_qasm_line(g) for g in _qasm_lower(ins))
    return "\n".join(out) + "\n"


_QUIL_NAMES = {GateKind.I: "I", GateKind.X: "X", GateKind.Y: "Y", GateKind.Z: "Z",
               GateKind.H: "H", GateKind.S: "S", GateKind.T: "T", GateKind.RX: "RX",
               GateKind.RY: "RY", GateKind.RZ: "RZ", GateKind.CNOT: "CNOT", GateKind.CZ: "CZ",
               GateKind.SWAP: "SWAP", GateKind.TOFFOLI: "CCNOT"}


def _quil_gate(g: Gate) -> list[str]:
    from .compiler.basis import zyz
    prefix = "CONTROLLED " * len(g.controls)
    qs = " ".join(str(q) for q in g.controls + g.targets)
    if g.kind in (GateKind.U3, GateKind.CUSTOM):
        if len(g.targets) != 1:
            raise Unsupported("multi-qubit UNITARY gates cannot be emitted")
        if g.kind is GateKind.U3:
            th, ph, la = g.params
            if g.dagger:
                th, ph, la = -th, -la, -ph
        else:
            _, th, ph, la = zyz(g.base_matrix())
        if g.controls:
            raise Unsupported("controlled U3/UNITARY has no phase-exact Quil form here")
        q = g.targets[0]
        return [f"RZ({_num(la)}) {q}", f"RY({_num(th)}) {q}", f"RZ({_num(ph)}) {q}"]
    name = _QUIL_NAMES[g.kind]
    if g.params:
        name += "(" + ",".join(_num(a) for a in g.params) + ")"
    dag = "DAGGER " if g.dagger and g.kind not in (GateKind.CNOT, GateKind.CZ, GateKind.SWAP,
                                                   GateKind.TOFFOLI, GateKind.X, GateKind.Y,
                                                   GateKind.Z, GateKind.H, GateKind.I) else ""
    return [f"{prefix}{dag}{name} {qs}"]


def emit_quil(p: Program) -> str:
    """Quil text with ``DECLARE ro``; controls use the CONTROLLED modifier."""
    _flat(p)
    out = []
    if p.cbit_count:
        out.append(f"DECLARE ro BIT[{p.cbit_count}]")
    for ins in p.body:
        if isinstance(ins, Measure):
            out.append(f"MEASURE {ins.qubit} ro[{ins.cbit}]")
        else:
            out.extend(_quil_gate(ins))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- drawing

def _label(g: Gate) -> str:
    name = g.kind.value
    if g.kind is GateKind.CUSTOM:
        name = "U"
    if g.dagger and g.kind not in (GateKind.CNOT, GateKind.CZ, GateKind.SWAP, GateKind.TOFFOLI):
        name += "†"
    if g.params:
        name += "(" + ",".join(f"{a:.4g}" for a in g.params) + ")"
    return name


def _cells(ins) -> dict[int, str]:
    if isinstance(ins, Measure):
        return {ins.qubit: "M"}
    g = ins
    cells = {c: "●" for c in g.controls}
    k = g.kind
    if k is GateKind.CNOT:
        cells[g.targets[0]] = "●"
        cells[g.targets[1]] = "⊕"
    elif k is GateKind.TOFFOLI:
        cells[g.targets[0]] = cells[g.targets[1]] = "●"
        cells[g.targets[2]] = "⊕"
    elif k is GateKind.CZ:
        cells[g.targets[0]] = cells[g.targets[1]] = "●"
    elif k is GateKind.SWAP:
        cells[g.targets[0]] = cells[g.targets[1]] = "×"
    elif k is GateKind.X and g.controls:
        cells[g.targets[0]] = "⊕"
    else:
        lab = _label(g)
        for t in g.targets:
            cells[t] = lab
    return cells


def draw(p: Program) -> str:
    """ASCII circuit: one row per qubit, one column per DAG layer.

    A layer whose multi-qubit spans would overlap is split into several
    columns so vertical links stay unambiguous. Wires crossing a multi-qubit
    gate's span are drawn as ``┼``.
    """
    dag = build_dag(p)
    columns: list[dict[int, str]] = []
    for layer in dag.layers():
        subcols: list[tuple[list, dict]] = []
        for i in layer:
            cells = _cells(p.body[i])
            lo, hi = min(cells), max(cells)
            for spans, col in subcols:
                if all(hi < a or lo > b for a, b in spans):
                    break
            else:
                spans, col = [], {}
                subcols.append((spans, col))
            spans.append((lo, hi))
            for q in range(lo, hi + 1):
                col[q] = cells.get(q, "┼")
        columns.extend(col for _, col in subcols)
    n = p.qubit_count
    names = [f"q[{q}]: " for q in range(n)]
    width = max((len(s) for s in names), default=0)
    rows = [s.rjust(width) for s in names]
    for col in columns:
        w = max(len(v) for v in col.values())
        for q in range(n):
            v = col.get(q)
            if v is None:
                rows[q] += "─" * (w + 2)
            else:
                pad = w - len(v)
                rows[q] += "─" + "─" * (pad // 2) + v + "─" * (pad - pad // 2) + "─"
    return "\n".join(r + "─" for r in rows) + "\n"
