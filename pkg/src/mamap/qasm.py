"""OpenQASM 2.0 subset reader and writer.

Supported: the ``OPENQASM 2.0`` header, ``include`` (ignored), ``qreg``/``creg``
declarations, the builtin gate set of :mod:`mamap.circuit` plus ``ccx`` and
``cz`` (both rewritten into CX + single-qubit gates), ``measure`` and
``barrier`` (stripped from the circuit, measurements are kept on the side).
Register broadcasting (``h q;``) follows the usual QASM rules.

Every failure surfaces as :class:`QasmError` carrying a :class:`ParseDiagnostic`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NoReturn

from .circuit import Gate, GateKind, QuantumCircuit
from .hardware import Mapping

MAX_QUBITS = 4096
MAX_EXPR_DEPTH = 64


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.message}"


class QasmError(ValueError):
    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class Register:
    name: str
    size: int
    offset: int


@dataclass
class QasmProgram:
    circuit: QuantumCircuit
    qregs: list[Register] = field(default_factory=list)
    cregs: list[Register] = field(default_factory=list)
    # (flat qubit, flat clbit) in source order
    measurements: list[tuple[int, int]] = field(default_factory=list)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>->|==|[;,\[\](){}+\-*/^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> Iterator[_Tok]:
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            _fail(line, pos - line_start + 1, f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            yield _Tok(kind, m.group(), line, m.start() - line_start + 1)
        pos = m.end()
    yield _Tok("eof", "", line, pos - line_start + 1)


def _fail(line: int, col: int, message: str) -> NoReturn:
    raise QasmError(ParseDiagnostic(line, col, message))


_SIMPLE = {k.value: k for k in GateKind}
_ALIASES = {"CX": GateKind.CX, "U": GateKind.U3, "u": GateKind.U3, "p": GateKind.U1}
_COMPOSITE_ARITY = {"ccx": 3, "cz": 2}


def _ccx(a: int, b: int, c: int) -> list[Gate]:
    H, T, TDG, CX = GateKind.H, GateKind.T, GateKind.TDG, GateKind.CX
    return [
        Gate(H, (c,)),
        Gate(CX, (b, c)), Gate(TDG, (c,)),
        Gate(CX, (a, c)), Gate(T, (c,)),
        Gate(CX, (b, c)), Gate(TDG, (c,)),
        Gate(CX, (a, c)), Gate(T, (b,)), Gate(T, (c,)), Gate(H, (c,)),
        Gate(CX, (a, b)), Gate(T, (a,)), Gate(TDG, (b,)),
        Gate(CX, (a, b)),
    ]


def _cz(a: int, b: int) -> list[Gate]:
    return [Gate(GateKind.H, (b,)), Gate(GateKind.CX, (a, b)), Gate(GateKind.H, (b,))]


class _Parser:
    def __init__(self, source: str):
        self.toks = list(_tokenize(source))
        self.i = 0
        self.qregs: dict[str, Register] = {}
        self.cregs: dict[str, Register] = {}
        self.nq = 0
        self.nc = 0
        self.gates: list[Gate] = []
        self.measurements: list[tuple[int, int]] = []

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message: str, tok: _Tok | None = None) -> NoReturn:
        t = tok or self.tok
        _fail(t.line, t.col, message)

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind in ("string", "eof"):
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            self.error(f"expected {text!r}, found {found}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> _Tok:
        if self.tok.kind != kind:
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            self.error(f"expected {what}, found {found}")
        return self.advance()

    def uint(self) -> int:
        t = self.expect_kind("number", "integer")
        if not t.text.isdigit():
            self.error(f"expected integer, found {t.text!r}", t)
        if len(t.text) > 12:
            self.error(f"integer {t.text[:12]}... too large", t)
        return int(t.text)

    # -- program -----------------------------------------------------------

    def program(self) -> QasmProgram:
        if self.tok.text == "OPENQASM":
            self.advance()
            v = self.expect_kind("number", "version number")
            if v.text not in ("2", "2.0"):
                self.error(f"unsupported OpenQASM version {v.text}; only 2.0 is supported", v)
            self.expect(";")
        while self.tok.kind != "eof":
            self.statement()
        circuit = QuantumCircuit(self.nq, tuple(self.gates))
        return QasmProgram(
            circuit,
            sorted(self.qregs.values(), key=lambda r: r.offset),
            sorted(self.cregs.values(), key=lambda r: r.offset),
            self.measurements,
        )

    def statement(self) -> None:
        t = self.tok
        if t.kind != "id":
            self.error(f"expected statement, found {t.text or 'end of input'!r}")
        word = t.text
        if word == "OPENQASM":
            self.error("OPENQASM header must come first")
        if word == "include":
            self.advance()
            self.expect_kind("string", "file name")
            self.expect(";")
        elif word in ("qreg", "creg"):
            self.declaration(word)
        elif word == "measure":
            self.advance()
            qs = self.argument(self.qregs, "qreg")
            self.expect("->")
            cs = self.argument(self.cregs, "creg")
            if len(qs) != len(cs):
                self.error("measure register sizes differ", t)
            self.expect(";")
            self.measurements.extend(zip(qs, cs))
        elif word == "barrier":
            self.advance()
            self.arguments()
            self.expect(";")
        elif word in ("if", "gate", "opaque", "reset"):
            self.error(f"'{word}' statements are not supported")
        else:
            self.gate_call()

    def declaration(self, word: str) -> None:
        self.advance()
        name_tok = self.expect_kind("id", "register name")
        self.expect("[")
        size_tok = self.tok
        size = self.uint()
        self.expect("]")
        self.expect(";")
        if size == 0:
            self.error("register size must be positive", size_tok)
        table = self.qregs if word == "qreg" else self.cregs
        if name_tok.text in self.qregs or name_tok.text in self.cregs:
            self.error(f"register {name_tok.text!r} already declared", name_tok)
        if word == "qreg":
            if self.nq + size > MAX_QUBITS:
                self.error(f"more than {MAX_QUBITS} qubits declared", size_tok)
            table[name_tok.text] = Register(name_tok.text, size, self.nq)
            self.nq += size
        else:
            if self.nc + size > MAX_QUBITS:
                self.error(f"more than {MAX_QUBITS} classical bits declared", size_tok)
            table[name_tok.text] = Register(name_tok.text, size, self.nc)
            self.nc += size

    def argument(self, table: dict[str, Register], what: str) -> list[int]:
        name_tok = self.expect_kind("id", f"{what} name")
        reg = table.get(name_tok.text)
        if reg is None:
            self.error(f"undeclared {what} {name_tok.text!r}", name_tok)
        if self.tok.text != "[":
            return [reg.offset + k for k in range(reg.size)]
        self.advance()
        idx_tok = self.tok
        idx = self.uint()
        self.expect("]")
        if idx >= reg.size:
            self.error(f"index {idx} out of range for {what} {reg.name}[{reg.size}]", idx_tok)
        return [reg.offset + idx]

    def arguments(self) -> list[list[int]]:
        args = [self.argument(self.qregs, "qreg")]
        while self.tok.text == ",":
            self.advance()
            args.append(self.argument(self.qregs, "qreg"))
        return args

    def gate_call(self) -> None:
        name_tok = self.advance()
        name = name_tok.text
        params: list[float] = []
        if self.tok.text == "(":
            self.advance()
            if self.tok.text != ")":
                params.append(self.expr(0))
                while self.tok.text == ",":
                    self.advance()
                    params.append(self.expr(0))
            self.expect(")")
        args = self.arguments()
        self.expect(";")

        if name == "id":
            return
        kind = _SIMPLE.get(name) or _ALIASES.get(name)
        if kind is not None:
            arity, nparams = kind.num_qubits, kind.num_params
        elif name in _COMPOSITE_ARITY:
            arity, nparams = _COMPOSITE_ARITY[name], 0
        else:
            self.error(f"unsupported gate {name!r}", name_tok)
        if len(args) != arity:
            self.error(f"gate {name!r} takes {arity} qubit argument(s), got {len(args)}", name_tok)
        if len(params) != nparams:
            self.error(f"gate {name!r} takes {nparams} parameter(s), got {len(params)}", name_tok)

        sizes = {len(a) for a in args if len(a) > 1}
        if len(sizes) > 1:
            self.error(f"register size mismatch in broadcast of {name!r}", name_tok)
        width = sizes.pop() if sizes else 1
        for k in range(width):
            qs = [a[k] if len(a) > 1 else a[0] for a in args]
            if len(set(qs)) != len(qs):
                self.error(f"gate {name!r} applied to a repeated qubit", name_tok)
            if kind is not None:
                self.gates.append(Gate(kind, tuple(qs), tuple(params)))
            elif name == "ccx":
                self.gates.extend(_ccx(*qs))
            else:
                self.gates.extend(_cz(*qs))

    # -- angle expressions ---------------------------------------------------

    def expr(self, depth: int) -> float:
        if depth > MAX_EXPR_DEPTH:
            self.error("expression nested too deeply")
        value = self.term(depth)
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            rhs = self.term(depth)
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self, depth: int) -> float:
        value = self.unary(depth)
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op_tok = self.advance()
            rhs = self.unary(depth)
            if op_tok.text == "*":
                value *= rhs
            elif rhs == 0:
                self.error("division by zero", op_tok)
            else:
                value /= rhs
        return value

    def unary(self, depth: int) -> float:
        if self.tok.text in ("-", "+") and self.tok.kind == "op":
            sign = -1.0 if self.advance().text == "-" else 1.0
            if depth > MAX_EXPR_DEPTH:
                self.error("expression nested too deeply")
            return sign * self.unary(depth + 1)
        t = self.tok
        if t.kind == "number":
            self.advance()
            return float(t.text)
        if t.kind == "id" and t.text == "pi":
            self.advance()
            return math.pi
        if t.text == "(":
            self.advance()
            value = self.expr(depth + 1)
            self.expect(")")
            return value
        found = "end of input" if t.kind == "eof" else repr(t.text)
        self.error(f"expected angle expression, found {found}")


def parse_program(source: str) -> QasmProgram:
    return _Parser(source).program()


def parse(source: str) -> QuantumCircuit:
    """Parse QASM text into a circuit; raises :class:`QasmError` on bad input."""
    return parse_program(source).circuit


def load(path: str | Path) -> QuantumCircuit:
    return parse(Path(path).read_text(encoding="utf-8"))


def _format_gate(g: Gate) -> str:
    args = ",".join(f"q[{q}]" for q in g.qubits)
    if g.params:
        return f"{g.kind.value}({','.join(repr(p) for p in g.params)}) {args};"
    return f"{g.kind.value} {args};"


def serialize(
    circuit: QuantumCircuit,
    mapping: Mapping | None = None,
    *,
    expand_swaps: bool = False,
    clbits: list[int] | None = None,
) -> str:
    """Emit QASM 2.0 text.

    With a final ``mapping`` (logical -> physical) one measure statement per
    logical qubit is appended, reading physical ``mapping[l]`` into classical
    bit ``clbits[l]`` (``l`` by default).
    """
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.num_qubits}];"]
    if mapping is not None:
        labels = list(range(len(mapping))) if clbits is None else list(clbits)
        if len(labels) != len(mapping):
            raise ValueError("clbits must have one entry per logical qubit")
        lines.append(f"creg c[{max(labels, default=-1) + 1}];")
    for g in circuit.gates:
        if expand_swaps and g.kind is GateKind.SWAP:
            a, b = g.qubits
            lines += [f"cx q[{a}],q[{b}];", f"cx q[{b}],q[{a}];", f"cx q[{a}],q[{b}];"]
        else:
            lines.append(_format_gate(g))
    if mapping is not None:
        for logical, phys in enumerate(mapping):
            lines.append(f"measure q[{phys}] -> c[{labels[logical]}];")
    return "\n".join(lines) + "\n"
