"""OPENQASM 2.0 emission and parsing for the protocol gate set.

Only ``u3(theta,0,0)``, ``cx``, ``h``, ``sdg``, ``barrier`` and ``measure`` are
understood, plus the ``qreg``/``creg``/``include`` boilerplate.
"""
from __future__ import annotations

import ast
import math
import operator
import re

from .circuits import Circuit, Gate, RY, H, CNOT, SDG, BARRIER, MEASURE, MalformedCircuitError

DEFAULT_WIRES = 5
ANGLE_SIG_DIGITS = 6
ANGLE_ABS_TOL = 5e-6

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


class QasmError(ValueError):
    pass


class QasmSyntaxError(QasmError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class QasmUnsupportedError(QasmError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


def format_angle(value: float, full_precision: bool = False) -> str:
    """Shortest decimal with at most six significant digits that stays within
    ``ANGLE_ABS_TOL`` of ``value``; ``repr`` in full-precision mode."""
    if full_precision:
        return repr(float(value))
    if value == 0:
        return "0"
    text = f"{value:.{ANGLE_SIG_DIGITS}g}"
    for digits in range(1, ANGLE_SIG_DIGITS + 1):
        candidate = f"{value:.{digits}g}"
        if abs(float(candidate) - value) <= ANGLE_ABS_TOL:
            text = candidate
            break
    if "e" in text:
        text = repr(float(text))
    return text


def emit(circuit: Circuit, full_precision: bool = False, n_wires: int = DEFAULT_WIRES, register: str = "q") -> str:
    if circuit.n_qubits > n_wires:
        raise QasmError(f"circuit uses {circuit.n_qubits} qubits but only {n_wires} wires are declared")
    creg = "c"
    lines = [HEADER, f"qreg {register}[{n_wires}];", f"creg {creg}[{n_wires}];"]
    q = lambda i: f"{register}[{i}]"  # noqa: E731
    for g in circuit.gates:
        if g.kind == "ry":
            lines.append(f"u3({format_angle(g.angle, full_precision)},0,0) {q(g.qubits[0])};")
        elif g.kind in ("h", "sdg"):
            lines.append(f"{g.kind} {q(g.qubits[0])};")
        elif g.kind == "cx":
            lines.append(f"cx {q(g.qubits[0])},{q(g.qubits[1])};")
        elif g.kind == "barrier":
            lines.append("barrier " + ",".join(q(i) for i in range(n_wires)) + ";")
        elif g.kind == "measure":
            lines.append(f"measure {q(g.qubits[0])} -> {creg}[{g.clbit}];")
        else:
            raise QasmError(f"cannot emit gate {g.kind!r}")
    return "\n".join(lines) + "\n"


# -- parsing -----------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_angle(expr: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {expr!r}")

    return ev(ast.parse(expr.strip(), mode="eval"))


_IDENT = r"[a-zA-Z_][a-zA-Z0-9_]*"
_RE_VERSION = re.compile(r"OPENQASM\s+(\d+)\.(\d+)$")
_RE_INCLUDE = re.compile(r'include\s+"([^"]+)"$')
_RE_REG = re.compile(rf"(qreg|creg)\s+({_IDENT})\s*\[\s*(\d+)\s*\]$")
_RE_ARG = re.compile(rf"({_IDENT})\s*\[\s*(\d+)\s*\]$")
_RE_GATE = re.compile(rf"({_IDENT})\s*(?:\((.*)\))?\s*(.*)$", re.S)
_RE_MEASURE = re.compile(rf"measure\s+(.+?)\s*->\s*(.+)$", re.S)
_UNSUPPORTED = {"gate", "opaque", "if", "reset", "U", "CX", "u1", "u2", "x", "y", "z", "s", "t", "tdg", "rx", "ry", "rz", "cz", "ccx", "swap"}


def _statements(text: str):
    """Yield ``(statement, line, col)`` for each ``;``-terminated statement."""
    buf, start = [], None
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith("//", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            stmt = "".join(buf).strip()
            if not stmt:
                raise QasmSyntaxError("empty statement", line, col)
            yield stmt, start[0], start[1]
            buf, start = [], None
        else:
            if not ch.isspace() and start is None:
                start = (line, col)
            if start is not None:
                buf.append(ch)
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1
        i += 1
    if "".join(buf).strip():
        raise QasmSyntaxError("missing ';' at end of statement", start[0], start[1])


def parse(text: str) -> Circuit:
    """Parse the supported OPENQASM 2.0 subset into a :class:`Circuit`.

    The circuit width equals the declared quantum register size.
    """
    qreg: tuple[str, int] | None = None
    creg: tuple[str, int] | None = None
    gates: list[Gate] = []
    seen_version = False

    def qubit(arg: str, ln: int, cl: int) -> int:
        m = _RE_ARG.match(arg.strip())
        if not m:
            raise QasmSyntaxError(f"expected an indexed qubit, got {arg.strip()!r}", ln, cl)
        if qreg is None:
            raise QasmSyntaxError("qubit used before qreg declaration", ln, cl)
        name, idx = m.group(1), int(m.group(2))
        if name != qreg[0]:
            raise QasmSyntaxError(f"unknown register {name!r}", ln, cl)
        if idx >= qreg[1]:
            raise QasmSyntaxError(f"index {idx} out of range for {name}[{qreg[1]}]", ln, cl)
        return idx

    def qubit_list(args: str, ln: int, cl: int) -> list[int]:
        if not args.strip():
            raise QasmSyntaxError("missing qubit arguments", ln, cl)
        out = []
        for a in args.split(","):
            a = a.strip()
            if qreg is not None and a == qreg[0]:
                out.extend(range(qreg[1]))
            else:
                out.append(qubit(a, ln, cl))
        return out

    for stmt, ln, cl in _statements(text):
        if not seen_version:
            m = _RE_VERSION.match(stmt)
            if not m:
                raise QasmSyntaxError("expected 'OPENQASM 2.0' header", ln, cl)
            if (m.group(1), m.group(2)) != ("2", "0"):
                raise QasmUnsupportedError(f"OPENQASM version {m.group(1)}.{m.group(2)}", ln, cl)
            seen_version = True
            continue
        if _RE_INCLUDE.match(stmt):
            continue
        m = _RE_REG.match(stmt)
        if m:
            kind, name, size = m.group(1), m.group(2), int(m.group(3))
            if kind == "qreg":
                if qreg is not None:
                    raise QasmUnsupportedError("more than one quantum register", ln, cl)
                qreg = (name, size)
            else:
                if creg is not None:
                    raise QasmUnsupportedError("more than one classical register", ln, cl)
                creg = (name, size)
            continue
        head = re.match(_IDENT, stmt)
        if head is None:
            raise QasmSyntaxError(f"cannot parse {stmt!r}", ln, cl)
        word = head.group(0)
        if word == "measure":
            mm = _RE_MEASURE.match(stmt)
            if not mm:
                raise QasmSyntaxError("malformed measure statement", ln, cl)
            q = qubit(mm.group(1), ln, cl)
            cm = _RE_ARG.match(mm.group(2).strip())
            if not cm or creg is None or cm.group(1) != creg[0] or int(cm.group(2)) >= creg[1]:
                raise QasmSyntaxError(f"bad classical target {mm.group(2).strip()!r}", ln, cl)
            gates.append(MEASURE(q, int(cm.group(2))))
            continue
        if word in _UNSUPPORTED:
            raise QasmUnsupportedError(f"construct {word!r} is outside the supported subset", ln, cl)
        gm = _RE_GATE.match(stmt)
        name, params, args = gm.group(1), gm.group(2), gm.group(3)
        try:
            if name == "u3":
                if params is None:
                    raise QasmSyntaxError("u3 needs three parameters", ln, cl)
                vals = [_eval_angle(p) for p in params.split(",")]
                if len(vals) != 3:
                    raise QasmSyntaxError("u3 needs three parameters", ln, cl)
                if vals[1] != 0.0 or vals[2] != 0.0:
                    raise QasmUnsupportedError("u3 with nonzero phi/lambda", ln, cl)
                (q,) = _exactly(qubit_list(args, ln, cl), 1, name, ln, cl)
                gates.append(RY(q, vals[0]))
            elif name in ("h", "sdg"):
                if params is not None:
                    raise QasmSyntaxError(f"{name} takes no parameters", ln, cl)
                (q,) = _exactly(qubit_list(args, ln, cl), 1, name, ln, cl)
                gates.append(H(q) if name == "h" else SDG(q))
            elif name == "cx":
                if params is not None:
                    raise QasmSyntaxError("cx takes no parameters", ln, cl)
                c, t = _exactly(qubit_list(args, ln, cl), 2, name, ln, cl)
                gates.append(CNOT(c, t))
            elif name == "barrier":
                gates.append(BARRIER(*qubit_list(args, ln, cl)))
            else:
                raise QasmUnsupportedError(f"gate {name!r} is outside the supported subset", ln, cl)
        except (ValueError, SyntaxError) as exc:
            if isinstance(exc, QasmError):
                raise
            raise QasmSyntaxError(str(exc), ln, cl) from exc
    if not seen_version:
        raise QasmSyntaxError("empty program", 1, 1)
    if qreg is None:
        raise QasmSyntaxError("no quantum register declared", 1, 1)
    try:
        return Circuit(qreg[1], tuple(gates))
    except MalformedCircuitError as exc:
        raise QasmSyntaxError(str(exc), 1, 1) from exc


def _exactly(qubits: list[int], n: int, name: str, ln: int, cl: int) -> list[int]:
    if len(qubits) != n:
        raise QasmSyntaxError(f"{name} expects {n} qubit argument(s), got {len(qubits)}", ln, cl)
    return qubits
