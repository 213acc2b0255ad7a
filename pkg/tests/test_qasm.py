import math
from pathlib import Path

import numpy as np
import pytest

from uhlmann.band import ModelParams
from uhlmann.circuits import CNOT, Circuit, H, RY, SDG, build_from_angles, readout, state_dependent_angles
from uhlmann.qasm import QasmError, QasmSyntaxError, QasmUnsupportedError, emit, format_angle, parse

DATA = Path(__file__).parent / "data"


def r015(basis="x"):
    return build_from_angles(state_dependent_angles(0.15, ModelParams(0.2)), basis=basis)


def test_emit_matches_golden_bytes():
    golden = (DATA / "state_dependent_r015_x.qasm").read_bytes()
    assert emit(r015()).encode() == golden


def test_y_variant_inserts_sdg():
    lines = emit(r015("y")).splitlines()
    assert lines[-3:] == ["sdg q[0];", "h q[0];", "measure q[0] -> c[0];"]
    x_lines = emit(r015("x")).splitlines()
    assert lines[:-3] == x_lines[:-2]


def test_empty_circuit_is_header_only():
    text = emit(Circuit(3, ()))
    assert text == 'OPENQASM 2.0;\ninclude "qelib1.inc";\n\nqreg q[5];\ncreg c[5];\n'
    assert parse(text) == Circuit(5, ())


def test_emit_rejects_too_few_wires():
    with pytest.raises(QasmError):
        emit(r015(), n_wires=2)


@pytest.mark.parametrize(
    "value,text",
    [(0.7954, "0.7954"), (2.24355, "2.24355"), (math.pi, "3.14159"), (0.283794, "0.28379"), (0.2838, "0.2838"), (0.0, "0"), (-1.5, "-1.5")],
)
def test_format_angle(value, text):
    assert format_angle(value) == text


def test_format_angle_tolerance():
    rng = np.random.default_rng(3)
    for v in rng.uniform(-10, 10, 200):
        s = format_angle(v)
        assert abs(float(s) - v) <= 5e-6
        assert len(s.lstrip("-").replace(".", "")) <= 7
        assert float(format_angle(v, full_precision=True)) == v


def test_verbatim_listing_reproduces_zero_phase():
    c = parse((DATA / "listing_r015_verbatim.qasm").read_text())
    assert c.n_qubits == 5
    ro = readout(c)
    assert ro.phase == pytest.approx(0.0, abs=1e-9)
    assert ro.exp_x > 0.5
    # same probe statistics as the 3-qubit builder circuit
    ref = readout(r015())
    assert ro.exp_x == pytest.approx(ref.exp_x, abs=1e-5)
    assert ro.exp_y == pytest.approx(ref.exp_y, abs=1e-5)


def test_golden_parses_back_to_builder_gates():
    c = parse((DATA / "state_dependent_r015_x.qasm").read_text())
    src = r015()
    kinds = [(g.kind, g.qubits) for g in c.gates if g.kind != "barrier"]
    assert kinds == [(g.kind, g.qubits) for g in src.gates if g.kind != "barrier"]
    angles = [g.angle for g in c.gates if g.kind == "ry"]
    ref = [g.angle for g in src.gates if g.kind == "ry"]
    assert np.allclose(angles, ref, atol=5e-6)


def _random_circuit(rng, n=3, depth=12):
    gates = []
    for _ in range(depth):
        k = rng.integers(4)
        q = int(rng.integers(n))
        if k == 0:
            gates.append(RY(q, float(rng.uniform(-2 * math.pi, 2 * math.pi))))
        elif k == 1:
            gates.append(H(q))
        elif k == 2:
            gates.append(SDG(q))
        else:
            t = int((q + 1 + rng.integers(n - 1)) % n)
            gates.append(CNOT(q, t))
    return Circuit(n, tuple(gates))


def test_round_trip_unitary_full_precision():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        c = _random_circuit(rng)
        back = parse(emit(c, full_precision=True))
        assert back.n_qubits == 5
        ref = Circuit(5, c.gates).unitary()
        assert np.abs(back.unitary() - ref).max() < 1e-12


def test_round_trip_default_precision_within_angle_tolerance():
    rng = np.random.default_rng(7)
    c = _random_circuit(rng)
    back = parse(emit(c, n_wires=3))
    assert np.abs(back.unitary() - c.unitary()).max() < 1e-4


def test_parse_accepts_expressions_and_comments():
    text = 'OPENQASM 2.0;\n// comment\ninclude "qelib1.inc";\nqreg q[3]; creg c[3];\nu3(pi/2,0,0) q[1]; // tail\nu3(-2*pi,0,0) q[0];\n'
    c = parse(text)
    assert [g.angle for g in c.gates] == [pytest.approx(math.pi / 2), pytest.approx(-2 * math.pi)]


def test_wrong_arity_reports_location():
    text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\n  cx q[0];\n'
    with pytest.raises(QasmSyntaxError) as info:
        parse(text)
    assert (info.value.line, info.value.col) == (4, 3)
    assert "cx expects 2" in str(info.value)


@pytest.mark.parametrize(
    "body,exc",
    [
        ("qreg q[2];\nrz(0.1) q[0];", QasmUnsupportedError),
        ("qreg q[2];\ngate foo a { h a; }", QasmUnsupportedError),
        ("qreg q[2];\ncreg c[2];\nif(c==1) h q[0];", QasmUnsupportedError),
        ("qreg q[2];\nreset q[0];", QasmUnsupportedError),
        ("qreg q[2];\nu3(0.1,0.2,0) q[0];", QasmUnsupportedError),
        ("qreg q[2];\nqreg r[2];", QasmUnsupportedError),
        ("qreg q[2];\nfoo q[0];", QasmUnsupportedError),
        ("qreg q[2];\nh q[5];", QasmSyntaxError),
        ("qreg q[2];\nh r[0];", QasmSyntaxError),
        ("qreg q[2];\nu3(1,0) q[0];", QasmSyntaxError),
        ("qreg q[2];\nu3(sin(1),0,0) q[0];", QasmSyntaxError),
        ("qreg q[2];\nh q[0]", QasmSyntaxError),
        ("qreg q[2];\nh q[0];\nmeasure q[0] -> c[0];", QasmSyntaxError),
    ],
)
def test_rejects_bad_programs(body, exc):
    with pytest.raises(exc):
        parse("OPENQASM 2.0;\n" + body + "\n")


def test_header_required():
    with pytest.raises(QasmSyntaxError):
        parse("qreg q[2];\n")
    with pytest.raises(QasmUnsupportedError):
        parse("OPENQASM 3.0;\nqreg q[2];\n")
    with pytest.raises(QasmSyntaxError):
        parse("")
