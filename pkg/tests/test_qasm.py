from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from mamap import qasm
from mamap.circuit import Gate, GateKind, QuantumCircuit, cx, decompose_swaps, swap
from mamap.hardware import Mapping

from conftest import BENCH_DIR, all_benchmarks, bench, logical_outputs

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def test_minimal_program():
    c = qasm.parse("OPENQASM 2.0; qreg q[2]; cx q[0],q[1];")
    assert c == QuantumCircuit(2, (cx(0, 1),))


def test_toffoli_expansion_matches_truth_table():
    c = qasm.parse(HEADER + "qreg q[3]; ccx q[0],q[1],q[2];")
    assert sum(g.kind is GateKind.CX for g in c.gates) == 6
    assert sum(not g.is_two_qubit for g in c.gates) == 9
    inputs = list(range(8))
    # oracle: the target (bit 2) flips exactly when both controls are set
    expected = np.eye(8)[[x ^ 4 if x & 3 == 3 else x for x in inputs]]
    assert np.allclose(logical_outputs(c, inputs), expected, atol=1e-9)


def test_cz_expansion_is_diagonal_with_phase_on_11():
    c = qasm.parse(HEADER + "qreg q[2]; cz q[0],q[1];")
    assert [g.kind for g in c.gates] == [GateKind.H, GateKind.CX, GateKind.H]
    out = logical_outputs(c, [0, 1, 2, 3])
    assert np.allclose(out, np.diag([1, 1, 1, -1]), atol=1e-9)


def test_index_out_of_range_is_a_diagnostic():
    with pytest.raises(qasm.QasmError) as err:
        qasm.parse(HEADER + "qreg q[2];\ncx q[0],q[5];")
    d = err.value.diagnostic
    assert d.line == 4
    assert "q[2]" in d.message and "5" in d.message


def test_unsupported_gate_is_named():
    with pytest.raises(qasm.QasmError) as err:
        qasm.parse(HEADER + "qreg q[2]; crz(0.1) q[0],q[1];")
    assert "crz" in str(err.value)


@pytest.mark.parametrize(
    "body",
    [
        "qreg q[2]; creg c[2]; if (c==1) x q[0];",
        "gate foo a { x a; } qreg q[1];",
        "qreg q[1]; reset q[0];",
        "qreg q[1] x q[0];",
        "qreg q[1]; rz(1/0) q[0];",
        "qreg q[1]; rz(pi q[0];",
        "qreg q[99999999999999]; ",
    ],
)
def test_rejected_constructs_give_diagnostics(body):
    with pytest.raises(qasm.QasmError) as err:
        qasm.parse(HEADER + body)
    assert err.value.diagnostic.line >= 1 and err.value.diagnostic.column >= 1


def test_wrong_version_is_rejected():
    with pytest.raises(qasm.QasmError):
        qasm.parse("OPENQASM 3.0; qubit q;")


def test_registers_are_flattened_in_declaration_order():
    prog = qasm.parse_program(HEADER + "qreg a[2]; qreg b[3]; creg c[5]; cx a[1],b[2]; measure b[0] -> c[4];")
    assert prog.circuit == QuantumCircuit(5, (cx(1, 4),))
    assert [(r.name, r.size, r.offset) for r in prog.qregs] == [("a", 2, 0), ("b", 3, 2)]
    assert prog.measurements == [(2, 4)]


def test_register_broadcast_and_barrier():
    c = qasm.parse(HEADER + "qreg q[3]; h q; barrier q; x q[1];")
    assert [g.qubits for g in c.gates] == [(0,), (1,), (2,), (1,)]


def test_angle_expressions():
    c = qasm.parse(HEADER + "qreg q[1]; rz(pi/2) q[0]; u1(-2*pi/3) q[0]; rx(0.5e1 - (1)) q[0]; u3(pi,0,-pi/4) q[0];")
    assert [g.params for g in c.gates] == [
        (math.pi / 2,),
        (-2 * math.pi / 3,),
        (4.0,),
        (math.pi, 0.0, -math.pi / 4),
    ]


def test_serialize_empty_circuit():
    assert qasm.serialize(QuantumCircuit(3)) == HEADER + "qreg q[3];\n"


def test_serialize_routed_ghz_with_final_mapping():
    # GHZ routed on belem: after SWAP(0,1), logical q0 sits on node 1 and q1 on node 0
    phys = QuantumCircuit(5, (Gate(GateKind.H, (0,)), cx(0, 1), swap(0, 1), cx(1, 2), cx(1, 3)))
    final = Mapping((1, 0, 2, 3))
    text = qasm.serialize(phys, final)
    assert text.count("swap q[0],q[1];") == 1
    assert "measure q[1] -> c[0];" in text and "measure q[0] -> c[1];" in text
    assert "creg c[4];" in text
    expanded = qasm.serialize(phys, final, expand_swaps=True)
    assert "swap" not in expanded
    assert qasm.parse(expanded) == decompose_swaps(phys)
    prog = qasm.parse_program(text)
    assert prog.circuit == phys
    assert prog.measurements == [(1, 0), (0, 1), (2, 2), (3, 3)]


def test_serialize_uses_original_clbits():
    text = qasm.serialize(QuantumCircuit(2, (cx(0, 1),)), Mapping((1, 0)), clbits=[3, 7])
    assert "creg c[8];" in text
    assert "measure q[1] -> c[3];" in text and "measure q[0] -> c[7];" in text


def test_round_trip_of_4gt13_92():
    original = qasm.load(BENCH_DIR / "4gt13_92.qasm")
    assert qasm.parse(qasm.serialize(original)) == original


# Gate counts and widths of the shipped benchmark files, as listed in the published tables.
PUBLISHED_SIZES = {
    "graycode6_47": (6, 5), "xor5_254": (6, 7), "4mod5-v1_22": (5, 21), "mod5mils_65": (5, 35),
    "alu-v0_27": (5, 36), "decod24-v2_43": (4, 52), "mod5d2_64": (5, 53), "4gt13_92": (5, 66),
    "alu-v0_26": (5, 84), "4gt5_76": (5, 91), "qft_10": (10, 200), "4gt4-v0_72": (6, 258),
    "sym6_316": (14, 270), "rd53_135": (7, 296), "cnt3-5_180": (16, 485), "qft_16": (16, 512),
    "rd53_133": (7, 580), "con1_216": (9, 954), "ising_model_10": (10, 480), "ising_model_13": (13, 633),
    "ising_model_16": (16, 786), "rd84_142": (15, 343), "adr4_197": (13, 3439), "radd_250": (13, 3213),
    "z4_268": (11, 3073), "sym6_145": (7, 3888), "misex1_241": (15, 4813), "rd73_252": (10, 5321),
    "cycle10_2_110": (12, 6050), "square_root_7": (15, 7630), "sqn_258": (10, 10223), "rd84_253": (12, 13658),
}


@pytest.mark.parametrize("name", sorted(PUBLISHED_SIZES))
def test_benchmark_sizes_match_published_tables(name):
    c = bench(name)
    assert (c.num_qubits, len(c.gates)) == PUBLISHED_SIZES[name]


def test_suite_spans_the_required_range():
    sizes = [(bench(n).num_qubits, len(bench(n).gates)) for n in all_benchmarks()]
    assert len(sizes) >= 20
    assert min(q for q, _ in sizes) <= 4 and max(q for q, _ in sizes) >= 16
    assert min(g for _, g in sizes) <= 5 and max(g for _, g in sizes) >= 13000


angles = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def random_circuits(draw):
    n = draw(st.integers(2, 6))
    gates = []
    for _ in range(draw(st.integers(0, 30))):
        kind = draw(st.sampled_from(list(GateKind)))
        qubits = tuple(draw(st.permutations(range(n)))[: kind.num_qubits])
        params = tuple(draw(angles) for _ in range(kind.num_params))
        gates.append(Gate(kind, qubits, params))
    return QuantumCircuit(n, tuple(gates))


@given(random_circuits())
def test_parse_inverts_serialize(c):
    assert qasm.parse(qasm.serialize(c)) == c


SAMPLE = (BENCH_DIR / "4mod5-v1_22.qasm").read_text()


@settings(max_examples=300, suppress_health_check=[HealthCheck.too_slow])
@given(st.text(max_size=200))
def test_parsing_arbitrary_text_never_crashes(text):
    try:
        qasm.parse(text)
    except qasm.QasmError:
        pass


@settings(max_examples=300)
@given(st.integers(0, len(SAMPLE) - 1), st.integers(0, 20), st.text(max_size=8))
def test_parsing_mutated_benchmarks_never_crashes(start, length, insert):
    text = SAMPLE[:start] + insert + SAMPLE[start + length:]
    try:
        qasm.parse(text)
    except qasm.QasmError as exc:
        assert exc.diagnostic.line >= 1


def test_deeply_nested_expression_is_a_diagnostic():
    with pytest.raises(qasm.QasmError):
        qasm.parse(HEADER + "qreg q[1]; rz(" + "(" * 500 + "1" + ")" * 500 + ") q[0];")
