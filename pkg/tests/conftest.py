from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from mamap import qasm
from mamap.circuit import Gate, GateKind, QuantumCircuit, cx, decompose_swaps
from mamap.hardware import HardwareModel, Mapping, load_device
from mamap.simulator import StateBatch

BENCH_DIR = Path(str(resources.files("mamap") / "data" / "benchmarks"))


def bench(name: str) -> QuantumCircuit:
    """Shipped benchmark with idle register qubits removed."""
    return qasm.load(BENCH_DIR / f"{name}.qasm").compact()[0]


def all_benchmarks() -> list[str]:
    return sorted(p.stem for p in BENCH_DIR.glob("*.qasm"))


def ghz4() -> QuantumCircuit:
    return QuantumCircuit(4, (Gate(GateKind.H, (0,)), cx(0, 1), cx(0, 2), cx(0, 3)))


def path_device(num_nodes: int, errors: dict[tuple[int, int], float] | None = None, default: float = 0.01):
    """Line 0-1-...-(n-1); ``errors`` overrides both directions of chosen edges."""
    edges = [(i, i + 1) for i in range(num_nodes - 1)]
    cal = {}
    for u, v in edges:
        e = (errors or {}).get((u, v), default)
        cal[(u, v)] = cal[(v, u)] = e
    return HardwareModel.build(num_nodes, edges, cal, name=f"path{num_nodes}")


@pytest.fixture(scope="session")
def belem() -> HardwareModel:
    return load_device("belem")


@pytest.fixture(scope="session")
def guadalupe() -> HardwareModel:
    return load_device("guadalupe")


@pytest.fixture(scope="session")
def tokyo() -> HardwareModel:
    return load_device("tokyo")


def random_basis_inputs(num_qubits: int, count: int, seed: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.randrange(1 << num_qubits) for _ in range(count)]


def logical_outputs(logical: QuantumCircuit, inputs: list[int]) -> np.ndarray:
    batch = StateBatch(logical.num_qubits, inputs)
    for g in logical.gates:
        batch.apply(g)
    return batch.psi


def physical_mismatch(
    logical: QuantumCircuit,
    physical: QuantumCircuit,
    initial: Mapping,
    final: Mapping,
    inputs: list[int],
) -> float:
    """Largest amplitude difference between the routed circuit and the logical one.

    The routed circuit is simulated gate by gate on every physical node it
    touches, with SWAPs expanded into three CX. Logical basis input ``x`` is
    loaded at the initial mapping; the output is read back through the final
    mapping, and free nodes must come back in |0>.
    """
    phys = decompose_swaps(physical)
    nodes = sorted(set(phys.active_qubits()) | set(initial) | set(final))
    pos = {p: i for i, p in enumerate(nodes)}
    k = logical.num_qubits

    def place(x: int, mapping: Mapping) -> int:
        return sum(1 << pos[mapping[l]] for l in range(k) if (x >> l) & 1)

    batch = StateBatch(len(nodes), [place(x, initial) for x in inputs])
    for g in phys.gates:
        batch.apply(g.on(*(pos[q] for q in g.qubits)))
    expected = np.zeros_like(batch.psi)
    target = np.array([place(x, final) for x in range(1 << k)])
    expected[:, target] = logical_outputs(logical, inputs)
    return float(np.abs(batch.psi - expected).max())


def frame_mismatch(
    logical: QuantumCircuit,
    physical: QuantumCircuit,
    initial: Mapping,
    final: Mapping,
    inputs: list[int],
) -> float:
    """Same comparison as :func:`physical_mismatch` with SWAPs applied as relabelling.

    A SWAP is exactly a permutation of two tensor factors, so tracking which
    logical qubit sits on which node lets the state stay on the logical
    qubits. Used where the touched-node count makes full simulation too
    large. Raises AssertionError if a gate acts on a node holding no logical
    qubit, or if the tracked layout disagrees with ``final``.
    """
    where = {p: l for l, p in enumerate(initial)}
    batch = StateBatch(logical.num_qubits, inputs)
    for g in physical.gates:
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            la, lb = where.pop(a, None), where.pop(b, None)
            if la is not None:
                where[b] = la
            if lb is not None:
                where[a] = lb
            continue
        assert all(q in where for q in g.qubits), f"{g!r} touches a node with no logical qubit"
        batch.apply(g.on(*(where[q] for q in g.qubits)))
    assert {l: p for p, l in where.items()} == dict(enumerate(final)), "tracked layout differs from final mapping"
    return float(np.abs(batch.psi - logical_outputs(logical, inputs)).max())


# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter) -> None:
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})")
