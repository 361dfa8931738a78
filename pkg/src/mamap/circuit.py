"""Circuit representation, gate dependencies and the structural rewrites used by the mapper.

Gates are positional: two structurally identical gates at different indices are
different DAG nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class GateKind(str, Enum):
    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    U1 = "u1"
    U2 = "u2"
    U3 = "u3"
    CX = "cx"
    SWAP = "swap"

    @property
    def num_qubits(self) -> int:
        return 2 if self in (GateKind.CX, GateKind.SWAP) else 1

    @property
    def num_params(self) -> int:
        return _NUM_PARAMS.get(self, 0)


_NUM_PARAMS = {
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.U1: 1,
    GateKind.U2: 2,
    GateKind.U3: 3,
}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != kind.num_qubits:
            raise ValueError(f"{kind.value} acts on {kind.num_qubits} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {kind.value}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {kind.value}{self.qubits}")
        if len(self.params) != kind.num_params:
            raise ValueError(f"{kind.value} takes {kind.num_params} parameter(s), got {len(self.params)}")

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def on(self, *qubits: int) -> Gate:
        """Same operation acting on different qubits."""
        # kind and params are already normalized; only the new qubits need checking
        if len(qubits) != len(self.qubits) or len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise ValueError(f"invalid qubits {qubits} for {self.kind.value}")
        g = object.__new__(Gate)
        object.__setattr__(g, "kind", self.kind)
        object.__setattr__(g, "qubits", tuple(qubits))
        object.__setattr__(g, "params", self.params)
        return g

    def __repr__(self) -> str:
        args = f"({', '.join(f'{p:g}' for p in self.params)})" if self.params else ""
        return f"{self.kind.value}{args}{list(self.qubits)}"


_CX_TEMPLATE = Gate(GateKind.CX, (0, 1))
_SWAP_TEMPLATE = Gate(GateKind.SWAP, (0, 1))


def cx(control: int, target: int) -> Gate:
    return _CX_TEMPLATE.on(control, target)


def swap(a: int, b: int) -> Gate:
    return _SWAP_TEMPLATE.on(a, b)


@dataclass(frozen=True)
class QuantumCircuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        for i, g in enumerate(self.gates):
            if max(g.qubits) >= self.num_qubits:
                raise ValueError(f"gate {i} {g!r} exceeds num_qubits={self.num_qubits}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if g.is_two_qubit)

    @property
    def swap_count(self) -> int:
        return sum(1 for g in self.gates if g.kind is GateKind.SWAP)

    def active_qubits(self) -> list[int]:
        """Sorted indices of qubits touched by at least one gate."""
        return sorted({q for g in self.gates for q in g.qubits})

    def relabel(self, new_index: dict[int, int] | Sequence[int], num_qubits: int) -> QuantumCircuit:
        return QuantumCircuit(
            num_qubits, tuple(g.on(*(new_index[q] for q in g.qubits)) for g in self.gates)
        )

    def compact(self) -> tuple[QuantumCircuit, list[int]]:
        """Drop idle qubits.

        Returns the relabelled circuit and ``labels`` where ``labels[i]`` is the
        original index of compact qubit ``i``.
        """
        labels = self.active_qubits()
        index = {q: i for i, q in enumerate(labels)}
        return self.relabel(index, len(labels)), labels


@dataclass(frozen=True)
class DependencyDag:
    """Precedence graph over gate positions.

    ``preds[i]`` holds the distinct gates that must run before gate ``i``
    (the previous gate on each of its qubits). ``nodes`` is the set of live
    node ids; removing front nodes peels the circuit layer by layer.
    """

    nodes: frozenset[int]
    preds: dict[int, frozenset[int]] = field(repr=False)
    succs: dict[int, frozenset[int]] = field(repr=False)

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(p, j) for j in self.nodes for p in self.preds[j] if p in self.nodes}

    def in_degree(self, node: int) -> int:
        return sum(1 for p in self.preds[node] if p in self.nodes)

    def remove(self, nodes: Iterable[int]) -> DependencyDag:
        return DependencyDag(self.nodes - frozenset(nodes), self.preds, self.succs)

    def __len__(self) -> int:
        return len(self.nodes)


def build_dag(circuit: QuantumCircuit) -> DependencyDag:
    last: dict[int, int] = {}
    preds: dict[int, set[int]] = {}
    succs: dict[int, set[int]] = {i: set() for i in range(len(circuit.gates))}
    for i, g in enumerate(circuit.gates):
        preds[i] = set()
        for q in g.qubits:
            if q in last:
                preds[i].add(last[q])
                succs[last[q]].add(i)
            last[q] = i
    return DependencyDag(
        frozenset(range(len(circuit.gates))),
        {i: frozenset(p) for i, p in preds.items()},
        {i: frozenset(s) for i, s in succs.items()},
    )


def front_layer(dag: DependencyDag) -> set[int]:
    return {n for n in dag.nodes if dag.in_degree(n) == 0}


@dataclass(frozen=True)
class LayerPartition:
    layers: tuple[frozenset[int], ...]

    def __len__(self) -> int:
        return len(self.layers)


def layers(circuit: QuantumCircuit) -> LayerPartition:
    """ASAP layering: each gate sits one layer after the latest gate it shares a qubit with."""
    level = [0] * circuit.num_qubits
    buckets: list[set[int]] = []
    for i, g in enumerate(circuit.gates):
        k = max(level[q] for q in g.qubits)
        if k == len(buckets):
            buckets.append(set())
        buckets[k].add(i)
        for q in g.qubits:
            level[q] = k + 1
    return LayerPartition(tuple(frozenset(b) for b in buckets))


def circuit_depth(circuit: QuantumCircuit) -> int:
    """Number of ASAP layers. SWAPs count as one gate; decompose first for CX depth."""
    level = [0] * circuit.num_qubits
    depth = 0
    for g in circuit.gates:
        k = max(level[q] for q in g.qubits) + 1
        for q in g.qubits:
            level[q] = k
        depth = max(depth, k)
    return depth


def decompose_swaps(circuit: QuantumCircuit) -> QuantumCircuit:
    out: list[Gate] = []
    for g in circuit.gates:
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            out += [cx(a, b), cx(b, a), cx(a, b)]
        else:
            out.append(g)
    return QuantumCircuit(circuit.num_qubits, tuple(out))


def reduced_symmetric_circuit(circuit: QuantumCircuit) -> QuantumCircuit:
    """First two-qubit gate of every interacting pair, followed by the same gates reversed.

    Pairs are unordered; the first occurrence keeps its direction. The result
    is a palindrome of self-inverse gates and therefore acts as the identity.
    """
    seen: set[frozenset[int]] = set()
    reduced: list[Gate] = []
    for g in circuit.gates:
        if not g.is_two_qubit:
            continue
        pair = frozenset(g.qubits)
        if pair not in seen:
            seen.add(pair)
            reduced.append(g)
    return QuantumCircuit(circuit.num_qubits, tuple(reduced + reduced[::-1]))
