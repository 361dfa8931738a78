"""Device description: coupling graph, directional CX calibration and hop distances."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import networkx as nx
import numpy as np

from .circuit import Gate, QuantumCircuit


class HardwareError(ValueError):
    pass


DEVICE_SCHEMA = {
    "type": "object",
    "required": ["name", "num_qubits", "edges", "cx_error"],
    "properties": {
        "name": {"type": "string"},
        "num_qubits": {"type": "integer", "minimum": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "integer", "minimum": 0},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "cx_error": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["control", "target", "error"],
                "properties": {
                    "control": {"type": "integer", "minimum": 0},
                    "target": {"type": "integer", "minimum": 0},
                    "error": {"type": "number"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class Mapping:
    """Injective logical -> physical assignment; ``assignment[l]`` is the node of logical ``l``."""

    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", tuple(int(p) for p in self.assignment))
        if len(set(self.assignment)) != len(self.assignment):
            raise ValueError(f"mapping is not injective: {self.assignment}")
        if any(p < 0 for p in self.assignment):
            raise ValueError("physical indices must be non-negative")

    @classmethod
    def identity(cls, n: int) -> Mapping:
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.assignment)

    def __getitem__(self, logical: int) -> int:
        return self.assignment[logical]

    def __iter__(self):
        return iter(self.assignment)

    def inverse(self, num_physical: int) -> list[int]:
        """Physical -> logical list with -1 on free nodes."""
        p2l = [-1] * num_physical
        for l, p in enumerate(self.assignment):
            p2l[p] = l
        return p2l

    def image(self) -> frozenset[int]:
        return frozenset(self.assignment)


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class CouplingGraph:
    num_nodes: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise HardwareError(f"self-loop on node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise HardwareError(f"edge ({u}, {v}) outside 0..{self.num_nodes - 1}")
            norm.add(_edge(u, v))
        object.__setattr__(self, "edges", frozenset(norm))
        if not nx.is_connected(self.to_networkx()):
            raise HardwareError("coupling graph is not connected")

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.num_nodes))
        g.add_edges_from(self.edges)
        return g

    def has_edge(self, u: int, v: int) -> bool:
        return _edge(u, v) in self.edges


@dataclass(frozen=True, eq=False)
class CalibrationData:
    cx_error: dict[tuple[int, int], float]

    @property
    def e_max(self) -> float:
        return max(self.cx_error.values(), default=0.0)

    @property
    def mean_error(self) -> float:
        return float(np.mean(list(self.cx_error.values()))) if self.cx_error else 0.0

    def error(self, control: int, target: int) -> float:
        try:
            return self.cx_error[(control, target)]
        except KeyError:
            raise HardwareError(f"no calibration for CX({control}, {target})") from None


@dataclass(frozen=True, eq=False)
class HardwareModel:
    name: str
    graph: CouplingGraph
    calib: CalibrationData
    dist: np.ndarray = field(repr=False)
    diameter: int
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)
    # plain nested lists for the router's inner loops
    dist_rows: list[list[int]] = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @classmethod
    def build(
        cls,
        num_nodes: int,
        edges: Iterable[Sequence[int]],
        cx_error: dict[tuple[int, int], float] | None = None,
        name: str = "device",
    ) -> HardwareModel:
        """Validate and assemble a device. Missing calibration defaults to zero error."""
        graph = CouplingGraph(num_nodes, frozenset(tuple(e) for e in edges))
        errors = dict(cx_error or {})
        if cx_error is None:
            errors = {d: 0.0 for u, v in graph.edges for d in ((u, v), (v, u))}
        for (c, t), e in list(errors.items()):
            if not graph.has_edge(c, t):
                raise HardwareError(f"calibration given for CX({c}, {t}) which is not a coupling edge")
            if not (0.0 <= e < 1.0) or math.isnan(e):
                raise HardwareError(f"error rate {e} for CX({c}, {t}) outside [0, 1)")
        for u, v in sorted(graph.edges):
            fwd, back = (u, v) in errors, (v, u) in errors
            if fwd and not back:
                warnings.warn(f"{name}: CX({v}, {u}) uncalibrated, copying CX({u}, {v})", stacklevel=2)
                errors[(v, u)] = errors[(u, v)]
            elif back and not fwd:
                warnings.warn(f"{name}: CX({u}, {v}) uncalibrated, copying CX({v}, {u})", stacklevel=2)
                errors[(u, v)] = errors[(v, u)]
            elif not fwd:
                raise HardwareError(f"edge ({u}, {v}) has no calibration in either direction")

        dist = np.zeros((num_nodes, num_nodes), dtype=np.int64)
        for src, lengths in nx.all_pairs_shortest_path_length(graph.to_networkx()):
            for dst, d in lengths.items():
                dist[src, dst] = d
        adjacency = [[] for _ in range(num_nodes)]
        for u, v in sorted(graph.edges):
            adjacency[u].append(v)
            adjacency[v].append(u)
        return cls(
            name=name,
            graph=graph,
            calib=CalibrationData(errors),
            dist=dist,
            diameter=int(dist.max()) if num_nodes else 0,
            adjacency=tuple(tuple(sorted(a)) for a in adjacency),
            dist_rows=dist.tolist(),
        )

    def with_calibration(self, cx_error: dict[tuple[int, int], float], name: str | None = None) -> HardwareModel:
        return HardwareModel.build(self.num_nodes, self.graph.edges, cx_error, name or self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "num_qubits": self.num_nodes,
            "edges": [list(e) for e in sorted(self.graph.edges)],
            "cx_error": [
                {"control": c, "target": t, "error": e} for (c, t), e in sorted(self.calib.cx_error.items())
            ],
        }


def _from_json(data: object, origin: str) -> HardwareModel:
    try:
        jsonschema.validate(data, DEVICE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise HardwareError(f"{origin}: schema violation: {exc.message}") from None
    errors: dict[tuple[int, int], float] = {}
    for entry in data["cx_error"]:
        key = (entry["control"], entry["target"])
        if key in errors:
            raise HardwareError(f"{origin}: duplicate calibration for CX{key}")
        errors[key] = float(entry["error"])
    edges = [tuple(e) for e in data["edges"]]
    if len({_edge(*e) for e in edges if e[0] != e[1]}) != len(edges):
        raise HardwareError(f"{origin}: duplicate edge or self-loop in edge list")
    return HardwareModel.build(data["num_qubits"], edges, errors, data["name"])


def load_hardware(path: str | Path) -> HardwareModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HardwareError(f"cannot read device file {path}: {exc}") from exc
    return _from_json(data, str(path))


def shipped_devices() -> list[str]:
    root = resources.files("mamap") / "data" / "devices"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_device(name_or_path: str | Path) -> HardwareModel:
    """Load a device JSON file, or one of the shipped devices by name (``belem``, ``guadalupe``, ``tokyo``)."""
    path = Path(name_or_path)
    if path.exists():
        return load_hardware(path)
    res = resources.files("mamap") / "data" / "devices" / f"{name_or_path}.json"
    if not res.is_file():
        raise HardwareError(f"unknown device {name_or_path!r}; shipped: {', '.join(shipped_devices())}")
    with resources.as_file(res) as p:
        return load_hardware(p)


def synthetic_calibration(
    edges: Iterable[tuple[int, int]],
    seed: int,
    median: float = 0.01,
    sigma: float = 0.45,
    asymmetry: float = 0.15,
    bounds: tuple[float, float] = (0.003, 0.05),
) -> dict[tuple[int, int], float]:
    """Log-normal per-edge CX errors with a small random direction asymmetry."""
    rng = np.random.default_rng(seed)
    out = {}
    for u, v in sorted(_edge(*e) for e in edges):
        base = median * math.exp(sigma * rng.standard_normal())
        skew = 1.0 + asymmetry * rng.uniform(-1.0, 1.0)
        out[(u, v)] = round(float(np.clip(base * skew, *bounds)), 6)
        out[(v, u)] = round(float(np.clip(base / skew, *bounds)), 6)
    return out


def two_level_calibration(
    edges: Iterable[tuple[int, int]], low: float, ratio: float, seed: int
) -> dict[tuple[int, int], float]:
    """Half of the edges (chosen at random) get ``ratio`` times the error of the others."""
    ordered = sorted(_edge(*e) for e in edges)
    rng = np.random.default_rng(seed)
    bad = set(rng.permutation(len(ordered))[: len(ordered) // 2].tolist())
    out = {}
    for i, (u, v) in enumerate(ordered):
        e = low * ratio if i in bad else low
        out[(u, v)] = out[(v, u)] = e
    return out


def physical_distance(gate: Gate, mapping: Mapping, hw: HardwareModel) -> int:
    if not gate.is_two_qubit:
        raise ValueError(f"physical distance is defined for two-qubit gates, got {gate!r}")
    a, b = gate.qubits
    return int(hw.dist[mapping[a], mapping[b]])


def swap_fidelity(edge: tuple[int, int], calib: CalibrationData) -> float:
    """Success probability of SWAP(i, j) = CX(i,j) CX(j,i) CX(i,j)."""
    i, j = edge
    if (i, j) not in calib.cx_error or (j, i) not in calib.cx_error:
        raise HardwareError(f"({i}, {j}) is not a calibrated coupling edge")
    e_ij, e_ji = calib.cx_error[(i, j)], calib.cx_error[(j, i)]
    return (1.0 - e_ij) ** 2 * (1.0 - e_ji)


def worst_case_depth_bound(num_two_qubit_gates: int, hw: HardwareModel) -> int:
    return num_two_qubit_gates * (3 * hw.diameter - 2)


def compliance_violations(circuit: QuantumCircuit, hw: HardwareModel) -> list[int]:
    """Indices of gates that leave the device or use a two-qubit link that does not exist."""
    bad = []
    for i, g in enumerate(circuit.gates):
        if max(g.qubits) >= hw.num_nodes or (g.is_two_qubit and not hw.graph.has_edge(*g.qubits)):
            bad.append(i)
    return bad


def is_compliant(circuit: QuantumCircuit, hw: HardwareModel) -> bool:
    return not compliance_violations(circuit, hw)
