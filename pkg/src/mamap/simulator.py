"""Noiseless state-vector oracle and Monte-Carlo Pauli-trajectory noise.

Noise channel: after every CX, with probability ``err(control, target) *
error_scale`` one of the 15 non-identity two-qubit Paulis is applied to the
pair, chosen uniformly. Single-qubit gates, idling and readout are noiseless.

Bitstrings list qubit 0 first: ``"10"`` means qubit 0 reads 1, qubit 1 reads 0.
Internally a basis state is an integer with qubit ``i`` on bit ``i``.

Randomness is drawn in fixed blocks of shots, block ``b`` using the stream
seeded by ``(seed, b)``; the blocks are independent of each other, so the
histogram depends only on ``(seed, shots)`` and not on evaluation order.
Shots that draw no error reuse the precomputed ideal output distribution;
only shots with at least one injected Pauli are re-simulated. Circuits made
purely of basis-permuting gates (CX, SWAP, X, Y and diagonal phases) skip
amplitudes entirely: the input is a basis state, Pauli errors keep it one,
and each injected bit flip reaches the output as a precomputed XOR mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .circuit import Gate, GateKind, QuantumCircuit, decompose_swaps
from .hardware import HardwareModel, Mapping

SIM_QUBIT_CAP = 20
DEFAULT_SHOTS = 8192
SHOT_BLOCK = 256
DETERMINISTIC_TOL = 1e-9
# amplitudes held at once when re-simulating erroneous shots
_BATCH_AMPLITUDES = 1 << 21


class SimulationError(ValueError):
    pass


class NonDeterministicOutputError(SimulationError):
    """The noiseless output is not a single basis state, so success is undefined."""


class NoiseMode(str, Enum):
    VARIATION = "variation"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseModel:
    mode: NoiseMode = NoiseMode.VARIATION
    error_scale: float = 1.0
    # rate used in uniform mode; None -> the device's mean CX error
    uniform_error: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", NoiseMode(self.mode))
        if self.error_scale < 0:
            raise ValueError("error_scale must be non-negative")
        if self.uniform_error is not None and not 0.0 <= self.uniform_error < 1.0:
            raise ValueError("uniform_error must lie in [0, 1)")

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls(NoiseMode.UNIFORM, 0.0, 0.0)

    @classmethod
    def uniform(cls, error: float | None = None, scale: float = 1.0) -> NoiseModel:
        return cls(NoiseMode.UNIFORM, scale, error)

    def cx_error(self, hw: HardwareModel | None, control: int, target: int) -> float:
        if self.error_scale == 0:
            return 0.0
        if self.mode is NoiseMode.UNIFORM:
            if self.uniform_error is not None:
                e = self.uniform_error
            elif hw is None:
                raise SimulationError("uniform noise without a rate needs a device to average over")
            else:
                e = hw.calib.mean_error
        else:
            if hw is None:
                raise SimulationError("variation noise needs a device calibration")
            e = hw.calib.error(control, target)
        p = e * self.error_scale
        if not 0.0 <= p < 1.0:
            raise SimulationError(f"effective error {p} for CX({control}, {target}) outside [0, 1)")
        return p


@dataclass(frozen=True)
class PstEstimate:
    successes: int
    shots: int

    @property
    def pst(self) -> float:
        return self.successes / self.shots

    @property
    def stderr(self) -> float:
        p = self.pst
        return math.sqrt(p * (1.0 - p) / self.shots)

    def __str__(self) -> str:
        return f"pst={self.pst:.6f} stderr={self.stderr:.6f} successes={self.successes} shots={self.shots}"


# -- gate matrices ------------------------------------------------------------

_SQ2 = 1 / math.sqrt(2)


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex
    )


def gate_matrix(g: Gate) -> np.ndarray:
    k, p = g.kind, g.params
    if k is GateKind.H:
        return np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
    if k is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if k is GateKind.Y:
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if k is GateKind.RX:
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if k is GateKind.RY:
        c, s = math.cos(p[0] / 2), math.sin(p[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k is GateKind.U2:
        return _u3(math.pi / 2, p[0], p[1])
    if k is GateKind.U3:
        return _u3(*p)
    d = _diagonal(g)
    if d is not None:
        return np.diag(d).astype(complex)
    raise SimulationError(f"{k.value} is not a single-qubit gate")


def _diagonal(g: Gate) -> tuple[complex, complex] | None:
    k = g.kind
    if k is GateKind.Z:
        return (1, -1)
    if k is GateKind.S:
        return (1, 1j)
    if k is GateKind.SDG:
        return (1, -1j)
    if k is GateKind.T:
        return (1, np.exp(1j * math.pi / 4))
    if k is GateKind.TDG:
        return (1, np.exp(-1j * math.pi / 4))
    if k is GateKind.RZ:
        return (np.exp(-0.5j * g.params[0]), np.exp(0.5j * g.params[0]))
    if k is GateKind.U1:
        return (1, np.exp(1j * g.params[0]))
    return None


_BASIS_KINDS = frozenset(
    {GateKind.CX, GateKind.SWAP, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.SDG,
     GateKind.T, GateKind.TDG, GateKind.RZ, GateKind.U1}
)


def permutes_basis(circuit: QuantumCircuit) -> bool:
    """True when every gate maps basis states to basis states (up to phase)."""
    return all(g.kind in _BASIS_KINDS for g in circuit.gates)


# -- batched state vectors ----------------------------------------------------


@lru_cache(maxsize=None)
def _indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


@lru_cache(maxsize=None)
def _flip(n: int, q: int) -> np.ndarray:
    return _indices(n) ^ (1 << q)


@lru_cache(maxsize=None)
def _cx_perm(n: int, c: int, t: int) -> np.ndarray:
    idx = _indices(n)
    return idx ^ (((idx >> c) & 1) << t)


@lru_cache(maxsize=None)
def _bit(n: int, q: int) -> np.ndarray:
    return ((_indices(n) >> q) & 1).astype(bool)


class StateBatch:
    """``B`` state vectors over ``n`` qubits evolved in lock step."""

    def __init__(self, n: int, inputs: Sequence[int] | np.ndarray):
        self.n = n
        inputs = np.asarray(inputs, dtype=np.int64)
        self.psi = np.zeros((len(inputs), 1 << n), dtype=complex)
        self.psi[np.arange(len(inputs)), inputs] = 1.0

    def apply(self, g: Gate) -> None:
        n, q = self.n, g.qubits
        if g.kind is GateKind.CX:
            self.psi = self.psi[:, _cx_perm(n, q[0], q[1])]
        elif g.kind is GateKind.SWAP:
            a, b = q
            for c, t in ((a, b), (b, a), (a, b)):
                self.psi = self.psi[:, _cx_perm(n, c, t)]
        elif (d := _diagonal(g)) is not None:
            self.psi *= np.where(_bit(n, q[0]), d[1], d[0])
        else:
            u = gate_matrix(g)
            view = self.psi.reshape(len(self.psi), 1 << (n - q[0] - 1), 2, 1 << q[0])
            a0, a1 = view[:, :, 0, :].copy(), view[:, :, 1, :].copy()
            view[:, :, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
            view[:, :, 1, :] = u[1, 0] * a0 + u[1, 1] * a1

    def pauli(self, q: int, which: int, rows: np.ndarray) -> None:
        """Apply X (1), Y (2) or Z (3) on qubit ``q`` of the selected rows."""
        sub = self.psi[rows]
        if which in (2, 3):
            sub *= np.where(_bit(self.n, q), -1.0, 1.0)
        if which in (1, 2):
            sub = sub[:, _flip(self.n, q)]
        if which == 2:
            sub *= 1j
        self.psi[rows] = sub

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF measurement of every row with uniforms ``u``."""
        cdf = np.cumsum(np.abs(self.psi) ** 2, axis=1)
        out = (cdf < u[:, None] * cdf[:, -1:]).sum(axis=1)
        return np.minimum(out, (1 << self.n) - 1)


def _basis_index(state: int | str, n: int) -> int:
    if isinstance(state, str):
        if len(state) != n or set(state) - {"0", "1"}:
            raise ValueError(f"basis state {state!r} is not a {n}-bit string")
        return sum(1 << i for i, ch in enumerate(state) if ch == "1")
    if not 0 <= state < (1 << n):
        raise ValueError(f"basis index {state} out of range for {n} qubits")
    return int(state)


def index_to_bitstring(index: int, n: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n))


def ideal_output(circuit: QuantumCircuit, input_state: int | str = 0, cap: int = SIM_QUBIT_CAP) -> np.ndarray:
    """Exact output amplitudes (index bit ``i`` = qubit ``i``) for a basis-state input."""
    if circuit.num_qubits > cap:
        raise SimulationError(f"{circuit.num_qubits} qubits exceed the simulator cap of {cap}")
    batch = StateBatch(circuit.num_qubits, [_basis_index(input_state, circuit.num_qubits)])
    for g in circuit.gates:
        batch.apply(g)
    return batch.psi[0]


def simulate_trajectory(
    circuit: QuantumCircuit,
    injections: dict[int, int],
    input_state: int | str = 0,
) -> np.ndarray:
    """One noisy trajectory with explicit errors: ``injections[k]`` is the Pauli code (1..15)
    applied after the k-th CX (code = 4 * control_pauli + target_pauli; 0=I, 1=X, 2=Y, 3=Z)."""
    circ = decompose_swaps(circuit)
    batch = StateBatch(circ.num_qubits, [_basis_index(input_state, circ.num_qubits)])
    rows = np.array([0])
    k = 0
    for g in circ.gates:
        batch.apply(g)
        if g.kind is GateKind.CX:
            code = injections.get(k, 0)
            for q, which in ((g.qubits[0], code >> 2), (g.qubits[1], code & 3)):
                if which:
                    batch.pauli(q, which, rows)
            k += 1
    return batch.psi[0]


# -- Monte-Carlo trajectories -------------------------------------------------


class _Op(NamedTuple):
    """Gate-like record used after relabelling; duck-types ``Gate`` for ``StateBatch.apply``."""

    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...]


class _Trajectories:
    """A circuit compiled for repeated noisy sampling on its active qubits.

    ``engine`` is ``"auto"`` (flip propagation when the circuit permutes basis
    states, state vectors otherwise) or ``"statevector"`` to force amplitude
    simulation.
    """

    def __init__(
        self,
        circuit: QuantumCircuit,
        hw: HardwareModel | None,
        noise: NoiseModel,
        cap: int,
        engine: str = "auto",
    ):
        if engine not in ("auto", "statevector"):
            raise ValueError(f"unknown engine {engine!r}")
        self.num_qubits = circuit.num_qubits
        self.active = circuit.active_qubits()
        if len(self.active) > cap:
            raise SimulationError(f"{len(self.active)} active qubits exceed the simulator cap of {cap}")
        index = {q: i for i, q in enumerate(self.active)}
        self.n = len(self.active)
        # relabelled onto active qubits with SWAPs expanded; physical CX pairs kept for error lookup
        self.gates: list[_Op] = []
        physical_cx: list[tuple[int, int]] = []
        for g in circuit.gates:
            if g.kind is GateKind.SWAP:
                a, b = g.qubits
                for c, t in ((a, b), (b, a), (a, b)):
                    self.gates.append(_Op(GateKind.CX, (index[c], index[t]), ()))
                    physical_cx.append((c, t))
            else:
                self.gates.append(_Op(g.kind, tuple(index[q] for q in g.qubits), g.params))
                if g.kind is GateKind.CX:
                    physical_cx.append(g.qubits)
        errors = {pair: noise.cx_error(hw, *pair) for pair in set(physical_cx)}
        self.p = np.array([errors[pair] for pair in physical_cx], dtype=float)
        self.basis = engine == "auto" and permutes_basis(circuit)
        if self.basis:
            self._compile_flips()
            self.max_prob = 1.0
        else:
            batch = StateBatch(self.n, [0])
            for op in self.gates:
                batch.apply(op)
            probs = np.abs(batch.psi[0]) ** 2
            self.ideal_cdf = np.cumsum(probs)
            self.ideal_index = int(np.argmax(probs))
            self.max_prob = float(probs[self.ideal_index])

    def _compile_flips(self) -> None:
        """Noiseless output plus, for every CX, the output bits flipped by a bit flip on its control or target.

        CX and X act affinely on basis labels, so a flip inserted anywhere
        reaches the output as a fixed mask regardless of the rest of the state.
        Phases (Z components, diagonal gates) never change a basis label.
        """
        state = 0
        for g in self.gates:
            if g.kind is GateKind.CX:
                c, t = g.qubits
                state ^= ((state >> c) & 1) << t
            elif g.kind in (GateKind.X, GateKind.Y):
                state ^= 1 << g.qubits[0]
        self.ideal_index = state
        reach = [1 << q for q in range(self.n)]
        ncx = len(self.p)
        self.control_mask = np.zeros(ncx, dtype=np.int64)
        self.target_mask = np.zeros(ncx, dtype=np.int64)
        k = ncx
        for g in reversed(self.gates):
            if g.kind is GateKind.CX:
                k -= 1
                c, t = g.qubits
                self.control_mask[k] = reach[c]
                self.target_mask[k] = reach[t]
                reach[c] ^= reach[t]

    def _events(self, rows: np.ndarray, cols: np.ndarray, paulis: np.ndarray) -> dict[int, tuple]:
        """Group injections by CX ordinal: {k: (rows, control_paulis, target_paulis)}."""
        out: dict[int, tuple] = {}
        order = np.argsort(cols, kind="stable")
        rows, cols, paulis = rows[order], cols[order], paulis[order]
        bounds = np.flatnonzero(np.diff(cols)) + 1
        for r, c, pa in zip(np.split(rows, bounds), np.split(cols, bounds), np.split(paulis, bounds)):
            if len(c):
                out[int(c[0])] = (r, pa >> 2, pa & 3)
        return out

    def _run_statevector(self, count: int, events: dict, u: np.ndarray) -> np.ndarray:
        batch = StateBatch(self.n, np.zeros(count, dtype=np.int64))
        k = 0
        for g in self.gates:
            batch.apply(g)
            if g.kind is GateKind.CX:
                ev = events.get(k)
                if ev is not None:
                    rows, pc, pt = ev
                    for q, codes in ((g.qubits[0], pc), (g.qubits[1], pt)):
                        for which in (1, 2, 3):
                            sel = rows[codes == which]
                            if len(sel):
                                batch.pauli(q, which, sel)
                k += 1
        return batch.sample(u)

    def _draw_errors(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """(shot, CX ordinal) cells that suffer an error, in row-major order.

        Cells are scanned as a Bernoulli process at the largest rate using
        geometric gaps, and each candidate is kept with probability
        ``p / p_max``; this thinning gives every cell an independent error
        with its own probability while touching only ~``p_max`` of the cells.
        """
        ncx = len(self.p)
        p_max = float(self.p.max()) if ncx else 0.0
        if p_max == 0.0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        cells = size * ncx
        expected = cells * p_max
        parts, last = [], -1
        while last < cells:
            gaps = rng.geometric(p_max, size=int(expected + 6 * math.sqrt(expected)) + 16)
            pos = last + np.cumsum(gaps)
            parts.append(pos)
            last = int(pos[-1])
        pos = np.concatenate(parts)
        pos = pos[pos < cells]
        rows, cols = np.divmod(pos, ncx)
        keep = rng.random(len(pos)) < self.p[cols] / p_max
        return rows[keep], cols[keep]

    def sample(self, shots: int, seed: int) -> np.ndarray:
        if shots <= 0:
            raise SimulationError("shots must be positive")
        if seed < 0:
            raise ValueError("seed must be non-negative")
        out = np.empty(shots, dtype=np.int64)
        for block, start in enumerate(range(0, shots, SHOT_BLOCK)):
            size = min(SHOT_BLOCK, shots - start)
            rng = np.random.default_rng([seed, block])
            rows, cols = self._draw_errors(rng, size)
            paulis = rng.integers(1, 16, size=rows.size)
            u = rng.random(size)
            res = out[start:start + size]
            if self.basis:
                res[:] = self.ideal_index
                if rows.size:
                    pc, pt = paulis >> 2, paulis & 3
                    flips = np.where((pc == 1) | (pc == 2), self.control_mask[cols], 0)
                    flips ^= np.where((pt == 1) | (pt == 2), self.target_mask[cols], 0)
                    np.bitwise_xor.at(res, rows, flips)
                continue
            res[:] = np.minimum(np.searchsorted(self.ideal_cdf, u * self.ideal_cdf[-1]), (1 << self.n) - 1)
            if rows.size == 0:
                continue
            noisy, local = np.unique(rows, return_inverse=True)
            per_batch = max(1, _BATCH_AMPLITUDES >> self.n)
            for lo in range(0, len(noisy), per_batch):
                hi = min(lo + per_batch, len(noisy))
                mask = (local >= lo) & (local < hi)
                events = self._events(local[mask] - lo, cols[mask], paulis[mask])
                res[noisy[lo:hi]] = self._run_statevector(hi - lo, events, u[noisy[lo:hi]])
        return out

    def to_bitstring(self, outcome: int) -> str:
        bits = ["0"] * self.num_qubits
        for i, q in enumerate(self.active):
            if (outcome >> i) & 1:
                bits[q] = "1"
        return "".join(bits)


def run_noisy(
    circuit: QuantumCircuit,
    hw: HardwareModel | None,
    noise: NoiseModel,
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    cap: int = SIM_QUBIT_CAP,
    engine: str = "auto",
) -> dict[str, int]:
    """Histogram of measured bitstrings over all qubits of ``circuit`` for input |0...0>."""
    traj = _Trajectories(circuit, hw, noise, cap, engine)
    values, counts = np.unique(traj.sample(shots, seed), return_counts=True)
    return {traj.to_bitstring(int(v)): int(c) for v, c in zip(values, counts)}


def deterministic_output(circuit: QuantumCircuit, cap: int = SIM_QUBIT_CAP) -> str:
    """The single bitstring the circuit produces from |0...0>, or NonDeterministicOutputError."""
    traj = _Trajectories(circuit, None, NoiseModel.noiseless(), cap)
    if traj.max_prob < 1.0 - DETERMINISTIC_TOL:
        raise NonDeterministicOutputError(
            f"noiseless output is not a basis state (largest probability {traj.max_prob:.6f})"
        )
    return traj.to_bitstring(traj.ideal_index)


def estimate_pst(
    circuit: QuantumCircuit,
    ideal_bitstring: str | None = None,
    hw: HardwareModel | None = None,
    noise: NoiseModel = NoiseModel(),
    shots: int = DEFAULT_SHOTS,
    seed: int = 0,
    final_mapping: Mapping | None = None,
    cap: int = SIM_QUBIT_CAP,
    engine: str = "auto",
) -> PstEstimate:
    """Fraction of noisy shots reproducing the ideal output.

    With ``final_mapping`` the comparison is made on logical qubits: logical
    ``l`` is read from physical ``final_mapping[l]`` and ``ideal_bitstring``
    has one character per logical qubit; other physical qubits are ignored.
    Without it, all qubits of ``circuit`` are compared. When
    ``ideal_bitstring`` is omitted the circuit's own noiseless output is used.
    """
    traj = _Trajectories(circuit, hw, noise, cap, engine)
    if traj.max_prob < 1.0 - DETERMINISTIC_TOL:
        raise NonDeterministicOutputError(
            f"noiseless output is not a basis state (largest probability {traj.max_prob:.6f})"
        )
    positions = list(final_mapping) if final_mapping is not None else list(range(circuit.num_qubits))
    if ideal_bitstring is None:
        full = traj.to_bitstring(traj.ideal_index)
        ideal_bitstring = "".join(full[p] for p in positions)
    if len(ideal_bitstring) != len(positions) or set(ideal_bitstring) - {"0", "1"}:
        raise ValueError(f"ideal bitstring must be {len(positions)} characters of 0/1")

    index = {q: i for i, q in enumerate(traj.active)}
    mask = target = 0
    reachable = True
    for p, bit in zip(positions, ideal_bitstring):
        if p in index:
            mask |= 1 << index[p]
            target |= int(bit) << index[p]
        elif bit == "1":
            reachable = False  # untouched qubits always read 0
    outcomes = traj.sample(shots, seed)
    successes = int(np.count_nonzero((outcomes & mask) == target)) if reachable else 0
    return PstEstimate(successes, shots)
