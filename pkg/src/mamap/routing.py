"""Multi-agent cooperative SWAP routing.

Every agent routes the whole circuit on its own: it executes whatever the
current mapping allows, then inserts one SWAP chosen greedily by front-layer
distance reduction (ties broken by a fidelity-weighted roulette), and repeats.
Agents are ranked by an estimated fidelity, dealt into groups, and in each
group the worst agent may be replaced by a copy of the best one. Routing stops
once more than ``n`` agents have finished.

Agents keep their emitted physical circuit as an immutable linked list, so
copying an agent costs O(qubits) regardless of how much it has routed.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Gate, QuantumCircuit, circuit_depth, decompose_swaps, swap
from .hardware import CalibrationData, HardwareModel, Mapping, swap_fidelity

Edge = tuple[int, int]


class RoutingDefectError(RuntimeError):
    """The router failed to make progress; indicates a bug or an invalid device."""


@dataclass(frozen=True)
class RoutingConfig:
    m: int = 20
    n: int = 5
    C: float = 1.0
    variation_aware: bool = True
    seed: int = 0
    # stop when finished agents > n (True) or >= n (False)
    strict_termination: bool = True

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be at least 1")
        if self.C < 0:
            raise ValueError("C must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def num_agents(self) -> int:
        return self.m * self.n


def best_orientation(edge: Edge, calib: CalibrationData) -> tuple[Edge, float]:
    """Direction (i, j) of SWAP(edge) whose CX(i,j) CX(j,i) CX(i,j) expansion has the higher fidelity.

    Ties keep the canonical (min, max) direction.
    """
    u, v = min(edge), max(edge)
    fwd, back = swap_fidelity((u, v), calib), swap_fidelity((v, u), calib)
    return ((v, u), back) if back > fwd else ((u, v), fwd)


class RoutingContext:
    """Lookup tables shared by all agents routing one circuit on one device.

    In variation-agnostic mode every CX is assumed to fail at the same rate
    (``uniform_error``, defaulting to the device mean).
    """

    def __init__(
        self,
        circuit: QuantumCircuit,
        hw: HardwareModel,
        variation_aware: bool = True,
        uniform_error: float | None = None,
    ):
        if circuit.num_qubits > hw.num_nodes:
            raise ValueError(f"{circuit.num_qubits} logical qubits do not fit on {hw.num_nodes} nodes")
        self.circuit = circuit
        self.hw = hw
        self.variation_aware = variation_aware
        self.gates = circuit.gates
        self.qubits = [g.qubits for g in circuit.gates]
        self.seq: list[list[int]] = [[] for _ in range(circuit.num_qubits)]
        for i, q in enumerate(self.qubits):
            for x in q:
                self.seq[x].append(i)
        self.g_ori = circuit.two_qubit_count
        self.span = 3 * hw.diameter - 2
        self.dist = hw.dist_rows
        self.adj = hw.adjacency
        self.stall_cap = hw.num_nodes ** 2

        nodes = hw.num_nodes
        if variation_aware:
            errors = dict(hw.calib.cx_error)
        else:
            rate = hw.calib.mean_error if uniform_error is None else uniform_error
            errors = {k: rate for k in hw.calib.cx_error}
        self.calib = CalibrationData(errors)
        self.log1m = [[0.0] * nodes for _ in range(nodes)]
        for (c, t), e in errors.items():
            self.log1m[c][t] = math.log1p(-e)
        self.log1m_emax = math.log1p(-self.calib.e_max)
        self.depth_scale = 1.0 / (self.g_ori * self.span) if self.g_ori and self.span > 0 else 0.0

        # per canonical edge: (emitted direction, roulette weight, log fidelity)
        self.swap_info: dict[Edge, tuple[Edge, float, float]] = {}
        for u, v in hw.graph.edges:
            if variation_aware:
                (i, j), fid = best_orientation((u, v), self.calib)
            else:
                (i, j), fid = (u, v), 1.0
            self.swap_info[(u, v)] = ((i, j), fid, 2 * self.log1m[i][j] + self.log1m[j][i])


@dataclass(frozen=True)
class FitnessValue:
    """Agent fitness kept as its natural log; ``value`` may underflow to 0.0 for long circuits."""

    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)

    @classmethod
    def from_terms(
        cls,
        depth: int,
        cx_errors: Sequence[float],
        g_ori: int,
        diameter: int,
        e_max: float,
        remaining_two_qubit: int,
    ) -> FitnessValue:
        """Depth decay times CX success product times worst-case bound on the unrouted part."""
        span = 3 * diameter - 2
        decay = depth / (g_ori * span) if g_ori and span > 0 else 0.0
        log_prod = sum(math.log1p(-e) for e in cx_errors)
        return cls(-decay + log_prod + remaining_two_qubit * span * math.log1p(-e_max))


class Agent:
    """Mutable routing state of one agent: mapping, residual circuit and emitted physical circuit."""

    __slots__ = (
        "ctx", "agent_id", "rng", "initial", "l2p", "p2l", "pos", "front", "pcir", "node_depth",
        "depth", "log_prod", "remaining_2q", "left", "swaps", "stall", "finished",
    )

    def __init__(self, ctx: RoutingContext, mapping: Mapping, rng: random.Random, agent_id: int = 0):
        nq, nodes = ctx.circuit.num_qubits, ctx.hw.num_nodes
        if len(mapping) != nq:
            raise ValueError(f"mapping covers {len(mapping)} qubits, circuit has {nq}")
        if any(p >= nodes for p in mapping):
            raise ValueError(f"mapping {mapping.assignment} leaves the {nodes}-node device")
        self.ctx = ctx
        self.agent_id = agent_id
        self.rng = rng
        self.initial = mapping
        self.l2p = list(mapping)
        self.p2l = mapping.inverse(nodes)
        self.pos = [0] * nq
        self.front: set[int] = set()
        self.pcir: tuple | None = None
        self.node_depth = [0] * nodes
        self.depth = 0
        self.log_prod = 0.0
        self.remaining_2q = ctx.g_ori
        self.left = len(ctx.gates)
        self.swaps = 0
        self.stall = 0
        self.finished = False
        self._drain(list(range(nq)))

    # -- state views ---------------------------------------------------------

    @property
    def mapping(self) -> Mapping:
        return Mapping(tuple(self.l2p))

    def physical_circuit(self) -> QuantumCircuit:
        entries = []
        node = self.pcir
        while node is not None:
            entries.append(node[:3])
            node = node[3]
        gates: list[Gate] = []
        for gi, p0, p1 in reversed(entries):
            if gi < 0:
                gates.append(swap(p0, p1))
            elif p1 < 0:
                gates.append(self.ctx.gates[gi].on(p0))
            else:
                gates.append(self.ctx.gates[gi].on(p0, p1))
        return QuantumCircuit(self.ctx.hw.num_nodes, tuple(gates))

    def executed_gates(self) -> list[int]:
        """Original gate indices in the order they were emitted."""
        out = []
        node = self.pcir
        while node is not None:
            if node[0] >= 0:
                out.append(node[0])
            node = node[3]
        return out[::-1]

    def front_gates(self) -> list[int]:
        """Blocked two-qubit gates with no unexecuted predecessor, sorted."""
        return sorted(self.front)

    @property
    def fitness(self) -> FitnessValue:
        ctx = self.ctx
        return FitnessValue(
            -self.depth * ctx.depth_scale + self.log_prod + self.remaining_2q * ctx.span * ctx.log1m_emax
        )

    def adopt(self, other: Agent) -> None:
        """Become an independent copy of ``other`` while keeping this agent's id and random stream."""
        self.initial = other.initial
        self.l2p = other.l2p[:]
        self.p2l = other.p2l[:]
        self.pos = other.pos[:]
        self.front = set(other.front)
        self.pcir = other.pcir
        self.node_depth = other.node_depth[:]
        for name in ("depth", "log_prod", "remaining_2q", "left", "swaps", "stall", "finished"):
            setattr(self, name, getattr(other, name))

    # -- execution -----------------------------------------------------------

    def _drain(self, stack: list[int]) -> None:
        """Emit every gate that has become executable, following qubits whose head gate may have changed."""
        ctx = self.ctx
        seq, qubits, dist, log1m = ctx.seq, ctx.qubits, ctx.dist, ctx.log1m
        pos, l2p, nd, front = self.pos, self.l2p, self.node_depth, self.front
        while stack:
            q = stack.pop()
            s = seq[q]
            while pos[q] < len(s):
                gi = s[pos[q]]
                qs = qubits[gi]
                if len(qs) == 1:
                    p = l2p[q]
                    d = nd[p] + 1
                    nd[p] = d
                    if d > self.depth:
                        self.depth = d
                    self.pcir = (gi, p, -1, self.pcir)
                    pos[q] += 1
                    self.left -= 1
                    continue
                a, b = qs
                other = b if q == a else a
                if seq[other][pos[other]] != gi:
                    break
                pa, pb = l2p[a], l2p[b]
                if dist[pa][pb] != 1:
                    front.add(gi)
                    break
                front.discard(gi)
                d = max(nd[pa], nd[pb]) + 1
                nd[pa] = nd[pb] = d
                if d > self.depth:
                    self.depth = d
                self.log_prod += log1m[pa][pb]
                self.pcir = (gi, pa, pb, self.pcir)
                pos[a] += 1
                pos[b] += 1
                self.left -= 1
                self.remaining_2q -= 1
                self.stall = 0
                stack.append(other)
        self.finished = self.left == 0

    def swap_effects(self) -> list[tuple[Edge, int]]:
        """Candidate SWAPs (sorted canonical edges) with their rewards.

        Only edges touching a node that hosts a front-gate qubit can change a
        front distance; an edge qualifies if it shortens at least one gate.
        """
        dist, l2p, qubits = self.ctx.dist, self.l2p, self.ctx.qubits
        at: dict[int, list[tuple[int, int]]] = {}
        for gi in self.front:
            a, b = qubits[gi]
            pair = (l2p[a], l2p[b])
            at.setdefault(pair[0], []).append(pair)
            at.setdefault(pair[1], []).append(pair)
        edges = set()
        for x in at:
            for y in self.ctx.adj[x]:
                edges.add((x, y) if x < y else (y, x))
        out = []
        for x, y in sorted(edges):
            total, improves = 0, False
            # a front gate never sits on both x and y (it would be executable)
            for pa, pb in at.get(x, []) + at.get(y, []):
                na = y if pa == x else x if pa == y else pa
                nb = y if pb == x else x if pb == y else pb
                delta = dist[pa][pb] - dist[na][nb]
                total += delta
                if delta > 0:
                    improves = True
            if improves:
                out.append(((x, y), total))
        return out

    def apply_swap(self, edge: Edge) -> None:
        """Insert SWAP(edge), update the mapping, then execute whatever became executable."""
        ctx = self.ctx
        u, v = min(edge), max(edge)
        (i, j), _, log_fid = ctx.swap_info[(u, v)]
        lu, lv = self.p2l[u], self.p2l[v]
        self.p2l[u], self.p2l[v] = lv, lu
        if lu >= 0:
            self.l2p[lu] = v
        if lv >= 0:
            self.l2p[lv] = u
        nd = self.node_depth
        d = max(nd[u], nd[v]) + 3
        nd[u] = nd[v] = d
        if d > self.depth:
            self.depth = d
        self.log_prod += log_fid
        self.pcir = (-1, i, j, self.pcir)
        self.swaps += 1
        self.stall += 1
        if self.stall > ctx.stall_cap:
            raise RoutingDefectError(
                f"agent {self.agent_id}: {self.stall} SWAPs without executing a gate on {ctx.hw.name}"
            )
        self._drain([q for q in (lu, lv) if q >= 0])


# -- decision making ----------------------------------------------------------


def candidate_swaps(agent: Agent) -> list[Edge]:
    return [e for e, _ in agent.swap_effects()]


def reward(edge: Edge, agent: Agent) -> int:
    """Total front-layer distance reduction achieved by SWAP(edge)."""
    x, y = edge
    dist, l2p = agent.ctx.dist, agent.l2p
    total = 0
    for gi in agent.front:
        a, b = agent.ctx.qubits[gi]
        pa, pb = l2p[a], l2p[b]
        na = y if pa == x else x if pa == y else pa
        nb = y if pb == x else x if pb == y else pb
        total += dist[pa][pb] - dist[na][nb]
    return total


def _roulette(weights: Sequence[float], rng: random.Random) -> int:
    total = sum(weights)
    if total <= 0:
        return rng.randrange(len(weights))
    x = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if x < acc:
            return i
    return len(weights) - 1


def select_swap(
    candidates: Sequence[Edge],
    rewards: Sequence[int],
    hw: HardwareModel,
    variation_aware: bool,
    rng: random.Random,
) -> Edge:
    """Highest-reward candidate; ties resolved by a roulette wheel weighted by SWAP fidelity
    (uniform weights when variation-agnostic)."""
    if not candidates:
        raise ValueError("no candidate SWAPs")
    best = max(rewards)
    tied = [e for e, r in zip(candidates, rewards) if r == best]
    if len(tied) == 1:
        return tied[0]
    weights = [best_orientation(e, hw.calib)[1] if variation_aware else 1.0 for e in tied]
    return tied[_roulette(weights, rng)]


def step_agent(agent: Agent) -> Edge:
    """One decision: pick and insert a SWAP. Returns the chosen edge."""
    if agent.finished:
        raise ValueError(f"agent {agent.agent_id} has already finished")
    effects = agent.swap_effects()
    if not effects:
        raise RoutingDefectError(f"agent {agent.agent_id}: no SWAP shortens any front gate")
    best = max(r for _, r in effects)
    tied = [e for e, r in effects if r == best]
    if len(tied) == 1:
        edge = tied[0]
    else:
        info = agent.ctx.swap_info
        edge = tied[_roulette([info[e][1] for e in tied], agent.rng)]
    agent.apply_swap(edge)
    return edge


# -- population dynamics ------------------------------------------------------


def rank_and_partition(fitness: Sequence[float], m: int) -> list[list[int]]:
    """Sort agent ids by fitness (descending, ties by id) and deal them round-robin into ``m`` groups.

    Group ``k`` receives ranks k, k+m, k+2m, ...; within a group the best agent comes first.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if len(fitness) % m:
        raise ValueError(f"{len(fitness)} agents cannot be split into {m} equal groups")
    ranked = sorted(range(len(fitness)), key=lambda i: (-fitness[i], i))
    return [ranked[k::m] for k in range(m)]


def evolution_lhs(r: float, delta_gates: int, fit_best: float, fit_worst: float) -> float:
    """Left side of the evolution test: r * max(delta_gates, 0) * fit_best / fit_worst."""
    return r * max(delta_gates, 0) * fit_best / fit_worst


def should_evolve(r: float, delta_gates: int, log_fit_best: float, log_fit_worst: float, C: float) -> bool:
    """Evolution test evaluated with log fitness so tiny fitness values cannot overflow the ratio."""
    delta_gates = max(delta_gates, 0)
    if r <= 0 or delta_gates == 0:
        return 0.0 > C
    if C <= 0:
        return True
    return math.log(r) + math.log(delta_gates) + (log_fit_best - log_fit_worst) > math.log(C)


def evolve_groups(
    groups: Sequence[Sequence[int]], agents: Sequence[Agent], C: float, rng: random.Random
) -> list[tuple[int, int]]:
    """Possibly overwrite each group's worst agent with its best; returns (worst, best) pairs that evolved.

    One uniform draw is consumed per group whether or not it evolves.
    Finished agents are never overwritten.
    """
    evolved = []
    for group in groups:
        r = rng.random()
        best, worst = agents[group[0]], agents[group[-1]]
        if worst is best or worst.finished:
            continue
        delta = worst.remaining_2q - best.remaining_2q
        if should_evolve(r, delta, best.fitness.log_value, worst.fitness.log_value, C):
            worst.adopt(best)
            evolved.append((worst.agent_id, best.agent_id))
    return evolved


def agent_streams(seed: int, count: int) -> tuple[random.Random, list[random.Random]]:
    """Independent generators for the population and for each agent, derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(count + 1)
    make = lambda ss: random.Random(int.from_bytes(ss.generate_state(4, np.uint32).tobytes(), "little"))
    return make(children[0]), [make(c) for c in children[1:]]


@dataclass(frozen=True)
class AgentStats:
    agent_id: int
    finished: bool
    swaps: int
    log_fitness: float


@dataclass(frozen=True)
class RoutingReport:
    swaps: int
    g_add: int
    depth: int
    iterations: int
    best_agent: int
    evolutions: int
    # mapping the returned circuit starts from (may come from another agent through evolution)
    initial_mapping: Mapping
    agents: tuple[AgentStats, ...] = field(repr=False)


def route(
    circuit: QuantumCircuit,
    hw: HardwareModel,
    initial_mappings: Sequence[Mapping],
    cfg: RoutingConfig = RoutingConfig(),
) -> tuple[QuantumCircuit, Mapping, RoutingReport]:
    """Route ``circuit`` with ``cfg.m * cfg.n`` cooperating agents, one per initial mapping.

    Returns the physical circuit of the fittest finished agent, its final
    mapping and a report.
    """
    if len(initial_mappings) != cfg.num_agents:
        raise ValueError(f"need {cfg.num_agents} initial mappings, got {len(initial_mappings)}")
    ctx = RoutingContext(circuit, hw, cfg.variation_aware)
    pop_rng, rngs = agent_streams(cfg.seed, cfg.num_agents)
    agents = [Agent(ctx, mp, rng, i) for i, (mp, rng) in enumerate(zip(initial_mappings, rngs))]
    target = cfg.n + 1 if cfg.strict_termination else cfg.n
    cap = max(1, len(circuit.gates)) * hw.num_nodes ** 2
    iterations = evolutions = 0

    def done() -> bool:
        finished = sum(a.finished for a in agents)
        return finished >= target or finished == len(agents)

    while not done():
        groups = rank_and_partition([a.fitness.log_value for a in agents], cfg.m)
        evolutions += len(evolve_groups(groups, agents, cfg.C, pop_rng))
        for a in agents:
            if not a.finished:
                step_agent(a)
        iterations += 1
        if iterations > cap:
            raise RoutingDefectError(f"routing exceeded {cap} iterations")

    finished = [a for a in agents if a.finished]
    best = min(finished, key=lambda a: (-a.fitness.log_value, a.agent_id))
    pcir = best.physical_circuit()
    report = RoutingReport(
        swaps=best.swaps,
        g_add=3 * best.swaps,
        depth=circuit_depth(decompose_swaps(pcir)),
        iterations=iterations,
        best_agent=best.agent_id,
        evolutions=evolutions,
        initial_mapping=best.initial,
        agents=tuple(AgentStats(a.agent_id, a.finished, a.swaps, a.fitness.log_value) for a in agents),
    )
    return pcir, best.mapping, report
