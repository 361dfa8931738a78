"""Initial qubit placement by iterated local search over the reduced symmetric circuit.

Each local-search step routes the reduced circuit from the current mapping
with a single agent, scores the routed circuit by simulated success
probability, and continues from the mapping the router ended with. Restarts
shuffle which logical qubit sits on which node of the best mapping so far.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .circuit import QuantumCircuit
from .hardware import HardwareModel, Mapping
from .routing import Agent, RoutingContext, step_agent
from .simulator import NoiseModel, estimate_pst

__all__ = [
    "Mapping",
    "PlacementConfig",
    "PlacementResult",
    "random_mapping",
    "shuffle_perturb",
    "inner_route",
    "ils_place",
]


@dataclass(frozen=True)
class PlacementConfig:
    outer_iters: int = 10
    inner_iters: int = 5
    shots: int = 1024
    seed: int = 0
    variation_aware: bool = True

    def __post_init__(self) -> None:
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("outer_iters and inner_iters must be at least 1")
        if self.shots < 1:
            raise ValueError("shots must be positive")


def random_mapping(num_logical: int, hw: HardwareModel, rng: random.Random) -> Mapping:
    if num_logical > hw.num_nodes:
        raise ValueError(f"{num_logical} logical qubits do not fit on {hw.num_nodes} nodes")
    return Mapping(tuple(rng.sample(range(hw.num_nodes), num_logical)))


def shuffle_perturb(mapping: Mapping, rng: random.Random) -> Mapping:
    """Randomly reassign logical qubits among the nodes the mapping already occupies."""
    nodes = list(mapping)
    rng.shuffle(nodes)
    return Mapping(tuple(nodes))


def inner_route(
    circuit: QuantumCircuit,
    hw: HardwareModel,
    mapping: Mapping,
    rng: random.Random,
    variation_aware: bool = True,
    ctx: RoutingContext | None = None,
) -> tuple[QuantumCircuit, Mapping]:
    """Route with one agent; returns the physical circuit and the final mapping."""
    agent = Agent(ctx or RoutingContext(circuit, hw, variation_aware), mapping, rng)
    while not agent.finished:
        step_agent(agent)
    return agent.physical_circuit(), agent.mapping


@dataclass(frozen=True)
class PlacementResult:
    mapping: Mapping
    pst: float
    evaluations: int


def ils_place(
    reduced: QuantumCircuit,
    hw: HardwareModel,
    noise: NoiseModel,
    cfg: PlacementConfig = PlacementConfig(),
) -> PlacementResult:
    """Best initial mapping found for ``reduced`` (which must act as the identity).

    A mapping replaces the incumbent only when its estimated success
    probability is strictly higher; the incumbent starts at zero.
    """
    rng = random.Random(cfg.seed)
    ctx = RoutingContext(reduced, hw, cfg.variation_aware)
    zeros = "0" * reduced.num_qubits
    best = random_mapping(reduced.num_qubits, hw, rng)
    best_pst = 0.0
    evaluations = 0
    for _ in range(cfg.outer_iters):
        start = shuffle_perturb(best, rng)
        for _ in range(cfg.inner_iters):
            pcir, end = inner_route(reduced, hw, start, rng, ctx=ctx)
            est = estimate_pst(pcir, zeros, hw, noise, cfg.shots, rng.randrange(2**31), final_mapping=end)
            evaluations += 1
            if est.pst > best_pst:
                best, best_pst = start, est.pst
            start = end
    return PlacementResult(best, best_pst, evaluations)
