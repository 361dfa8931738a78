"""Noise-aware qubit mapping: ILS placement, multi-agent routing and a Pauli-noise simulator."""
from __future__ import annotations

from .circuit import Gate, GateKind, QuantumCircuit, cx, swap
from .hardware import HardwareModel, Mapping, is_compliant, load_device
from .placement import PlacementConfig, ils_place
from .routing import RoutingConfig, route
from .simulator import NoiseModel, estimate_pst, run_noisy

__all__ = [
    "Gate",
    "GateKind",
    "HardwareModel",
    "Mapping",
    "NoiseModel",
    "PlacementConfig",
    "QuantumCircuit",
    "RoutingConfig",
    "cx",
    "estimate_pst",
    "ils_place",
    "is_compliant",
    "load_device",
    "route",
    "run_noisy",
    "swap",
]
