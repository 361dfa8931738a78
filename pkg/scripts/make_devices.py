"""Regenerate the shipped device files with synthetic calibrations.

To use a real calibration snapshot instead, write a JSON file with the same
schema (see README) and pass its path wherever a device name is accepted.
"""
import json
from pathlib import Path

from mamap.hardware import HardwareModel, synthetic_calibration

OUT = Path(__file__).resolve().parents[1] / "src" / "mamap" / "data" / "devices"

TOPOLOGIES = {
    "belem": (5, [(0, 1), (1, 2), (1, 3), (3, 4)]),
    "guadalupe": (16, [
        (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
        (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
    ]),
    # 4x5 grid with crossed diagonals in alternating cells
    "tokyo": (20, [
        (0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8), (8, 9),
        (10, 11), (11, 12), (12, 13), (13, 14), (15, 16), (16, 17), (17, 18), (18, 19),
        (0, 5), (1, 6), (2, 7), (3, 8), (4, 9), (5, 10), (6, 11), (7, 12), (8, 13), (9, 14),
        (10, 15), (11, 16), (12, 17), (13, 18), (14, 19),
        (1, 7), (2, 6), (3, 9), (4, 8), (5, 11), (6, 10), (7, 13), (8, 12),
        (11, 17), (12, 16), (13, 19), (14, 18),
    ]),
}

SEEDS = {"belem": 5, "guadalupe": 16, "tokyo": 20}

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (n, edges) in TOPOLOGIES.items():
        hw = HardwareModel.build(n, edges, synthetic_calibration(edges, SEEDS[name]), name)
        (OUT / f"{name}.json").write_text(json.dumps(hw.to_json(), indent=1) + "\n")
        print(f"{name}: {n} qubits, {len(edges)} edges, D={hw.diameter}, e_max={hw.calib.e_max}")
