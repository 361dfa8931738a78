"""Command-line entry point: ``mamap map``, ``mamap simulate`` and ``mamap bench``.

Exit codes: 0 success, 1 parse/IO/usage error, 2 circuit does not fit the
device, 3 internal routing defect, 4 noiseless output is not deterministic.
"""
from __future__ import annotations

import argparse
import csv
import io
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import qasm
from .circuit import QuantumCircuit, reduced_symmetric_circuit
from .hardware import HardwareError, HardwareModel, Mapping, is_compliant, load_device
from .placement import PlacementConfig, ils_place
from .routing import RoutingConfig, RoutingDefectError, RoutingReport, route
from .simulator import (
    DEFAULT_SHOTS,
    NoiseModel,
    NonDeterministicOutputError,
    SimulationError,
    deterministic_output,
    estimate_pst,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_DEFECT, EXIT_NONDETERMINISTIC = 0, 1, 2, 3, 4
CSV_COLUMNS = ["name", "n", "g_ori", "g_add", "dep", "pst", "t", "seed", "mode"]
BENCH_EXTRA_COLUMNS = ["g_add_median", "dep_median", "pst_median"]


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    m: int = 20
    n: int = 5
    C: float = 1.0
    mode: str = "ma"
    ils_outer: int = 10
    ils_inner: int = 5
    ils_shots: int = 1024
    shots: int = DEFAULT_SHOTS
    seed: int = 0

    @property
    def variation_aware(self) -> bool:
        return self.mode == "ma"

    @property
    def mode_label(self) -> str:
        return "MA" if self.variation_aware else "MA_NA"


_CONFIG_KEYS = {
    "m": int,
    "n": int,
    "C": float,
    "mode": str,
    "I": int,
    "J": int,
    "ils_shots": int,
    "shots": int,
    "seed": int,
}
_CONFIG_FIELDS = {"I": "ils_outer", "J": "ils_inner"}


def read_config(path: str | Path) -> dict[str, object]:
    """Parse a ``key = value`` file (``#`` starts a comment)."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: expected one of {', '.join(_CONFIG_KEYS)} as key = value")
        try:
            out[_CONFIG_FIELDS.get(key, key)] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


@dataclass(frozen=True)
class MapOutcome:
    circuit: QuantumCircuit
    final_mapping: Mapping
    report: RoutingReport
    placements: tuple[Mapping, ...]
    seconds: float


def _place_one(job: tuple[QuantumCircuit, HardwareModel, NoiseModel, PlacementConfig]) -> Mapping:
    reduced, hw, noise, cfg = job
    return ils_place(reduced, hw, noise, cfg).mapping


def _derived_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def map_circuit(circuit: QuantumCircuit, hw: HardwareModel, settings: Settings, jobs: int = 1) -> MapOutcome:
    """Place with one ILS run per agent, then route cooperatively. ``circuit`` should be compact."""
    if circuit.num_qubits > hw.num_nodes:
        raise InfeasibleError(f"circuit needs {circuit.num_qubits} qubits, {hw.name} has {hw.num_nodes}")
    start = time.perf_counter()
    agents = settings.m * settings.n
    seeds = _derived_seeds(settings.seed, agents + 1)
    # MA_NA places against a uniform-noise simulator as well as routing with uniform errors
    noise = NoiseModel() if settings.variation_aware else NoiseModel.uniform()
    reduced = reduced_symmetric_circuit(circuit)
    jobs_in = [
        (reduced, hw, noise, PlacementConfig(
            settings.ils_outer, settings.ils_inner, settings.ils_shots, s, settings.variation_aware
        ))
        for s in seeds[:agents]
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            placements = list(pool.map(_place_one, jobs_in, chunksize=max(1, agents // (4 * jobs))))
    else:
        placements = [_place_one(j) for j in jobs_in]
    cfg = RoutingConfig(settings.m, settings.n, settings.C, settings.variation_aware, seeds[agents])
    pcir, final, report = route(circuit, hw, placements, cfg)
    if not is_compliant(pcir, hw):
        raise RoutingDefectError("routed circuit violates the coupling graph")
    return MapOutcome(pcir, final, report, tuple(placements), time.perf_counter() - start)


def routed_pst(
    logical: QuantumCircuit, outcome: MapOutcome, hw: HardwareModel, shots: int, seed: int
) -> float | None:
    """Simulated success probability under the device calibration, or None when undefined."""
    try:
        ideal = deterministic_output(logical)
    except NonDeterministicOutputError:
        return None
    est = estimate_pst(outcome.circuit, ideal, hw, NoiseModel(), shots, seed, final_mapping=outcome.final_mapping)
    return est.pst


def _row(name: str, logical: QuantumCircuit, outcome: MapOutcome, pst: float | None, settings: Settings,
         omit_time: bool) -> dict[str, str]:
    return {
        "name": name,
        "n": str(logical.num_qubits),
        "g_ori": str(len(logical.gates)),
        "g_add": str(outcome.report.g_add),
        "dep": str(outcome.report.depth),
        "pst": "" if pst is None else f"{pst:.6f}",
        "t": "" if omit_time else f"{outcome.seconds:.3f}",
        "seed": str(settings.seed),
        "mode": settings.mode_label,
    }


def _write_csv(path: str, columns: list[str], rows: list[dict[str, str]]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _load_logical(path: str) -> tuple[QuantumCircuit, list[int]]:
    """Parsed circuit without idle qubits, plus the original index of each kept qubit."""
    return qasm.load(path).compact()


def _settings(args: argparse.Namespace) -> Settings:
    merged: dict[str, object] = {}
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    if getattr(args, "agents", None):
        merged["m"], merged["n"] = args.agents
    if getattr(args, "ils", None):
        merged["ils_outer"], merged["ils_inner"] = args.ils
    for key in ("C", "mode", "seed", "ils_shots", "shots"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    settings = replace(Settings(), **merged)
    if settings.mode not in ("ma", "ma_na"):
        raise ValueError(f"mode must be ma or ma_na, got {settings.mode!r}")
    RoutingConfig(settings.m, settings.n, settings.C, seed=settings.seed)
    PlacementConfig(settings.ils_outer, settings.ils_inner, settings.ils_shots)
    return settings


def cmd_map(args: argparse.Namespace) -> int:
    settings = _settings(args)
    hw = load_device(args.device)
    logical, labels = _load_logical(args.circuit)
    outcome = map_circuit(logical, hw, settings, args.jobs)
    pst = routed_pst(logical, outcome, hw, settings.shots, settings.seed) if args.pst else None
    if args.out:
        text = qasm.serialize(outcome.circuit, outcome.final_mapping, expand_swaps=args.expand_swaps, clbits=labels)
        Path(args.out).write_text(text, encoding="utf-8")
    row = _row(Path(args.circuit).stem, logical, outcome, pst, settings, args.omit_time)
    _write_csv(args.report or "-", CSV_COLUMNS, [row])
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    program = qasm.parse_program(Path(args.circuit).read_text(encoding="utf-8"))
    hw = load_device(args.device) if args.device else None
    if args.uniform_error is not None:
        noise = NoiseModel.uniform(args.uniform_error, args.scale)
    else:
        if hw is None:
            raise ValueError("--device is required unless --uniform-error is given")
        noise = NoiseModel(error_scale=args.scale)
    readout = None
    if program.measurements:
        ordered = sorted(program.measurements, key=lambda m: m[1])
        readout = Mapping(tuple(q for q, _ in ordered))
    est = estimate_pst(program.circuit, None, hw, noise, args.shots, args.seed, final_mapping=readout)
    print(est)
    return EXIT_OK


def _median(values: list[float]) -> str:
    return f"{statistics.median(values):g}" if values else ""


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _settings(args)
    if args.runs < 1:
        raise ValueError("--runs must be at least 1")
    hw = load_device(args.device)
    files = sorted(Path(args.suite).glob("*.qasm")) if Path(args.suite).is_dir() else []
    if not files:
        raise ValueError(f"no .qasm files in {args.suite}")
    rows = []
    for path in files:
        logical, _ = _load_logical(str(path))
        if logical.num_qubits > hw.num_nodes:
            print(f"skipping {path.name}: {logical.num_qubits} qubits exceed {hw.name}", file=sys.stderr)
            continue
        runs = []
        for k in range(args.runs):
            run_settings = replace(settings, seed=settings.seed + k)
            outcome = map_circuit(logical, hw, run_settings, args.jobs)
            pst = routed_pst(logical, outcome, hw, settings.shots, run_settings.seed) if args.pst else None
            runs.append((run_settings, outcome, pst))

        def rank(run):
            s, o, p = run
            return (-(p if p is not None else -1.0), o.report.g_add, o.report.depth, s.seed)

        best_settings, best, best_pst = min(runs, key=rank)
        row = _row(path.stem, logical, best, best_pst, best_settings, args.omit_time)
        row["g_add_median"] = _median([o.report.g_add for _, o, _ in runs])
        row["dep_median"] = _median([o.report.depth for _, o, _ in runs])
        psts = [p for _, _, p in runs if p is not None]
        row["pst_median"] = f"{statistics.median(psts):.6f}" if psts else ""
        rows.append(row)
        print(f"{path.stem}: g_add={row['g_add']} dep={row['dep']} pst={row['pst'] or '-'}", file=sys.stderr)
    _write_csv(args.report or "-", CSV_COLUMNS + BENCH_EXTRA_COLUMNS, rows)
    return EXIT_OK


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers like 20,5, got {text!r}") from None
    return a, b


def _mapping_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--device", required=True, help="device JSON path or shipped name (belem, guadalupe, tokyo)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--agents", type=_pair, metavar="M,N", help="groups and agents per group (default 20,5)")
    p.add_argument("--C", type=float, help="evolution threshold (default 1)")
    p.add_argument("--mode", choices=["ma", "ma_na"], help="variation-aware (ma) or uniform-error (ma_na)")
    p.add_argument("--ils", type=_pair, metavar="I,J", help="placement outer,inner iterations (default 10,5)")
    p.add_argument("--ils-shots", dest="ils_shots", type=int, help="shots per placement evaluation (default 1024)")
    p.add_argument("--shots", type=int, help=f"shots for --pst (default {DEFAULT_SHOTS})")
    p.add_argument("--config", help="key = value file; flags take precedence")
    p.add_argument("--report", help="CSV output path (default stdout)")
    p.add_argument("--pst", action="store_true", help="simulate the routed circuit and report its PST")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for placement")
    p.add_argument("--omit-time", dest="omit_time", action="store_true",
                   help="leave the wall-time column empty so reports are byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mamap", description="Noise-aware multi-agent qubit mapping.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="map one circuit onto a device")
    p.add_argument("--circuit", required=True, help="OpenQASM 2.0 input")
    p.add_argument("--out", help="write the mapped circuit as QASM")
    p.add_argument("--expand-swaps", dest="expand_swaps", action="store_true", help="write SWAPs as three CX")
    _mapping_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("simulate", help="estimate PST of a circuit under device noise")
    p.add_argument("--circuit", required=True)
    p.add_argument("--device", help="device JSON path or shipped name")
    p.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    p.add_argument("--scale", type=float, default=1.0, help="multiply every CX error rate")
    p.add_argument("--uniform-error", dest="uniform_error", type=float, help="same error rate for every CX")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="map every circuit of a directory several times")
    p.add_argument("--suite", required=True, help="directory of .qasm files")
    p.add_argument("--runs", type=int, default=1, help="runs per circuit with seeds seed, seed+1, ...")
    _mapping_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RoutingDefectError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_DEFECT
    except NonDeterministicOutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONDETERMINISTIC
    except (OSError, qasm.QasmError, HardwareError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
