from __future__ import annotations

import csv
import io
import shutil
import subprocess
import sys

import pytest

from mamap import cli, qasm
from mamap.hardware import is_compliant, load_device
from mamap.routing import RoutingDefectError

from conftest import BENCH_DIR

FAST = ["--agents", "2,2", "--ils", "1,2", "--ils-shots", "128", "--shots", "512"]


def rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_map_writes_report_and_compliant_qasm(capsys, tmp_path):
    out = tmp_path / "gray.qasm"
    code, stdout, _ = run(
        capsys, "map", "--circuit", str(BENCH_DIR / "graycode6_47.qasm"), "--device", "guadalupe",
        "--out", str(out), "--pst", *FAST,
    )
    assert code == 0
    (row,) = rows(stdout)
    assert list(row) == cli.CSV_COLUMNS
    assert (row["name"], row["n"], row["g_ori"], row["mode"], row["seed"]) == ("graycode6_47", "6", "5", "MA", "0")
    assert int(row["g_add"]) % 3 == 0 and 0 < float(row["pst"]) <= 1
    prog = qasm.parse_program(out.read_text())
    assert is_compliant(prog.circuit, load_device("guadalupe"))
    assert sum(g.is_two_qubit for g in prog.circuit.gates) == 5 + prog.circuit.swap_count
    # measurements go back to the circuit's original classical bits 0..5
    assert sorted(c for _, c in prog.measurements) == list(range(6))


def test_map_expanded_swaps_and_report_file(capsys, tmp_path):
    out, report = tmp_path / "o.qasm", tmp_path / "r.csv"
    code, stdout, _ = run(
        capsys, "map", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"), "--device", "belem",
        "--out", str(out), "--report", str(report), "--expand-swaps", *FAST,
    )
    assert code == 0 and stdout == ""
    assert "swap" not in out.read_text()
    (row,) = rows(report.read_text())
    assert row["pst"] == "" and float(row["t"]) >= 0


def test_single_agent_is_accepted(capsys):
    code, stdout, _ = run(
        capsys, "map", "--circuit", str(BENCH_DIR / "alu-v0_27.qasm"), "--device", "tokyo",
        "--agents", "1,1", "--ils", "1,1",
    )
    assert code == 0 and rows(stdout)[0]["name"] == "alu-v0_27"


def test_missing_circuit_is_an_input_error(capsys, tmp_path):
    code, _, err = run(capsys, "map", "--circuit", str(tmp_path / "nope.qasm"), "--device", "belem")
    assert code == cli.EXIT_INPUT and "error" in err


def test_malformed_qasm_is_an_input_error(capsys, tmp_path):
    bad = tmp_path / "bad.qasm"
    bad.write_text('OPENQASM 2.0;\nqreg q[2];\ncx q[0],q[7];\n')
    code, _, err = run(capsys, "map", "--circuit", str(bad), "--device", "belem")
    assert code == cli.EXIT_INPUT and "line 3" in err


def test_unknown_device_is_an_input_error(capsys):
    code, _, _ = run(capsys, "map", "--circuit", str(BENCH_DIR / "graycode6_47.qasm"), "--device", "nowhere")
    assert code == cli.EXIT_INPUT


def test_too_many_qubits_is_infeasible(capsys):
    code, _, err = run(capsys, "map", "--circuit", str(BENCH_DIR / "graycode6_47.qasm"), "--device", "belem")
    assert code == cli.EXIT_INFEASIBLE and "6 qubits" in err


def test_routing_defect_exit_code(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise RoutingDefectError("stuck")

    monkeypatch.setattr(cli, "route", broken)
    code, _, err = run(capsys, "map", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"), "--device", "belem", *FAST)
    assert code == cli.EXIT_DEFECT and "stuck" in err


def test_config_file_with_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nm = 1\nn = 2\nmode = ma_na\nseed = 5\nI = 1\nJ = 1\nils_shots = 64\n")
    circuit = str(BENCH_DIR / "4mod5-v1_22.qasm")
    code, stdout, _ = run(capsys, "map", "--circuit", circuit, "--device", "belem", "--config", str(cfg))
    assert code == 0
    row = rows(stdout)[0]
    assert (row["mode"], row["seed"]) == ("MA_NA", "5")
    code, stdout, _ = run(capsys, "map", "--circuit", circuit, "--device", "belem", "--config", str(cfg),
                          "--seed", "8", "--mode", "ma")
    assert (rows(stdout)[0]["mode"], rows(stdout)[0]["seed"]) == ("MA", "8")


@pytest.mark.parametrize("text", ["m = 0\n", "bogus = 1\n", "m = two\n", "mode = fast\n", "no equals sign\n"])
def test_bad_config_is_an_input_error(capsys, tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, _ = run(capsys, "map", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"), "--device", "belem",
                     "--config", str(cfg))
    assert code == cli.EXIT_INPUT


def test_bad_agents_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["map", "--circuit", "x.qasm", "--device", "belem", "--agents", "3"])
    assert exc.value.code == 2  # argparse usage errors


def test_non_deterministic_circuit_leaves_pst_blank(capsys, tmp_path):
    ghz = tmp_path / "ghz.qasm"
    ghz.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\nh q[0];\ncx q[0],q[1];\ncx q[1],q[2];\n')
    code, stdout, _ = run(capsys, "map", "--circuit", str(ghz), "--device", "belem", "--pst", *FAST)
    assert code == 0 and rows(stdout)[0]["pst"] == ""


# -- simulate ------------------------------------------------------------------------


def test_simulate_without_noise_is_certain(capsys):
    code, stdout, _ = run(capsys, "simulate", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"),
                          "--device", "tokyo", "--scale", "0", "--shots", "1000")
    assert code == 0
    assert stdout.startswith("pst=1.000000 stderr=0.000000 successes=1000 shots=1000")


def test_simulate_uniform_error_closed_form(capsys, tmp_path):
    one = tmp_path / "one.qasm"
    one.write_text('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncx q[0],q[1];\n')
    code, stdout, _ = run(capsys, "simulate", "--circuit", str(one), "--uniform-error", "0.2", "--shots", "8192")
    assert code == 0
    pst = float(stdout.split()[0].removeprefix("pst="))
    assert abs(pst - 0.84) <= 3 * (0.84 * 0.16 / 8192) ** 0.5


def test_simulate_textbook_qft_is_not_deterministic(capsys, tmp_path):
    # two-qubit QFT on |00>, controlled phase written as u1/cx; the output is uniform
    qft = tmp_path / "qft2.qasm"
    qft.write_text(
        'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\n'
        "h q[0];\nu1(pi/4) q[1];\ncx q[1],q[0];\nu1(-pi/4) q[0];\ncx q[1],q[0];\nu1(pi/4) q[0];\nh q[1];\n"
    )
    code, _, err = run(capsys, "simulate", "--circuit", str(qft), "--device", "belem")
    assert code == cli.EXIT_NONDETERMINISTIC and "not a basis state" in err


def test_simulate_needs_a_noise_source(capsys):
    code, _, _ = run(capsys, "simulate", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"))
    assert code == cli.EXIT_INPUT


# -- bench ---------------------------------------------------------------------------


def test_bench_over_a_small_suite(capsys, tmp_path):
    for name in ("graycode6_47", "4mod5-v1_22", "alu-v0_27"):
        shutil.copy(BENCH_DIR / f"{name}.qasm", tmp_path)
    code, stdout, _ = run(capsys, "bench", "--suite", str(tmp_path), "--device", "tokyo", "--runs", "2", "--pst", *FAST)
    assert code == 0
    table = rows(stdout)
    assert [r["name"] for r in table] == ["4mod5-v1_22", "alu-v0_27", "graycode6_47"]
    assert list(table[0]) == cli.CSV_COLUMNS + cli.BENCH_EXTRA_COLUMNS
    for r in table:
        assert r["seed"] in ("0", "1") and r["g_add_median"] != "" and r["pst_median"] != ""


def test_bench_skips_circuits_that_do_not_fit(capsys, tmp_path):
    shutil.copy(BENCH_DIR / "graycode6_47.qasm", tmp_path)
    shutil.copy(BENCH_DIR / "4mod5-v1_22.qasm", tmp_path)
    code, stdout, err = run(capsys, "bench", "--suite", str(tmp_path), "--device", "belem", *FAST)
    assert code == 0 and "skipping graycode6_47" in err
    assert [r["name"] for r in rows(stdout)] == ["4mod5-v1_22"]


def test_bench_on_empty_directory_fails(capsys, tmp_path):
    code, _, _ = run(capsys, "bench", "--suite", str(tmp_path), "--device", "belem")
    assert code == cli.EXIT_INPUT


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mamap.cli", "map", "--circuit", str(BENCH_DIR / "4mod5-v1_22.qasm"),
         "--device", "belem", "--omit-time", *FAST],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[0] == ",".join(cli.CSV_COLUMNS)
    assert rows(proc.stdout)[0]["t"] == ""
