import csv
import json
from pathlib import Path

import numpy as np
import pytest

from beamee import ChannelStats, load_alloc, save
from beamee.cli import SUMMARY_COLUMNS, main

GOLDEN = Path(__file__).parent / "golden"
SMALL = ["--K", "2", "--M", "4", "--N", "2", "--restarts", "2"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_zero_budget_gives_zero_efficiency(tmp_path):
    code, out = run(tmp_path, "z", "solve", *SMALL, "--pmax-dbm=-inf")
    assert code == 0
    row = read_csv(out / "summary.csv")[0]
    assert float(row["ee_nats_per_j"]) == 0.0
    assert float(row["total_power_w"]) == 0.0
    assert load_alloc(out / "allocation.json").total_power() == 0.0


def test_sumrate_spends_budget(tmp_path):
    code, out = run(tmp_path, "s", "solve", *SMALL, "--objective", "sumrate", "--pmax-dbm", "20")
    assert code == 0
    row = read_csv(out / "summary.csv")[0]
    assert float(row["total_power_w"]) == pytest.approx(0.1, rel=1e-9)
    assert row["algorithm"] == "waterfill"


@pytest.mark.parametrize("cmd", [["solve"], ["trace", "--pmax-grid", "20,40"],
                                 ["sweep", "--pmax-grid", "0,30", "--restarts", "1"],
                                 ["validate", "--mc-samples", "300", "--rotations", "3"]])
def test_reruns_are_byte_identical(tmp_path, cmd):
    _, a = run(tmp_path, "a", *cmd, *SMALL[:6])
    _, b = run(tmp_path, "b", *cmd, *SMALL[:6])
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_summary_matches_golden(tmp_path):
    code, out = run(tmp_path, "g", "solve", *SMALL, "--seed", "3")
    assert code == 0
    text = (out / "summary.csv").read_text()
    golden = (GOLDEN / "solve_k2_m4_seed3.csv").read_text()
    assert text.splitlines()[0] == golden.splitlines()[0] == ",".join(SUMMARY_COLUMNS)
    got, want = read_csv(out / "summary.csv")[0], read_csv(GOLDEN / "solve_k2_m4_seed3.csv")[0]
    for key, value in want.items():
        try:
            expected = float(value)
        except ValueError:
            assert got[key] == value
            continue
        assert float(got[key]) == pytest.approx(expected, rel=1e-8, abs=1e-300)


def test_timing_adds_column(tmp_path):
    _, out = run(tmp_path, "t", "solve", *SMALL, "--restarts", "1", "--timing")
    assert "wall_time_s" in read_csv(out / "summary.csv")[0]


def test_trace_outputs(tmp_path):
    code, out = run(tmp_path, "tr", "trace", *SMALL, "--pmax-grid", "10,40")
    assert code == 0
    rows = read_csv(out / "trace.csv")
    for p in ("10", "40"):
        ee = [float(r["ee_nats_per_j"]) for r in rows if r["p_max_dbm"] == p]
        assert all(b >= a - 1e-9 for a, b in zip(ee, ee[1:]))
    assert read_csv(out / "eta_trace.csv")


def test_sweep_grids(tmp_path):
    code, out = run(tmp_path, "sw", "sweep", *SMALL[:4], "--N", "1", "--restarts", "1",
                    "--pmax-grid", "0,20", "--m-grid", "2,4", "--pc-grid", "10,30", "--objective", "ee")
    assert code == 0
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 8
    assert {r["M"] for r in rows} == {"2", "4"}


def test_validate_with_allocation_file(tmp_path):
    from beamee import PowerAllocation
    alloc = tmp_path / "alloc.json"
    save(PowerAllocation.uniform(2, 4, 1.0), alloc)
    code, out = run(tmp_path, "v", "validate", *SMALL[:6], "--alloc", str(alloc),
                    "--mc-samples", "2000", "--rotations", "2")
    assert code == 0
    rows = read_csv(out / "validate.csv")
    assert all(float(r["rel_gap"]) < 0.05 for r in rows)
    assert len(read_csv(out / "prop1.csv")) == 2


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"K": 2, "M": 4, "restarts": 1, "pmax-dbm": 10}))
    code, out = run(tmp_path, "c", "solve", "--config", str(conf), "--pmax-dbm", "20")
    assert code == 0
    row = read_csv(out / "summary.csv")[0]
    assert (row["K"], row["M"], row["p_max_dbm"]) == ("2", "4", "20")


@pytest.mark.parametrize("args", [["solve", "--restarts", "0"], ["solve", "--objective", "both"],
                                  ["sweep", "--pmax-grid", "30,10"], ["solve", "--config", "/nonexistent.json"]])
def test_configuration_errors_exit_2(tmp_path, args):
    assert main([*args, "--out", str(tmp_path / "x")]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"antennas": 4}))
    assert main(["solve", "--config", str(conf), "--out", str(tmp_path / "x")]) == 2


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--frobnicate"])
    assert exc.value.code == 2


def test_invalid_stats_exit_4(tmp_path):
    path = tmp_path / "bad.json"
    save(ChannelStats.from_omegas([np.zeros((1, 2))], 1.0), path)
    assert main(["solve", "--stats", str(path), "--out", str(tmp_path / "x")]) == 4
    path.write_text("{not json")
    assert main(["solve", "--stats", str(path), "--out", str(tmp_path / "x")]) == 4


def test_no_convergence_exit_3(tmp_path):
    assert main(["solve", *SMALL, "--max-iter-mm", "1", "--eps-mm", "1e-15",
                 "--out", str(tmp_path / "x")]) == 3
