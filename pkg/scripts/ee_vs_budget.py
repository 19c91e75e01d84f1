"""EE of the EE-optimal and sum-rate-optimal designs over the power budget.

Default scenario (K=4, M=16), budgets -10..50 dBm.  Writes sweep.csv via the
CLI and prints both curves side by side.

    python scripts/ee_vs_budget.py [--out results/ee_vs_budget] [extra CLI flags]
"""

import argparse
import csv
import sys
from pathlib import Path

from beamee.cli import main


def table(path: Path) -> None:
    rows = list(csv.DictReader(path.open()))
    by = {}
    for r in rows:
        by.setdefault(r["p_max_dbm"], {})[r["objective"]] = r
    print(f"{'P_max dBm':>9}  {'EE design':>12}  {'SR design':>12}  {'ratio':>7}  {'P used W':>9}")
    for p, pair in by.items():
        ee, sr = float(pair["ee"]["ee_bits_per_j"]), float(pair["sumrate"]["ee_bits_per_j"])
        print(f"{float(p):9g}  {ee:12.6g}  {sr:12.6g}  {ee / sr:7.3f}  {float(pair['ee']['total_power_w']):9.4g}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/ee_vs_budget")
    args, extra = ap.parse_known_args()
    code = main(["sweep", "--objective", "both", "--out", args.out, *extra])
    if code == 0:
        table(Path(args.out) / "sweep.csv")
    sys.exit(code)
