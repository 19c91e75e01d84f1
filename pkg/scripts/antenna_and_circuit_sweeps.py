"""EE-design curves over the budget for several antenna counts and circuit powers.

    python scripts/antenna_and_circuit_sweeps.py [--out results/trends]
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from beamee.cli import main


def summarise(path: Path, key: str) -> None:
    curves = defaultdict(list)
    for r in csv.DictReader(path.open()):
        curves[r[key]].append((float(r["p_max_dbm"]), float(r["ee_bits_per_j"]), float(r["total_power_w"])))
    for k, pts in curves.items():
        best = max(e for _, e, _ in pts)
        sat = next(p for p, e, _ in pts if e >= best * (1 - 1e-3))
        print(f"{key}={k:>4}: max EE {best:.5g} bits/J, saturates at {sat:g} dBm, "
              f"power used at top budget {pts[-1][2]:.4g} W")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/trends")
    ap.add_argument("--pmax-grid", default="-10,0,10,20,30,40,50")
    args, extra = ap.parse_known_args()
    out = Path(args.out)
    common = ["sweep", "--objective", "ee", "--pmax-grid", args.pmax_grid, *extra]
    code = main([*common, "--m-grid", "16,32,64", "--out", str(out / "antennas")])
    code = code or main([*common, "--pc-grid", "10,30", "--out", str(out / "circuit")])
    if code == 0:
        summarise(out / "antennas" / "sweep.csv", "M")
        summarise(out / "circuit" / "sweep.csv", "p_c_dbm")
    sys.exit(code)
