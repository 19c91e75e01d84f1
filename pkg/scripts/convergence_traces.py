"""MM and Dinkelbach convergence traces on the default scenario.

    python scripts/convergence_traces.py [--out results/traces]
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from beamee.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/traces")
    ap.add_argument("--pmax-grid", default="10,30,50")
    args, extra = ap.parse_known_args()
    code = main(["trace", "--pmax-grid", args.pmax_grid, "--out", args.out, *extra])
    if code == 0:
        per = defaultdict(list)
        for r in csv.DictReader((Path(args.out) / "trace.csv").open()):
            per[r["p_max_dbm"]].append(r)
        for p, rows in per.items():
            ee = " ".join(f"{float(r['ee_bits_per_j']):.5g}" for r in rows)
            print(f"P_max {p:>4} dBm, branch {rows[-1]['branch']}: EE per MM iteration [bits/J] {ee}")
    sys.exit(code)
