"""Deterministic-equivalent rates against Monte-Carlo on random scenarios.

    python scripts/de_vs_monte_carlo.py [--draws 20] [--samples 10000]
"""

import argparse
import itertools

import numpy as np

from beamee import ScenarioSpec, SolverConfig, de_net_rates, generate, mc_net_rate

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--draws", type=int, default=20)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--power", type=float, default=1.0, help="total transmit power in W")
    args = ap.parse_args()
    cfg = SolverConfig(mc_samples=args.samples)
    rng = np.random.default_rng(7)
    combos = list(itertools.product((1, 2, 4), (8, 16, 32), (2, 4)))
    gaps = {}
    for i in range(args.draws):
        K, M, N = combos[i % len(combos)]
        stats = generate(ScenarioSpec(M=M, K=K, N=N, seed=1000 + i)).normalized()
        lam = rng.uniform(0, 1, (K, M))
        lam *= args.power / lam.sum()
        de = de_net_rates(stats, lam)
        for k in range(K):
            mc = mc_net_rate(stats, lam, k, cfg)
            gaps.setdefault(M, []).append(abs(de[k] - mc.mean) / mc.mean)
    for M in sorted(gaps):
        g = np.array(gaps[M])
        print(f"M={M:3d}: {g.size:3d} user rates, mean gap {g.mean():.3%}, worst {g.max():.3%}")
