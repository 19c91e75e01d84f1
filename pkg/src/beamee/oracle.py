"""Reference solvers used to check the water-filling path.

Nothing here imports the water-filling module: the objective and gradient
of the concave Dinkelbach subproblem are coded again from the DE
auxiliaries, and the optimiser is plain projected-gradient ascent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .de import DEState
from .model import BeamEEError, ChannelStats, NoConvergence, PowerAllocation, PowerModel, SolverConfig
from .ops import _lambdas


class InstanceTooLarge(BeamEEError):
    pass


@dataclass(frozen=True)
class OracleResult:
    allocation: PowerAllocation
    objective: float
    iterations: int
    kkt_residual: float


def project_capped_simplex(x: np.ndarray, total: float | None) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum x <= total}`` (no sum bound if ``total`` is None)."""
    y = np.maximum(x, 0.0)
    if total is None or y.sum() <= total:
        return y
    v = np.sort(x.ravel())[::-1]
    css = np.cumsum(v) - total
    ind = np.arange(1, v.size + 1)
    r = np.flatnonzero(v - css / ind > 0)[-1]
    tau = css[r] / (r + 1)
    return np.maximum(x - tau, 0.0)


class _Objective:
    """Dinkelbach subproblem at level ``eta`` with frozen DE auxiliaries."""

    def __init__(self, stats: ChannelStats, deltas, states: list[DEState], pm: PowerModel, eta: float,
                 lam_ref):
        self.stats = stats
        self.omegas = stats.omegas
        self.gamma = np.array([s.gamma for s in states])
        self.gt = [s.gamma_tilde for s in states]
        self.const = -sum(float(np.sum(1.0 - 1.0 / s.phi_tilde)) for s in states)
        self.d = np.asarray(deltas, dtype=float)
        self.pm = pm
        self.eta = eta
        lam_ref = _lambdas(lam_ref)
        self.lam_ref = lam_ref
        self.kb_ref = self._kbars(lam_ref)

    def _kbars(self, lam):
        tot = lam.sum(axis=0)
        return [self.stats.noise_power + om @ (tot - lam[k]) for k, om in enumerate(self.omegas)]

    def value(self, lam: np.ndarray) -> float:
        kbs = self._kbars(lam)
        v = self.const + float(np.sum(np.log1p(self.gamma * lam)))
        for k in range(len(kbs)):
            v += float(np.sum(np.log((self.gt[k] + kbs[k]) / self.kb_ref[k])))
        v -= float(np.sum(self.d * (lam - self.lam_ref)))
        return v - self.eta * self.pm.consumed(float(lam.sum()), self.stats.M)

    def grad(self, lam: np.ndarray) -> np.ndarray:
        kbs = self._kbars(lam)
        g = self.gamma / (1.0 + self.gamma * lam) - self.d - self.eta * self.pm.xi
        for kp, om in enumerate(self.omegas):
            w = (1.0 / (self.gt[kp] + kbs[kp])) @ om
            for k in range(lam.shape[0]):
                if k != kp:
                    g[k] += w
        return g


def pg_solve_f6(stats: ChannelStats, deltas, states: list[DEState], pm: PowerModel, eta: float,
                p_max: float | None, cfg: SolverConfig = SolverConfig(), lam_ref=None,
                x0=None) -> OracleResult:
    """Projected-gradient ascent with Armijo backtracking.

    The trial step starts from a Barzilai-Borwein estimate.  Stops when the
    gradient mapping ``x - P(x + g)`` has max-norm below ``cfg.pg_tol``
    times the water level scale.
    """
    K, M = stats.K, stats.M
    if lam_ref is None:
        lam_ref = np.zeros((K, M))
    obj = _Objective(stats, deltas, states, pm, eta, lam_ref)
    x = project_capped_simplex(np.zeros((K, M)) if x0 is None else _lambdas(x0).copy(), p_max)
    f = obj.value(x)
    g = obj.grad(x)
    tol = cfg.pg_tol * max(1.0, abs(eta * pm.xi))
    t = 1.0 / max(1.0, float(np.max(np.abs(g))))
    beta, c = 0.5, 1e-4
    # tolerate rounding noise in f once steps are tiny
    slack = 1e-14 * max(1.0, abs(f))
    for it in range(1, cfg.max_iter_pg + 1):
        pgm = x - project_capped_simplex(x + g, p_max)
        res = float(np.max(np.abs(pgm)))
        if res <= tol:
            return OracleResult(PowerAllocation(x), f, it, res)
        while True:
            x_new = project_capped_simplex(x + t * g, p_max)
            step = x_new - x
            f_new = obj.value(x_new)
            if f_new >= f + c * float(np.sum(g * step)) - slack or t < 1e-20:
                break
            t *= beta
        g_new = obj.grad(x_new)
        s, yv = step.ravel(), (g_new - g).ravel()
        sy = -float(s @ yv)
        t = float(s @ s) / sy if sy > 0 else 2.0 * t
        t = min(max(t, 1e-12), 1e12)
        x, f, g = x_new, f_new, g_new
    raise NoConvergence("projected gradient", cfg.max_iter_pg, res)


def subproblem_objective(stats: ChannelStats, deltas, states: list[DEState], pm: PowerModel, eta: float,
                         lam_ref, lam) -> float:
    """Value of the Dinkelbach subproblem objective at ``lam`` (oracle's own evaluation)."""
    return _Objective(stats, deltas, states, pm, eta, lam_ref).value(_lambdas(lam))


def batched_sum_rate(stats: ChannelStats, lams: np.ndarray, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """DE sum rate for a batch of allocations ``lams`` of shape (B, K, M).

    Plain Picard iteration from ``phi_tilde = 1`` run on the whole batch at
    once, written independently of the ``de`` module.
    """
    lams = np.asarray(lams, dtype=float)
    total = lams.sum(axis=1)
    out = np.zeros(lams.shape[0])
    for k, om in enumerate(stats.omegas):
        lam = lams[:, k, :]
        kb = stats.noise_power + (total - lam) @ om.T
        pt = np.ones_like(kb)
        for _ in range(cfg.max_iter_de):
            gamma = (1.0 / (pt * kb)) @ om
            gt = (lam / (1.0 + gamma * lam)) @ om.T
            new = 1.0 + gt / kb
            res = np.max(np.abs(new - pt), axis=1) / np.maximum(1.0, np.max(np.abs(new), axis=1))
            pt = new
            if res.max() <= cfg.eps_de:
                break
        else:
            raise NoConvergence("batched DE fixed point", cfg.max_iter_de, float(res.max()))
        gamma = (1.0 / (pt * kb)) @ om
        gt = (lam / (1.0 + gamma * lam)) @ om.T
        out += (np.sum(np.log1p(gamma * lam), axis=1) + np.sum(np.log1p(gt / kb), axis=1)
                - np.sum(1.0 - 1.0 / pt, axis=1))
    return out


def grid_search_ee(stats: ChannelStats, pm: PowerModel, resolution: float,
                   cfg: SolverConfig = SolverConfig(), use_mc: bool = False) -> OracleResult:
    """Exhaustive search of the EE over ``{0, d, 2d, ...}^(K*M)`` within the budget.

    DE rates by default; ``use_mc`` switches to Monte-Carlo EE with the
    configured seed.
    """
    K, M = stats.K, stats.M
    if K * M > 3:
        raise InstanceTooLarge(f"grid search supports at most 3 power variables, got {K * M}")
    n = int(np.floor(pm.p_max / resolution + 1e-9))
    levels = np.arange(n + 1) * resolution
    points = np.array([p for p in itertools.product(levels, repeat=K * M) if sum(p) <= pm.p_max + 1e-12])
    lams = points.reshape(-1, K, M)
    if use_mc:
        from .mc import mc_ee
        ee = np.array([mc_ee(stats, pm, lam, cfg).mean for lam in lams])
    else:
        ee = np.concatenate([batched_sum_rate(stats, lams[i:i + 4096], cfg)
                             for i in range(0, len(lams), 4096)])
        ee = ee / (pm.xi * points.sum(axis=1) + M * pm.p_c + pm.p_s)
    i = int(np.argmax(ee))
    best, best_lam, count = float(ee[i]), lams[i], len(lams)
    return OracleResult(PowerAllocation(best_lam), best, count, 0.0)
