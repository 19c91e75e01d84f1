"""Outer MM loops.

Every MM iteration freezes the DE auxiliaries and the interference slope at
the current point, then maximises the resulting concave-over-affine EE
surrogate.  ``solve_ee_lowcomplexity`` does that with water-filling and the
P1/P2 branch rule; ``solve_ee_reference`` with Dinkelbach over a
projected-gradient inner solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .de import de_net_rates, de_states
from .model import (ChannelStats, NoConvergence, PowerAllocation, PowerModel, SolverConfig,
                    validate)
from .ops import _lambdas, all_deltas
from .oracle import pg_solve_f6, subproblem_objective
from .wf import ee_waterfill, sr_waterfill


@dataclass
class MMRecord:
    iteration: int
    ee: float
    sum_rate: float
    total_power: float
    inner_iterations: int = 0
    branch: str = ""
    p_opt: float = float("nan")
    wall_time: float = 0.0
    step: float = 1.0
    eta_trace: list[float] = field(default_factory=list)


@dataclass
class SolveTrace:
    records: list[MMRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def ee(self) -> list[float]:
        return [r.ee for r in self.records]

    @property
    def sum_rates(self) -> list[float]:
        return [r.sum_rate for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records) - 1


def _prepare(stats, pm, alloc0, cfg, normalize):
    validate(stats, pm)
    work = stats.normalized() if normalize else stats
    if alloc0 is None:
        lam = PowerAllocation.uniform(stats.K, stats.M, pm.p_max).lambdas.copy()
    else:
        lam = _lambdas(alloc0).astype(float).copy()
        if lam.shape != (stats.K, stats.M):
            raise ValueError(f"alloc0 has shape {lam.shape}, expected {(stats.K, stats.M)}")
    return work, lam


def _evaluate(work, pm, lam, cfg):
    rate = float(de_net_rates(work, lam, cfg).sum())
    return rate / pm.consumed(float(lam.sum()), work.M), rate


def _zero_solution(stats, pm, cfg):
    lam = np.zeros((stats.K, stats.M))
    trace = SolveTrace([MMRecord(0, 0.0, 0.0, 0.0)], converged=True)
    return PowerAllocation(lam), trace


def _segment_search(work, pm, lam, lam_new, cfg, pick, current):
    """Step along ``lam -> lam_new`` that does not lower the objective.

    A bounded scalar search for the best step comes first; if it misses,
    plain halving from the full step takes over.  Returns ``(t, ee, rate)``
    with ``t = 0`` when nothing improves.
    """
    direction = lam_new - lam
    cache = {}

    def at(t):
        if t not in cache:
            cache[t] = _evaluate(work, pm, lam + t * direction, cfg)
        return cache[t]

    res = minimize_scalar(lambda t: -pick(*at(float(t))), bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-4})
    t = float(res.x)
    if pick(*at(t)) >= current and t > 0:
        return (t, *at(t))
    t = 1.0
    for _ in range(cfg.mm_backtrack):
        t *= 0.5
        if pick(*at(t)) >= current:
            return (t, *at(t))
    return (0.0, *at(0.0))


def _mm_loop(work, pm, lam, cfg, step, objective="ee"):
    """Shared MM driver; ``step(lam, ee) -> (lam_new, record_fields)``.

    The surrogate with frozen DE auxiliaries touches the DE objective to
    first order at the expansion point but does not bound it from below, so
    a full step can overshoot.  Its maximiser still improves the surrogate,
    which makes ``lam_new - lam`` an ascent direction of the true objective;
    when the full step loses, the step is searched along that segment.
    """
    ee, rate = _evaluate(work, pm, lam, cfg)
    trace = SolveTrace([MMRecord(0, ee, rate, float(lam.sum()))])
    pick = (lambda e, r: e) if objective == "ee" else (lambda e, r: r)
    for ell in range(1, cfg.max_iter_mm + 1):
        t0 = time.perf_counter()
        try:
            lam_new, info = step(lam, ee)
            ee_new, rate_new = _evaluate(work, pm, lam_new, cfg)
            t = 1.0
            if cfg.mm_backtrack and pick(ee_new, rate_new) < pick(ee, rate):
                t, ee_new, rate_new = _segment_search(work, pm, lam, lam_new, cfg, pick, pick(ee, rate))
                lam_new = lam + t * (lam_new - lam)
        except NoConvergence as exc:
            exc.trace = trace
            raise
        trace.records.append(MMRecord(ell, ee_new, rate_new, float(lam_new.sum()),
                                      wall_time=time.perf_counter() - t0, step=t, **info))
        old, new = pick(ee, rate), pick(ee_new, rate_new)
        lam, ee, rate = lam_new, ee_new, rate_new
        if abs(new - old) <= cfg.eps_mm * max(abs(new), 1e-300):
            trace.converged = True
            break
    else:
        exc = NoConvergence("MM outer loop", cfg.max_iter_mm, abs(trace.ee[-1] - trace.ee[-2]))
        exc.trace = trace
        raise exc
    return PowerAllocation(lam), trace


def solve_ee_lowcomplexity(stats: ChannelStats, pm: PowerModel, alloc0=None,
                           cfg: SolverConfig = SolverConfig(), normalize: bool = True):
    """EE maximisation by MM + iterative water-filling with the P1/P2 branch rule.

    Returns ``(PowerAllocation, SolveTrace)``.  Each record stores the branch
    taken and the power ``p_opt`` of the unconstrained (P1) solution.
    """
    if pm.p_max <= 0:
        return _zero_solution(stats, pm, cfg)
    work, lam = _prepare(stats, pm, alloc0, cfg, normalize)
    p_max = pm.p_max

    def step(lam, ee):
        states = de_states(work, lam, cfg)
        d = all_deltas(work, lam)
        p1 = ee_waterfill(work, d, states, pm, lam, cfg, lam_ref=lam, cap=10.0 * p_max)
        p_opt = p1.alloc.total_power()
        info = dict(p_opt=p_opt, eta_trace=p1.eta_trace, inner_iterations=len(p1.eta_trace) - 1)
        if p_opt <= p_max * (1.0 + cfg.eps_power):
            return p1.alloc.lambdas.copy(), dict(info, branch="P1")
        p2 = sr_waterfill(work, d, states, p_max, lam, cfg)
        return p2.alloc.lambdas.copy(), dict(info, branch="P2")

    return _mm_loop(work, pm, lam, cfg, step)


def solve_ee_reference(stats: ChannelStats, pm: PowerModel, alloc0=None,
                       cfg: SolverConfig = SolverConfig(), normalize: bool = True):
    """EE maximisation by MM + Dinkelbach, each parametric problem solved by projected gradient.

    The Dinkelbach loop stops once ``F = N(lam) - eta * P_tot(lam)`` falls
    below ``cfg.eps_dinkelbach``.
    """
    if pm.p_max <= 0:
        return _zero_solution(stats, pm, cfg)
    work, lam = _prepare(stats, pm, alloc0, cfg, normalize)

    def step(lam, ee):
        states = de_states(work, lam, cfg)
        d = all_deltas(work, lam)
        x = lam
        eta = subproblem_objective(work, d, states, pm, 0.0, lam, lam) / pm.consumed(float(lam.sum()), work.M)
        etas, residuals = [eta], []
        for _ in range(cfg.max_iter_dinkelbach):
            res = pg_solve_f6(work, d, states, pm, eta, pm.p_max, cfg, lam_ref=lam, x0=x)
            x = res.allocation.lambdas
            num = subproblem_objective(work, d, states, pm, 0.0, lam, x)
            den = pm.consumed(float(x.sum()), work.M)
            f_res = num - eta * den
            residuals.append(f_res)
            eta = num / den
            etas.append(eta)
            if f_res <= cfg.eps_dinkelbach * max(1.0, abs(num)):
                break
        else:
            raise NoConvergence("Dinkelbach (reference)", cfg.max_iter_dinkelbach, residuals[-1])
        return x.copy(), dict(eta_trace=etas, inner_iterations=len(residuals),
                              branch="F6", p_opt=float(x.sum()))

    return _mm_loop(work, pm, lam, cfg, step)


def solve_sumrate(stats: ChannelStats, pm: PowerModel, alloc0=None,
                  cfg: SolverConfig = SolverConfig(), normalize: bool = True):
    """Sum-rate maximisation under the budget (MM + budget-constrained water-filling).

    Convergence is tested on the DE sum rate; records still carry the EE of
    each iterate under ``pm``.
    """
    if pm.p_max <= 0:
        return _zero_solution(stats, pm, cfg)
    work, lam = _prepare(stats, pm, alloc0, cfg, normalize)

    def step(lam, ee):
        states = de_states(work, lam, cfg)
        d = all_deltas(work, lam)
        r = sr_waterfill(work, d, states, pm.p_max, lam, cfg)
        return r.alloc.lambdas.copy(), dict(branch="P2", p_opt=r.total_power,
                                            inner_iterations=len(r.bisection))

    return _mm_loop(work, pm, lam, cfg, step, objective="sumrate")


def auxiliary_power_curve(stats: ChannelStats, pm: PowerModel, cfg: SolverConfig, grid,
                          alloc_ref=None, normalize: bool = True) -> list[tuple[float, float, float]]:
    """Best surrogate sum rate ``f(P_T)`` and its EE ratio over a power grid.

    The surrogate is expanded at ``alloc_ref`` (zero power by default, where
    ``f(0) = 0``).  ``f`` uses the budget ``sum lam <= P_T``, which equals the
    equality-constrained value whenever the budget binds and keeps ``f``
    nondecreasing.
    """
    validate(stats, pm)
    work = stats.normalized() if normalize else stats
    lam_ref = np.zeros((stats.K, stats.M)) if alloc_ref is None else _lambdas(alloc_ref)
    states = de_states(work, lam_ref, cfg)
    d = all_deltas(work, lam_ref)
    out = []
    warm = lam_ref
    for p_t in grid:
        if p_t < 0 or p_t > pm.p_max * (1 + 1e-12):
            raise ValueError(f"grid point {p_t} outside [0, p_max]")
        r = sr_waterfill(work, d, states, float(p_t), warm, cfg)
        warm = r.alloc.lambdas
        f = subproblem_objective(work, d, states, pm, 0.0, lam_ref, warm) if p_t > 0 else \
            subproblem_objective(work, d, states, pm, 0.0, lam_ref, np.zeros_like(lam_ref))
        out.append((float(p_t), f, f / pm.consumed(float(p_t), work.M)))
    return out


def random_initial_allocations(K: int, M: int, p_max: float, restarts: int, seed: int) -> list[np.ndarray]:
    """Uniform start followed by ``restarts - 1`` random full-budget starts."""
    rng = np.random.default_rng([seed, 0x5EED])
    out = [np.full((K, M), p_max / (K * M))]
    for _ in range(restarts - 1):
        w = rng.uniform(0.05, 1.0, (K, M))
        out.append(w * (p_max / w.sum()))
    return out
