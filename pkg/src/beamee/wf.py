"""Iterative water-filling for the per-MM-iteration subproblems.

Both solvers maximise the concave surrogate

    sum_k [ sum_m log(1 + gamma_km lam_km) + sum_n log(gt_kn + kbar_kn(lam))
            - sum_m d_km lam_km ] - c * sum lam

with the DE auxiliaries ``gamma``/``gt`` frozen.  ``c`` is ``xi * eta`` for
the unconstrained EE problem (Dinkelbach level ``eta``) and the budget
multiplier ``mu`` for the sum-rate problem.  The stationarity condition of
coordinate (k, m) is ``rho(x) = 0`` with ``rho`` strictly decreasing, solved
by safeguarded Newton inside Gauss-Seidel sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .de import DEState, de_states
from .model import ChannelStats, NoConvergence, PowerAllocation, PowerModel, SolverConfig
from .ops import _lambdas, all_kbar, rate_minus


def newton_root(f_and_fprime: Callable[[float], tuple[float, float]], x0: float, eps: float,
                max_iter: int, lo: float = 0.0, hi: float = np.inf) -> float:
    """Root of a strictly decreasing ``f`` on ``[lo, hi]``, projected onto the interval.

    Plain Newton steps are taken while they stay inside the current bracket;
    otherwise the step falls back to bisection (or doubling while the upper
    end is still unbounded).  Returns ``lo`` if ``f(lo) <= 0`` and ``hi`` if
    ``f(hi) >= 0``.
    """
    f_lo, _ = f_and_fprime(lo)
    if f_lo <= 0.0:
        return lo
    if np.isfinite(hi):
        f_hi, _ = f_and_fprime(hi)
        if f_hi >= 0.0:
            return hi
    x = min(max(x0, lo), hi)
    if x == lo or x == hi:
        x = lo if not np.isfinite(hi) else 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, fp = f_and_fprime(x)
        if f == 0.0:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        x_new = x - f / fp if fp < 0.0 else np.nan
        if not (lo < x_new < hi):
            if np.isfinite(hi):
                x_new = 0.5 * (lo + hi)
            else:
                x_new = 2.0 * x + 1.0
        if abs(x_new - x) <= eps * (1.0 + abs(x)):
            return x_new
        x = x_new
    raise NoConvergence("Newton root", max_iter, abs(f))


@dataclass
class WfContext:
    """Frozen quantities of one MM iteration plus the live interference state.

    ``rows`` stacks every user's coupling rows; ``owner[r]`` is the user a
    row belongs to.  ``den[r] = gt[r] + sigma2 + interference of row r`` is
    kept in sync with ``lam`` by :meth:`set_coordinate`.
    """

    stats: ChannelStats
    gamma: np.ndarray
    deltas: np.ndarray
    gt: np.ndarray
    lam: np.ndarray
    rows: np.ndarray = field(init=False)
    owner: np.ndarray = field(init=False)
    den: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rows = np.vstack(self.stats.omegas)
        self.owner = np.concatenate([np.full(u.omega.shape[0], k) for k, u in enumerate(self.stats.users)])
        self.lam = np.array(self.lam, dtype=float)
        self._cross = []
        for k in range(self.stats.K):
            idx = np.flatnonzero(self.owner != k)
            per_m = []
            for m in range(self.stats.M):
                r = self.rows[idx, m]
                nz = r > 0
                per_m.append((idx[nz], r[nz]))
            self._cross.append(per_m)
        self.refresh()

    @classmethod
    def build(cls, stats: ChannelStats, deltas, states: list[DEState], alloc) -> "WfContext":
        gamma = np.array([s.gamma for s in states])
        gt = np.concatenate([s.gamma_tilde for s in states])
        return cls(stats, gamma, np.asarray(deltas, dtype=float), gt, _lambdas(alloc))

    def refresh(self):
        kbs = all_kbar(self.stats, self.lam)
        self.den = self.gt + np.concatenate(kbs)

    def set_coordinate(self, k: int, m: int, x: float):
        step = x - self.lam[k, m]
        if step != 0.0:
            idx, r = self._cross[k][m]
            self.den[idx] += r * step
            self.lam[k, m] = x

    def rho(self, k: int, m: int, x: float, level: float) -> tuple[float, float]:
        """Coordinate stationarity function and its derivative at ``lam[k, m] = x``."""
        g = self.gamma[k, m]
        idx, r = self._cross[k][m]
        base = self.den[idx] - r * self.lam[k, m]
        q = 1.0 / (base + r * x)
        a = g / (1.0 + g * x)
        rq = r * q
        return (a - self.deltas[k, m] - level + float(rq.sum()),
                -a * a - float(rq @ rq))

    def gradient(self, level: float = 0.0) -> np.ndarray:
        """Gradient of the surrogate minus ``level * lam`` over every coordinate."""
        w = 1.0 / self.den
        per_user = np.zeros((self.stats.K, self.stats.M))
        np.add.at(per_user, self.owner, self.rows * w[:, None])
        cross = per_user.sum(axis=0)[None, :] - per_user
        return self.gamma / (1.0 + self.gamma * self.lam) + cross - self.deltas - level

    def kkt_residual(self, level: float, cap: float = np.inf) -> float:
        """Max violation of the projected stationarity conditions on ``[0, cap]``."""
        g = self.gradient(level)
        res = np.where(self.lam > 0, np.abs(g), np.maximum(g, 0.0))
        at_cap = self.lam >= cap
        res = np.where(at_cap, np.maximum(-g, 0.0), res)
        return float(res.max()) if res.size else 0.0

    def upsilon(self) -> np.ndarray:
        """Marginal utility of each coordinate at zero power with the others fixed."""
        out = np.empty_like(self.lam)
        for k in range(self.stats.K):
            for m in range(self.stats.M):
                out[k, m] = self.rho(k, m, 0.0, 0.0)[0] + self.deltas[k, m]
        return out

    def sweep(self, level: float, cfg: SolverConfig, cap: float) -> float:
        """One Gauss-Seidel pass over users then beams; returns the largest move."""
        move = 0.0
        K, M = self.lam.shape
        for k in range(K):
            for m in range(M):
                x0 = self.lam[k, m]
                x = newton_root(lambda t: self.rho(k, m, t, level), x0, cfg.eps_newton,
                                cfg.max_iter_newton, 0.0, cap)
                self.set_coordinate(k, m, x)
                move = max(move, abs(x - x0))
        return move

    def coupling(self) -> np.ndarray:
        """Matrix ``Z`` with ``den = gt + sigma2 + Z @ lam.ravel()``."""
        K, M = self.lam.shape
        Z = np.zeros((self.rows.shape[0], K, M))
        for k in range(K):
            mask = self.owner != k
            Z[mask, k, :] = self.rows[mask]
        return Z.reshape(self.rows.shape[0], K * M)

    def value(self, level: float, lam: np.ndarray | None = None) -> float:
        """Surrogate objective minus ``level * sum lam``, up to a constant."""
        lam = self.lam if lam is None else lam
        den = self.gt + np.concatenate(all_kbar(self.stats, lam))
        if np.any(den <= 0):
            return -np.inf
        return float(np.sum(np.log1p(self.gamma * lam)) + np.sum(np.log(den))
                     - np.sum((self.deltas + level) * lam))

    def newton_solve(self, level: float, cfg: SolverConfig, cap: float) -> int:
        """Projected Newton on the joint stationarity system over ``[0, cap]``.

        Coordinates sitting at a bound with the gradient pushing outwards are
        held fixed; the Newton step on the free ones uses the exact Hessian
        ``-diag(a**2) - Z.T diag(1/den**2) Z`` with ``a = gamma/(1+gamma lam)``,
        shifted by the current KKT residual (Levenberg-Marquardt style).
        Steps are projected back onto the box and damped by Armijo backtracking.
        """
        tol = cfg.eps_kkt * max(1.0, abs(level))
        Z = self.coupling()
        # a warm start outside the box would stall the projected line search
        self.lam = np.clip(self.lam, 0.0, cap)
        x = self.lam.ravel().copy()
        gam = self.gamma.ravel()
        for it in range(1, cfg.max_iter_newton + 1):
            self.refresh()
            res = self.kkt_residual(level, cap)
            if res <= tol:
                return it
            g = self.gradient(level).ravel()
            a = gam / (1.0 + gam * x)
            gap = np.abs(x - np.clip(x + g, 0.0, cap))
            eps_b = min(1e-3, float(gap.max()))
            fixed = ((x <= eps_b) & (g <= 0)) | ((x >= cap - eps_b) & (g >= 0))
            free = ~fixed
            step = np.where(fixed, g, 0.0)
            if free.any():
                Zf = Z[:, free] / self.den[:, None]
                H = Zf.T @ Zf
                # damping proportional to the residual keeps flat coordinates from
                # taking huge steps far from the solution and vanishes near it
                H[np.diag_indices_from(H)] += a[free] ** 2 + res + 1e-14 * (1.0 + float(np.max(a ** 2)))
                step[free] = np.linalg.solve(H, g[free])
            f0 = self.value(level)
            t = 1.0
            while True:
                x_new = np.clip(x + t * step, 0.0, cap)
                lam_new = x_new.reshape(self.lam.shape)
                f_new = self.value(level, lam_new)
                gain = float(g @ (x_new - x))
                if f_new >= f0 + 1e-4 * gain - 1e-15 * abs(f0) or t < 1e-12:
                    break
                t *= 0.5
            if t < 1e-12 and not f_new >= f0:
                break
            x = x_new
            self.lam = lam_new.copy()
        self.refresh()
        if self.kkt_residual(level, cap) <= tol:
            return cfg.max_iter_newton
        # fall back to coordinate sweeps from the best point found
        return cfg.max_iter_newton + self.sweep_solve(level, cfg, cap)

    def solve(self, level: float, cfg: SolverConfig, cap: float) -> int:
        """Drive the KKT residual at ``level`` below tolerance with ``cfg.wf_method``.

        Coordinates whose marginal at zero power does not exceed ``level`` end
        at exactly 0; this also settles ties on flat coordinates.
        """
        if cfg.wf_method == "newton":
            n = self.newton_solve(level, cfg, cap)
        else:
            n = self.sweep_solve(level, cfg, cap)
        for k, m in zip(*np.nonzero(self.lam > 0)):
            if self.rho(k, m, 0.0, level)[0] <= 0.0:
                self.set_coordinate(k, m, 0.0)
        self.refresh()
        return n

    def sweep_solve(self, level: float, cfg: SolverConfig, cap: float) -> int:
        """Gauss-Seidel sweeps until the KKT residual at ``level`` is below tolerance."""
        tol = cfg.eps_kkt * max(1.0, abs(level))
        for it in range(1, cfg.max_iter_sweep + 1):
            move = self.sweep(level, cfg, cap)
            if it % 50 == 0:
                self.refresh()
            if self.kkt_residual(level, cap) <= tol or move == 0.0:
                return it
        raise NoConvergence("water-filling sweeps", cfg.max_iter_sweep, self.kkt_residual(level, cap))


def surrogate_numerator(stats: ChannelStats, states: list[DEState], deltas, lam_ref, lam) -> float:
    """MM surrogate of the sum rate around ``lam_ref`` with frozen DE auxiliaries."""
    lam = _lambdas(lam)
    lam_ref = _lambdas(lam_ref)
    kbs = all_kbar(stats, lam)
    kbs_ref = all_kbar(stats, lam_ref)
    total = 0.0
    for k, s in enumerate(states):
        total += (np.sum(np.log1p(s.gamma * lam[k]))
                  + np.sum(np.log1p((s.gamma_tilde + kbs[k] - kbs_ref[k]) / kbs_ref[k]))
                  - np.sum(1.0 - 1.0 / s.phi_tilde))
    total -= float(np.sum(np.asarray(deltas) * (lam - lam_ref)))
    return float(total)


def true_numerator(stats: ChannelStats, deltas, lam_ref, lam, cfg: SolverConfig) -> float:
    """Same expansion but with the DE rate re-solved at ``lam``."""
    lam = _lambdas(lam)
    lam_ref = _lambdas(lam_ref)
    states = de_states(stats, lam, cfg)
    kbs_ref = all_kbar(stats, lam_ref)
    total = 0.0
    for k, s in enumerate(states):
        total += (np.sum(np.log1p(s.gamma * lam[k]))
                  + np.sum(np.log1p((s.gamma_tilde + s.kbar - kbs_ref[k]) / kbs_ref[k]))
                  - np.sum(1.0 - 1.0 / s.phi_tilde))
    total -= float(np.sum(np.asarray(deltas) * (lam - lam_ref)))
    return float(total)


def rho(ctx: WfContext, k: int, m: int, x: float, level: float) -> tuple[float, float]:
    return ctx.rho(k, m, x, level)


def mu_upper_bound(ctx: WfContext) -> float:
    """Smallest multiplier at which every coordinate is certainly inactive.

    Uses the noise-only denominators, which upper-bound every cross term.
    """
    sig = ctx.stats.noise_power
    w = 1.0 / (ctx.gt + sig)
    per_user = np.zeros((ctx.stats.K, ctx.stats.M))
    np.add.at(per_user, ctx.owner, ctx.rows * w[:, None])
    cross = per_user.sum(axis=0)[None, :] - per_user
    return float(np.max(ctx.gamma + cross - ctx.deltas))


@dataclass
class EeWfResult:
    alloc: PowerAllocation
    eta: float
    eta_trace: list[float]
    sweeps: int
    kkt_residual: float
    capped: bool
    dinkelbach_residual: float


def ee_waterfill(stats: ChannelStats, deltas, states: list[DEState], pm: PowerModel, alloc0,
                 cfg: SolverConfig = SolverConfig(), lam_ref=None, cap: float | None = None,
                 eta0: float | None = None) -> EeWfResult:
    """Dinkelbach iterations on the unconstrained EE surrogate.

    ``lam_ref`` is the MM expansion point (defaults to ``alloc0``).  Each
    Dinkelbach step solves its concave parametric problem to KKT tolerance.
    ``cap`` bounds individual beam powers; it only binds when the EE optimum
    spends far more than the budget, in which case the caller switches to the
    budget-constrained problem anyway.
    """
    lam0 = _lambdas(alloc0)
    lam_ref = lam0 if lam_ref is None else _lambdas(lam_ref)
    if cap is None:
        cap = 10.0 * pm.p_max if pm.p_max > 0 else np.inf
    ctx = WfContext.build(stats, deltas, states, lam0)
    refresh = cfg.de_refresh == "dinkelbach"

    def numerator(lam):
        if refresh:
            return true_numerator(stats, deltas, lam_ref, lam, cfg)
        return surrogate_numerator(stats, states, deltas, lam_ref, lam)

    def ratio(lam):
        return numerator(lam) / pm.consumed(float(lam.sum()), stats.M)

    eta = ratio(ctx.lam) if eta0 is None else eta0
    trace = [eta]
    sweeps = 0
    for _ in range(cfg.max_iter_dinkelbach):
        if refresh:
            ctx = WfContext.build(stats, deltas, de_states(stats, ctx.lam, cfg), ctx.lam)
        level = pm.xi * eta
        sweeps += ctx.solve(level, cfg, cap)
        num = numerator(ctx.lam)
        den = pm.consumed(float(ctx.lam.sum()), stats.M)
        f_res = num - eta * den
        eta_new = num / den
        trace.append(eta_new)
        done = abs(eta_new - eta) <= cfg.eps_eta * max(1.0, abs(eta))
        eta = eta_new
        if done:
            break
    else:
        raise NoConvergence("Dinkelbach (water-filling)", cfg.max_iter_dinkelbach,
                            abs(trace[-1] - trace[-2]))
    lam = ctx.lam.copy()
    return EeWfResult(PowerAllocation(lam), eta, trace, sweeps,
                      ctx.kkt_residual(pm.xi * trace[-2], cap), bool(np.any(lam >= cap)), f_res)


@dataclass
class SrWfResult:
    alloc: PowerAllocation
    mu: float
    kkt_residual: float
    total_power: float
    slack: bool
    bisection: list[tuple[float, float]]
    sweeps: int


def sr_waterfill(stats: ChannelStats, deltas, states: list[DEState], p_max: float, alloc0,
                 cfg: SolverConfig = SolverConfig()) -> SrWfResult:
    """Surrogate sum-rate maximisation under ``sum lam <= p_max``.

    Bisection on the budget multiplier ``mu`` over ``[0, mu_upper_bound]``;
    each ``mu`` is solved to KKT tolerance by warm-started sweeps.  When the
    budget is slack at ``mu = 0`` the loop exits there.
    """
    ctx = WfContext.build(stats, deltas, states, alloc0)
    K, M = ctx.lam.shape
    if p_max <= 0:
        ctx.lam[:] = 0.0
        ctx.refresh()
        return SrWfResult(PowerAllocation.zeros(K, M), 0.0, 0.0, 0.0, True, [], 0)
    tol_p = cfg.eps_power * p_max
    # a box of p_max per beam admits false stationary points with one beam pinned
    # at the bound; at 2 * p_max a pinned beam already means the budget is exceeded
    cap = 2.0 * p_max
    mu_hi = mu_upper_bound(ctx)
    sweeps = ctx.solve(0.0, cfg, cap)
    p = float(ctx.lam.sum())
    history = [(0.0, p)]
    if mu_hi <= 0 or p <= p_max + tol_p:
        return SrWfResult(PowerAllocation(ctx.lam.copy()), 0.0, ctx.kkt_residual(0.0, cap), p, True,
                          history, sweeps)
    mu_lo = 0.0
    for _ in range(cfg.max_iter_bisection):
        mu = 0.5 * (mu_lo + mu_hi)
        sweeps += ctx.solve(mu, cfg, cap)
        p = float(ctx.lam.sum())
        history.append((mu, p))
        if abs(p - p_max) <= tol_p or mu_hi - mu_lo <= 1e-15 * mu_hi:
            break
        if p < p_max:
            mu_hi = mu
        else:
            mu_lo = mu
    else:
        raise NoConvergence("budget bisection", cfg.max_iter_bisection, abs(p - p_max))
    if abs(p - p_max) > tol_p:
        # bracket collapsed at KKT precision; land exactly on the budget
        ctx.lam *= p_max / p
        ctx.refresh()
        p = float(ctx.lam.sum())
    return SrWfResult(PowerAllocation(ctx.lam.copy()), mu, ctx.kkt_residual(mu, cap), p, False,
                      history, sweeps)
