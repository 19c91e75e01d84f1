"""Deterministic-equivalent (DE) ergodic rates.

For user k with beam powers ``lam`` and interference-plus-noise diagonal
``kb`` the DE auxiliaries solve the coupled system

    gamma       = Xi(1 / (phi_tilde * kb))
    phi         = 1 + gamma * lam
    gamma_tilde = Pi(lam / phi)
    phi_tilde   = 1 + gamma_tilde / kb

and the DE of ``E log det(K + G diag(lam) G^H)`` is

    sum log(1 + gamma lam) + sum log(gamma_tilde + kb) - sum (1 - 1/phi_tilde).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelStats, NoConvergence, PowerModel, SolverConfig
from .ops import _lambdas, all_kbar, kbar, pi_op, rate_minus, xi_op


@dataclass(frozen=True)
class DEState:
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    phi: np.ndarray
    phi_tilde: np.ndarray
    kbar: np.ndarray
    lam: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def _picard(omega, lam, kb, phi_tilde):
    gamma = xi_op(omega, 1.0 / (phi_tilde * kb))
    phi = 1.0 + gamma * lam
    gamma_tilde = pi_op(omega, lam / phi)
    return gamma, phi, gamma_tilde, 1.0 + gamma_tilde / kb


def fixed_point_residual(omega: np.ndarray, state: DEState) -> float:
    """Relative max change of ``phi_tilde`` after one more Picard step from ``state``."""
    *_, pt = _picard(omega, state.lam, state.kbar, state.phi_tilde)
    return float(np.max(np.abs(pt - state.phi_tilde))) / max(1.0, float(np.max(np.abs(pt))))


def solve_fixed_point(omega: np.ndarray, lam: np.ndarray, kb: np.ndarray,
                      cfg: SolverConfig = SolverConfig()) -> DEState:
    """Picard iteration on ``phi_tilde`` from the all-ones start.

    The residual is the max change of ``phi_tilde`` relative to
    ``max(1, |phi_tilde|)``.  The damping factor starts at ``cfg.de_damping``
    and is halved when the residual grows while still well above tolerance,
    which only happens on oscillation; growth at rounding level is ignored.
    """
    lam = np.asarray(lam, dtype=float)
    theta = cfg.de_damping
    pt = np.ones(omega.shape[0])
    prev = np.inf
    res = np.inf
    for it in range(1, cfg.max_iter_de + 1):
        *_, pt_new = _picard(omega, lam, kb, pt)
        if theta < 1.0:
            pt_new = theta * pt_new + (1.0 - theta) * pt
        res = float(np.max(np.abs(pt_new - pt))) / max(1.0, float(np.max(np.abs(pt_new))))
        pt = pt_new
        if res <= cfg.eps_de:
            break
        if res > prev and res > 1e3 * cfg.eps_de and theta > 1.0 / 1024:
            theta *= 0.5
        prev = res
    else:
        raise NoConvergence("DE fixed point", cfg.max_iter_de, res)
    gamma = xi_op(omega, 1.0 / (pt * kb))
    phi = 1.0 + gamma * lam
    gamma_tilde = pi_op(omega, lam / phi)
    return DEState(gamma, gamma_tilde, phi, pt, kb, lam, it, res)


def de_fixed_point(stats: ChannelStats, alloc, k: int,
                   cfg: SolverConfig = SolverConfig()) -> DEState:
    lam = _lambdas(alloc)
    return solve_fixed_point(stats.users[k].omega, lam[k], kbar(stats, alloc, k), cfg)


def de_states(stats: ChannelStats, alloc, cfg: SolverConfig = SolverConfig()) -> list[DEState]:
    lam = _lambdas(alloc)
    kbs = all_kbar(stats, lam)
    return [solve_fixed_point(u.omega, lam[k], kbs[k], cfg) for k, u in enumerate(stats.users)]


def de_rate_plus(stats: ChannelStats, alloc, k: int, state: DEState) -> float:
    lam = _lambdas(alloc)[k]
    return float(np.sum(np.log1p(state.gamma * lam))
                 + np.sum(np.log(state.gamma_tilde + state.kbar))
                 - np.sum(1.0 - 1.0 / state.phi_tilde))


def de_net_rates(stats: ChannelStats, alloc, cfg: SolverConfig = SolverConfig(),
                 states: list[DEState] | None = None) -> np.ndarray:
    """Per-user DE rates ``R+ - R-`` in nats.

    Computed as ``log1p`` of the relative increase over the interference
    level so tiny powers do not cancel catastrophically.
    """
    if states is None:
        states = de_states(stats, alloc, cfg)
    lam = _lambdas(alloc)
    return np.array([
        np.sum(np.log1p(s.gamma * lam[k])) + np.sum(np.log1p(s.gamma_tilde / s.kbar))
        - np.sum(1.0 - 1.0 / s.phi_tilde)
        for k, s in enumerate(states)])


def de_ee(stats: ChannelStats, pm: PowerModel, alloc, cfg: SolverConfig = SolverConfig()) -> float:
    lam = _lambdas(alloc)
    return float(de_net_rates(stats, lam, cfg).sum()) / pm.consumed(float(lam.sum()), stats.M)


def de_gradient_own(state: DEState, k: int | None = None) -> np.ndarray:
    """Gradient of the DE rate of a user with respect to its own beam powers.

    ``k`` is accepted for symmetry with :func:`de_gradient_cross`; the state
    already belongs to one user.
    """
    return state.gamma / (1.0 + state.gamma * state.lam)


def de_gradient_cross(stats: ChannelStats, alloc, states: list[DEState], k: int) -> np.ndarray:
    """Gradient of ``sum_{k' != k} R+_{k'}`` with respect to the beam powers of user ``k``."""
    g = np.zeros(stats.M)
    for kp, (u, s) in enumerate(zip(stats.users, states)):
        if kp != k:
            g += xi_op(u.omega, 1.0 / (s.gamma_tilde + s.kbar))
    return g


__all__ = ["DEState", "de_fixed_point", "de_states", "de_rate_plus", "de_net_rates", "de_ee",
           "de_gradient_own", "de_gradient_cross", "solve_fixed_point", "fixed_point_residual",
           "rate_minus"]
