"""Diagonal operators and closed-form scalar quantities.

Every covariance-like matrix in the beam domain is diagonal, so it is stored
as the vector of its diagonal. Determinants become sums of logs.
"""

from __future__ import annotations

import numpy as np

from .model import ChannelStats, DimensionMismatch, PowerAllocation, PowerModel


def pi_op(omega: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Diagonal of ``E{G diag(x) G^H}``: entry n is ``sum_m omega[n, m] x[m]``."""
    x = np.asarray(x, dtype=float)
    if omega.shape[1] != x.shape[-1]:
        raise DimensionMismatch(f"pi_op: omega is {omega.shape}, x has length {x.shape[-1]}")
    return omega @ x


def xi_op(omega: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Diagonal of ``E{G^H diag(y) G}``: entry m is ``sum_n omega[n, m] y[n]``."""
    y = np.asarray(y, dtype=float)
    if omega.shape[0] != y.shape[-1]:
        raise DimensionMismatch(f"xi_op: omega is {omega.shape}, y has length {y.shape[-1]}")
    return y @ omega


def _check_alloc(stats: ChannelStats, lam: np.ndarray) -> None:
    if lam.shape != (stats.K, stats.M):
        raise DimensionMismatch(f"allocation is {lam.shape}, expected {(stats.K, stats.M)}")


def _lambdas(alloc) -> np.ndarray:
    return alloc.lambdas if isinstance(alloc, PowerAllocation) else np.asarray(alloc, dtype=float)


def kbar(stats: ChannelStats, alloc, k: int) -> np.ndarray:
    """Interference-plus-noise diagonal seen by user ``k``."""
    lam = _lambdas(alloc)
    _check_alloc(stats, lam)
    interf = lam.sum(axis=0) - lam[k]
    return stats.noise_power + pi_op(stats.users[k].omega, interf)


def all_kbar(stats: ChannelStats, alloc) -> list[np.ndarray]:
    lam = _lambdas(alloc)
    _check_alloc(stats, lam)
    tot = lam.sum(axis=0)
    return [stats.noise_power + u.omega @ (tot - lam[k]) for k, u in enumerate(stats.users)]


def rate_minus(stats: ChannelStats, alloc, k: int) -> float:
    """``log det`` of the interference-plus-noise covariance of user ``k`` (nats)."""
    return float(np.sum(np.log(kbar(stats, alloc, k))))


def delta_k(stats: ChannelStats, alloc, k: int) -> np.ndarray:
    """Gradient of ``sum_k' rate_minus(k')`` with respect to the beam powers of user ``k``.

    This is the slope of the first-order expansion used by the MM outer loop.
    """
    kb = all_kbar(stats, alloc)
    d = np.zeros(stats.M)
    for kp, u in enumerate(stats.users):
        if kp != k:
            d += xi_op(u.omega, 1.0 / kb[kp])
    return d


def all_deltas(stats: ChannelStats, alloc) -> np.ndarray:
    """``delta_k`` for every user stacked as a K x M array."""
    kb = all_kbar(stats, alloc)
    per_user = np.array([xi_op(u.omega, 1.0 / kb[kp]) for kp, u in enumerate(stats.users)])
    return per_user.sum(axis=0)[None, :] - per_user


def ee_value(stats: ChannelStats, pm: PowerModel, alloc, rates) -> float:
    """Sum of ``rates`` divided by the consumed power of ``alloc`` (nats/J)."""
    lam = _lambdas(alloc)
    return float(np.sum(rates)) / pm.consumed(float(lam.sum()), stats.M)
