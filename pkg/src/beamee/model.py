"""Core value types shared by every solver.

All powers are in watts. dBm only appears at the configuration boundary
(:func:`dbm_to_watts`). Rates are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class BeamEEError(Exception):
    """Base class for all package errors."""


class ValidationError(BeamEEError):
    pass


class NonFiniteEntry(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class EmptyUser(ValidationError):
    pass


class ZeroCouplingRowAll(ValidationError):
    """Every entry of a coupling matrix is zero, so the user is unreachable."""


class DimensionMismatch(BeamEEError, ValueError):
    pass


class NoConvergence(BeamEEError):
    """An iterative routine hit its iteration cap.

    ``residual`` carries the last convergence metric so callers can report it.
    """

    def __init__(self, what: str, iterations: int, residual: float):
        super().__init__(f"{what} did not converge after {iterations} iterations "
                         f"(residual {residual:.3e})")
        self.what = what
        self.iterations = iterations
        self.residual = residual


class NumericalFailure(BeamEEError):
    pass


def dbm_to_watts(x):
    """Convert dBm to watts; works elementwise on arrays."""
    if np.ndim(x):
        return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def watts_to_dbm(p):
    return 10.0 * np.log10(p) + 30.0


@dataclass(frozen=True)
class UserStats:
    """Beam-domain statistics of one user terminal.

    ``omega[n, m]`` is the average power gain between receive eigen-direction
    ``n`` and transmit beam ``m``.
    """

    omega: np.ndarray

    def __post_init__(self):
        om = np.array(self.omega, dtype=float)
        if om.ndim != 2:
            raise DimensionMismatch(f"omega must be 2-D, got shape {om.shape}")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @property
    def num_rx_antennas(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class ChannelStats:
    num_bs_antennas: int
    users: tuple[UserStats, ...]
    noise_power: float

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        for u in self.users:
            if u.omega.shape[1] != self.num_bs_antennas:
                raise DimensionMismatch(
                    f"omega has {u.omega.shape[1]} columns, expected M={self.num_bs_antennas}")

    @classmethod
    def from_omegas(cls, omegas: Sequence, noise_power: float) -> "ChannelStats":
        users = tuple(UserStats(np.atleast_2d(np.asarray(o, dtype=float))) for o in omegas)
        if not users:
            raise EmptyUser("at least one user is required")
        return cls(users[0].omega.shape[1], users, float(noise_power))

    @property
    def M(self) -> int:
        return self.num_bs_antennas

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def omegas(self) -> list[np.ndarray]:
        return [u.omega for u in self.users]

    def normalized(self) -> "ChannelStats":
        """Equivalent statistics with unit noise power.

        Rates depend on ``omega * lambda / sigma2`` only, so dividing every
        coupling matrix by the noise power leaves all rates, allocations (in
        watts) and EE values unchanged while keeping intermediate products
        away from underflow.
        """
        s = self.noise_power
        return ChannelStats(self.M, tuple(UserStats(u.omega / s) for u in self.users), 1.0)

    def __eq__(self, other):
        if not isinstance(other, ChannelStats):
            return NotImplemented
        return (self.M == other.M and self.noise_power == other.noise_power
                and self.K == other.K
                and all(np.array_equal(a, b) for a, b in zip(self.omegas, other.omegas)))


@dataclass(frozen=True)
class PowerModel:
    """Affine power consumption ``xi * P + M * p_c + p_s``."""

    xi: float = 5.0
    p_c: float = 1.0
    p_s: float = 10.0
    p_max: float = 1.0

    @classmethod
    def from_dbm(cls, xi=5.0, p_c_dbm=30.0, p_s_dbm=40.0, p_max_dbm=30.0) -> "PowerModel":
        return cls(xi, dbm_to_watts(p_c_dbm), dbm_to_watts(p_s_dbm), dbm_to_watts(p_max_dbm))

    def consumed(self, transmit_power: float, M: int) -> float:
        return self.xi * transmit_power + M * self.p_c + self.p_s

    def with_pmax(self, p_max: float) -> "PowerModel":
        return replace(self, p_max=float(p_max))


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user beam powers; ``lambdas[k, m]`` is the power of UT k on beam m."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        if lam.ndim != 2:
            raise DimensionMismatch(f"lambdas must be K x M, got shape {lam.shape}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValidationError("power allocation entries must be finite and >= 0")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def zeros(cls, K: int, M: int) -> "PowerAllocation":
        return cls(np.zeros((K, M)))

    @classmethod
    def uniform(cls, K: int, M: int, total: float) -> "PowerAllocation":
        return cls(np.full((K, M), total / (K * M)))

    @property
    def K(self) -> int:
        return self.lambdas.shape[0]

    @property
    def M(self) -> int:
        return self.lambdas.shape[1]

    def total_power(self) -> float:
        return float(self.lambdas.sum())

    def __eq__(self, other):
        if not isinstance(other, PowerAllocation):
            return NotImplemented
        return np.array_equal(self.lambdas, other.lambdas)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for every iterative loop.

    ``eps_mm`` is relative (EE change over |EE|); ``eps_power`` is relative to
    the power budget; the remaining tolerances are absolute in the units of
    the quantity they test.  ``mm_backtrack`` caps the halvings of the MM
    step when a full step would lower the objective (0 disables the guard).
    """

    eps_mm: float = 1e-4
    eps_dinkelbach: float = 1e-10
    eps_de: float = 1e-10
    eps_newton: float = 1e-13
    eps_eta: float = 1e-12
    eps_power: float = 1e-10
    eps_kkt: float = 1e-9
    max_iter_mm: int = 50
    max_iter_dinkelbach: int = 100
    max_iter_de: int = 5000
    max_iter_newton: int = 200
    max_iter_sweep: int = 20000
    max_iter_bisection: int = 200
    max_iter_pg: int = 200000
    de_damping: float = 1.0
    de_refresh: str = "mm"
    mc_samples: int = 10000
    seed: int = 0
    pg_tol: float = 1e-7
    mm_backtrack: int = 40
    wf_method: str = "newton"

    def __post_init__(self):
        for name in ("eps_mm", "eps_dinkelbach", "eps_de", "eps_newton", "eps_eta",
                     "eps_power", "eps_kkt", "pg_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("max_iter_mm", "max_iter_dinkelbach", "max_iter_de", "max_iter_newton",
                     "max_iter_sweep", "max_iter_bisection", "max_iter_pg", "mc_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.wf_method not in ("newton", "gauss-seidel"):
            raise ValueError("wf_method must be 'newton' or 'gauss-seidel'")
        if self.mm_backtrack < 0:
            raise ValueError("mm_backtrack must be >= 0")
        if not 0 < self.de_damping <= 1:
            raise ValueError("de_damping must lie in (0, 1]")
        if self.de_refresh not in ("mm", "dinkelbach"):
            raise ValueError("de_refresh must be 'mm' or 'dinkelbach'")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


def validate(stats: ChannelStats, pm: PowerModel | None = None) -> None:
    """Check the invariants of ``stats`` (and ``pm``); raise the first violation."""
    if stats.K == 0:
        raise EmptyUser("no users")
    if not (np.isfinite(stats.noise_power) and stats.noise_power > 0):
        raise ValidationError("noise power must be finite and > 0")
    for k, u in enumerate(stats.users):
        om = u.omega
        if om.shape[0] == 0 or om.shape[1] == 0:
            raise EmptyUser(f"user {k} has an empty coupling matrix")
        if om.shape[1] != stats.M:
            raise DimensionMismatch(f"user {k}: omega has {om.shape[1]} columns, M={stats.M}")
        if not np.all(np.isfinite(om)):
            raise NonFiniteEntry(f"user {k}: omega has non-finite entries")
        if np.any(om < 0):
            raise NegativeEntry(f"user {k}: omega has negative entries")
        if not np.any(om > 0):
            raise ZeroCouplingRowAll(f"user {k}: omega is all zeros")
    if pm is not None:
        if pm.xi < 1 or not np.isfinite(pm.xi):
            raise ValidationError("xi must be >= 1")
        if pm.p_c < 0 or pm.p_s < 0:
            raise NegativeEntry("circuit powers must be >= 0")
        if not pm.p_max >= 0:
            raise ValidationError("p_max must be >= 0")
        if pm.consumed(0.0, stats.M) <= 0:
            raise ValidationError("consumed power must be > 0 at zero transmit power")
