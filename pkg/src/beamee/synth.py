"""Synthetic beam-domain statistics and JSON file I/O.

The generators stand in for a geometric channel simulator: each user sees a
cluster of strong beams around a centre index, with a chosen decay profile.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import BeamEEError, ChannelStats, PowerAllocation, UserStats, dbm_to_watts

PROFILES = ("uniform", "exponential-beam", "sparse-beam")


class InvalidSpec(BeamEEError, ValueError):
    pass


class ParseError(BeamEEError, ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    M: int = 16
    K: int = 4
    N: int | tuple[int, ...] = 2
    profile: str = "exponential-beam"
    beam_centers: tuple[float, ...] | None = None
    spread: float | tuple[float, ...] | None = None
    window: int | None = None
    pathloss_db: float | tuple[float, ...] = -120.0
    noise_dbm: float = -105.0
    jitter: float = 0.3
    seed: int = 0

    def per_user(self, value, name):
        if isinstance(value, (tuple, list)):
            if len(value) != self.K:
                raise InvalidSpec(f"{name} has {len(value)} entries, K={self.K}")
            return list(value)
        return [value] * self.K


def generate(spec: ScenarioSpec) -> ChannelStats:
    """Coupling matrices for ``spec``; deterministic per ``spec.seed``.

    Each matrix is scaled so that ``sum(omega) = N * M * 10**(pathloss_db/10)``.
    Without explicit ``beam_centers`` user ``k`` is placed in the ``k``-th of
    ``K`` equal beam sectors, so users overlap only through profile tails.
    """
    if spec.M < 1 or spec.K < 1:
        raise InvalidSpec("M and K must be >= 1")
    if spec.profile not in PROFILES:
        raise InvalidSpec(f"unknown profile {spec.profile!r}; choose from {PROFILES}")
    Ns = spec.per_user(spec.N, "N")
    if any(int(n) < 1 for n in Ns):
        raise InvalidSpec("N must be >= 1")
    rng = np.random.default_rng(spec.seed)
    M = spec.M
    if spec.beam_centers is not None:
        centers = spec.per_user(spec.beam_centers, "beam_centers")
    else:
        # one angular sector per user, centre drawn from the middle half of it
        centers = list((np.arange(spec.K) + 0.25 + 0.5 * rng.uniform(0, 1, spec.K)) * M / spec.K)
    spreads = spec.per_user(spec.spread if spec.spread is not None else max(M / 8.0, 0.5), "spread")
    losses = spec.per_user(spec.pathloss_db, "pathloss_db")
    window = spec.window if spec.window is not None else max(1, M // 4)
    if window < 1:
        raise InvalidSpec("window must be >= 1")
    m = np.arange(M)
    users = []
    for k in range(spec.K):
        N = int(Ns[k])
        if spreads[k] <= 0:
            raise InvalidSpec("spread must be > 0")
        if spec.profile == "uniform":
            base = np.ones((N, M))
        else:
            prof = np.exp(-np.abs(m - centers[k]) / spreads[k])
            base = prof[None, :] * np.exp(spec.jitter * rng.standard_normal((N, 1)))
            if spec.profile == "sparse-beam":
                c = int(np.clip(np.floor(centers[k]), 0, M - 1))
                lo = max(0, c - window // 2)
                mask = np.zeros(M, dtype=bool)
                mask[lo:min(M, lo + window)] = True
                base[:, ~mask] = 0.0
        base *= N * M * 10.0 ** (losses[k] / 10.0) / base.sum()
        users.append(UserStats(base))
    return ChannelStats(M, tuple(users), dbm_to_watts(spec.noise_dbm))


def stats_to_dict(stats: ChannelStats) -> dict:
    return {"M": stats.M, "sigma2": stats.noise_power,
            "users": [{"N": u.num_rx_antennas, "omega": u.omega.tolist()} for u in stats.users]}


def alloc_to_dict(alloc: PowerAllocation) -> dict:
    return {"K": alloc.K, "M": alloc.M, "lambdas": alloc.lambdas.tolist()}


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    return obj[key]


def _matrix(value, rows, cols, where) -> np.ndarray:
    """Accept nested rows or a flat row-major list."""
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected an array")
    if value and all(isinstance(r, list) for r in value):
        if len(value) != rows:
            raise ParseError(f"{where}: {len(value)} rows, declared {rows}")
        for i, r in enumerate(value):
            if len(r) != cols:
                raise ParseError(f"{where}[{i}]: row length {len(r)}, declared {cols}")
        flat = [x for r in value for x in r]
    else:
        if len(value) != rows * cols:
            raise ParseError(f"{where}: {len(value)} entries, declared {rows}x{cols}")
        flat = value
    try:
        return np.array(flat, dtype=float).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: non-numeric entry") from exc


def stats_from_dict(obj: dict) -> ChannelStats:
    M = _require(obj, "M", "stats")
    sigma2 = _require(obj, "sigma2", "stats")
    users = _require(obj, "users", "stats")
    if not isinstance(M, int) or M < 1:
        raise ParseError("stats.M: expected a positive integer")
    if not isinstance(users, list) or not users:
        raise ParseError("stats.users: expected a non-empty array")
    out = []
    for k, u in enumerate(users):
        where = f"users[{k}]"
        N = _require(u, "N", where)
        if not isinstance(N, int) or N < 1:
            raise ParseError(f"{where}.N: expected a positive integer")
        out.append(UserStats(_matrix(_require(u, "omega", where), N, M, f"{where}.omega")))
    return ChannelStats(M, tuple(out), float(sigma2))


def alloc_from_dict(obj: dict) -> PowerAllocation:
    K = _require(obj, "K", "allocation")
    M = _require(obj, "M", "allocation")
    lam = _matrix(_require(obj, "lambdas", "allocation"), K, M, "allocation.lambdas")
    return PowerAllocation(lam)


def dumps(obj) -> str:
    if isinstance(obj, ChannelStats):
        d = stats_to_dict(obj)
    elif isinstance(obj, PowerAllocation):
        d = alloc_to_dict(obj)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")
    return json.dumps(d, indent=1) + "\n"


def _loads(text: str, source: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load_stats(path) -> ChannelStats:
    return stats_from_dict(_loads(Path(path).read_text(encoding="utf-8"), str(path)))


def load_alloc(path) -> PowerAllocation:
    return alloc_from_dict(_loads(Path(path).read_text(encoding="utf-8"), str(path)))


def load(path):
    """Load either file kind, telling them apart by their fields."""
    obj = _loads(Path(path).read_text(encoding="utf-8"), str(path))
    if isinstance(obj, dict) and "lambdas" in obj:
        return alloc_from_dict(obj)
    return stats_from_dict(obj)
