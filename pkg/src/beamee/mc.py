"""Monte-Carlo ergodic rates and the beam-domain optimality check.

Channel draws are indexed by ``(seed, user, sample)``: each index owns its
own Philox stream, so any subset of samples can be regenerated in any order
and two allocations evaluated with the same seed see the same channels
(common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ChannelStats, NumericalFailure, PowerModel, SolverConfig
from .ops import _lambdas, all_kbar, kbar


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int


def channel_stream(seed: int, user: int, index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (user << 40) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_beam_channel(omega: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw of G with independent CN(0, omega[n, m]) entries."""
    scale = np.sqrt(omega / 2.0)
    re = rng.standard_normal(omega.shape)
    im = rng.standard_normal(omega.shape)
    return scale * re + 1j * (scale * im)


def channel_samples(omega: np.ndarray, seed: int, user: int, n: int, start: int = 0) -> np.ndarray:
    """Stack of ``n`` draws for ``user``, samples ``start .. start+n-1``."""
    return np.stack([sample_beam_channel(omega, channel_stream(seed, user, start + s))
                     for s in range(n)])


def _net_logdet(kb: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-sample ``log det(I + D^-1/2 A A^H D^-1/2)`` with ``D = diag(kb)``."""
    B = A / np.sqrt(kb)[None, :, None]
    C = B @ B.conj().transpose(0, 2, 1)
    C[:, np.arange(C.shape[1]), np.arange(C.shape[1])] += 1.0
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("sampled covariance is not positive definite") from exc
    return 2.0 * np.sum(np.log(np.abs(np.diagonal(L, axis1=1, axis2=2))), axis=1)


def _estimate(x: np.ndarray) -> McEstimate:
    n = x.size
    se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(np.mean(x)), se, n)


def mc_net_rate_samples(stats: ChannelStats, alloc, k: int, cfg: SolverConfig = SolverConfig(),
                        G: np.ndarray | None = None) -> np.ndarray:
    lam = _lambdas(alloc)
    n = cfg.mc_samples
    if not np.any(lam[k] > 0):
        return np.zeros(n)
    if G is None:
        G = channel_samples(stats.users[k].omega, cfg.seed, k, n)
    return _net_logdet(kbar(stats, lam, k), G * np.sqrt(lam[k])[None, None, :])


def mc_rate_plus(stats: ChannelStats, alloc, k: int, cfg: SolverConfig = SolverConfig()) -> McEstimate:
    """Sample estimate of ``E log det(K_k + G_k diag(lam_k) G_k^H)`` in nats."""
    base = float(np.sum(np.log(kbar(stats, alloc, k))))
    est = _estimate(mc_net_rate_samples(stats, alloc, k, cfg))
    return McEstimate(base + est.mean, est.std_error, est.samples)


def mc_net_rate(stats: ChannelStats, alloc, k: int, cfg: SolverConfig = SolverConfig()) -> McEstimate:
    return _estimate(mc_net_rate_samples(stats, alloc, k, cfg))


def mc_ee(stats: ChannelStats, pm: PowerModel, alloc, cfg: SolverConfig = SolverConfig()) -> McEstimate:
    """EE with Monte-Carlo rates; the std error accounts for per-sample pairing across users."""
    lam = _lambdas(alloc)
    per_sample = sum(mc_net_rate_samples(stats, lam, k, cfg) for k in range(stats.K))
    est = _estimate(np.asarray(per_sample) / pm.consumed(float(lam.sum()), stats.M))
    return est


def haar_unitary(M: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))[None, :]


def _dense_sum_rate_samples(stats: ChannelStats, covs: list[np.ndarray], Gs: list[np.ndarray]) -> np.ndarray:
    """Per-sample sum rate for dense beam-domain covariances.

    Only the diagonals of the other users' covariances enter the
    interference term, since the beam-domain entries are independent.
    """
    diags = np.array([np.real(np.diagonal(Q)) for Q in covs])
    kbs = all_kbar(stats, diags)
    total = np.zeros(Gs[0].shape[0])
    for k, (Q, G) in enumerate(zip(covs, Gs)):
        w, V = np.linalg.eigh(Q)
        B = V * np.sqrt(np.clip(w, 0.0, None))[None, :]
        total += _net_logdet(kbs[k], G @ B)
    return total


@dataclass
class Prop1Report:
    """Rotated-covariance EE minus beam-domain EE, one entry per rotation.

    ``diff_nulled`` compares each rotated covariance against the diagonal
    covariance obtained by zeroing its off-diagonal entries (same transmit
    power); ``diff_alloc`` compares against the input allocation itself.
    """

    diff_nulled: list[float] = field(default_factory=list)
    se_nulled: list[float] = field(default_factory=list)
    diff_alloc: list[float] = field(default_factory=list)
    se_alloc: list[float] = field(default_factory=list)
    beam_ee: float = 0.0

    @property
    def max_difference(self) -> float:
        return max(self.diff_nulled) if self.diff_nulled else 0.0

    @property
    def max_excess_in_se(self) -> float:
        """Largest ``diff / se`` over rotations (0 where the difference is exactly 0)."""
        out = 0.0
        for d, s in zip(self.diff_nulled, self.se_nulled):
            if d > 0:
                out = max(out, d / s if s > 0 else np.inf)
        return out

    def passed(self, n_se: float = 3.0) -> bool:
        """No rotation gains more than ``n_se`` standard errors (plus a rounding floor)."""
        floor = 1e-12 * max(abs(self.beam_ee), 1e-300)
        return all(d <= n_se * s + floor for d, s in zip(self.diff_nulled, self.se_nulled))


def prop1_validate(stats: ChannelStats, pm: PowerModel, alloc, num_rotations: int,
                   rng: np.random.Generator, cfg: SolverConfig = SolverConfig(),
                   rotations: list[np.ndarray] | None = None) -> Prop1Report:
    """Check that rotating beam-domain covariances never helps beyond MC noise.

    Every rotation ``Psi`` maps each ``diag(lam_k)`` to ``Psi diag(lam_k) Psi^H``.
    All comparisons reuse the same channel draws.
    """
    lam = _lambdas(alloc)
    n = cfg.mc_samples
    Gs = [channel_samples(u.omega, cfg.seed, k, n) for k, u in enumerate(stats.users)]
    den = pm.consumed(float(lam.sum()), stats.M)
    base_covs = [np.diag(l).astype(complex) for l in lam]
    base = _dense_sum_rate_samples(stats, base_covs, Gs) / den
    report = Prop1Report(beam_ee=float(base.mean()))
    if rotations is None:
        rotations = [haar_unitary(stats.M, rng) for _ in range(num_rotations)]
    for Psi in rotations:
        rot = [Psi @ C @ Psi.conj().T for C in base_covs]
        nulled = [np.diag(np.real(np.diagonal(Q))).astype(complex) for Q in rot]
        r_rot = _dense_sum_rate_samples(stats, rot, Gs) / den
        r_null = _dense_sum_rate_samples(stats, nulled, Gs) / den
        for diffs, ses, ref in ((report.diff_nulled, report.se_nulled, r_null),
                                (report.diff_alloc, report.se_alloc, base)):
            est = _estimate(r_rot - ref)
            diffs.append(est.mean)
            ses.append(est.std_error)
    return report
