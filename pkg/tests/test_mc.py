import numpy as np
import pytest
from scipy.special import exp1

from beamee import (ChannelStats, PowerModel, SolverConfig, de_net_rates, mc_ee, mc_net_rate,
                    mc_rate_plus, prop1_validate, rate_minus)
from beamee.mc import channel_samples, channel_stream, haar_unitary, sample_beam_channel

from conftest import random_alloc, random_stats


def test_sampling_is_deterministic():
    om = np.array([[1.0, 2.0], [0.5, 0.0]])
    a = sample_beam_channel(om, channel_stream(7, 1, 3))
    b = sample_beam_channel(om, channel_stream(7, 1, 3))
    np.testing.assert_array_equal(a, b)
    assert a[1, 1] == 0
    c = sample_beam_channel(om, channel_stream(7, 1, 4))
    assert not np.array_equal(a, c)


def test_sample_subsets_regenerate():
    om = np.ones((2, 3))
    full = channel_samples(om, 3, 0, 10)
    np.testing.assert_array_equal(full[4:7], channel_samples(om, 3, 0, 3, start=4))


def test_power_mean_matches_variance():
    om = np.array([[0.5, 2.0, 0.0]])
    G = channel_samples(om, 11, 0, 100_000)
    p = np.abs(G) ** 2
    mean = p.mean(axis=0)
    se = p.std(axis=0, ddof=1) / np.sqrt(p.shape[0])
    assert np.all(np.abs(mean[0, :2] - om[0, :2]) <= 3 * se[0, :2])
    assert mean[0, 2] == 0


def test_scalar_rate_matches_exponential_integral():
    stats = ChannelStats.from_omegas([[[2.0]]], 1.0)
    est = mc_rate_plus(stats, np.array([[1.0]]), 0, SolverConfig(mc_samples=40_000, seed=5))
    exact = np.exp(0.5) * exp1(0.5)
    assert exact == pytest.approx(0.9229, abs=1e-4)
    assert abs(est.mean - exact) <= 4 * est.std_error
    pm = PowerModel(xi=2.0, p_c=0.5, p_s=1.0)
    ee = mc_ee(stats, pm, np.array([[1.0]]), SolverConfig(mc_samples=40_000, seed=5))
    assert ee.mean == pytest.approx(est.mean / 3.5, rel=1e-12)


def test_zero_power_user_is_exact():
    stats = random_stats(2, K=2, M=3)
    lam = np.zeros((2, 3))
    lam[1] = 1.0
    est = mc_rate_plus(stats, lam, 0, SolverConfig(mc_samples=50))
    assert est.mean == pytest.approx(rate_minus(stats, lam, 0), rel=1e-14)
    assert est.std_error == 0
    assert mc_ee(stats, PowerModel(), np.zeros((2, 3)), SolverConfig(mc_samples=50)).mean == 0


def test_estimates_reproducible():
    stats = random_stats(4, K=2, M=4)
    lam = random_alloc(4, 2, 4)
    cfg = SolverConfig(mc_samples=500, seed=9)
    assert mc_net_rate(stats, lam, 1, cfg) == mc_net_rate(stats, lam, 1, cfg)


def test_std_error_halves_with_four_times_samples():
    stats = random_stats(6, K=2, M=4)
    lam = random_alloc(6, 2, 4, 2.0)
    ratios = []
    for seed in range(5):
        a = mc_net_rate(stats, lam, 0, SolverConfig(mc_samples=1000, seed=seed)).std_error
        b = mc_net_rate(stats, lam, 0, SolverConfig(mc_samples=4000, seed=seed)).std_error
        ratios.append(a / b)
    assert np.mean(ratios) == pytest.approx(2.0, rel=0.2)


def test_user_reordering_leaves_ee_unchanged():
    stats = random_stats(8, K=3, M=4)
    lam = random_alloc(8, 3, 4, 2.0)
    pm = PowerModel()
    swapped = ChannelStats.from_omegas(stats.omegas[::-1], stats.noise_power)
    cfg = SolverConfig(mc_samples=20_000, seed=1)
    a, b = mc_ee(stats, pm, lam, cfg), mc_ee(swapped, pm, lam[::-1], cfg)
    assert abs(a.mean - b.mean) <= 4 * np.hypot(a.std_error, b.std_error)


def test_brackets_deterministic_equivalent_for_large_arrays():
    stats = random_stats(10, K=2, M=32, N=4)
    lam = random_alloc(10, 2, 32, 2.0)
    cfg = SolverConfig(mc_samples=4000, seed=2)
    de = de_net_rates(stats, lam)
    for k in range(2):
        est = mc_net_rate(stats, lam, k, cfg)
        assert abs(est.mean - de[k]) / est.mean <= 0.05


def test_haar_unitary_is_unitary():
    Q = haar_unitary(5, np.random.default_rng(0))
    np.testing.assert_allclose(Q @ Q.conj().T, np.eye(5), atol=1e-12)


def _prop1(rotations, seed=0):
    stats = random_stats(seed, K=2, M=4, N=2)
    lam = random_alloc(seed, 2, 4, 1.0)
    return prop1_validate(stats, PowerModel(xi=1.0, p_c=0.05, p_s=0.5), lam, len(rotations),
                          np.random.default_rng(0), SolverConfig(mc_samples=2000), rotations=rotations)


def test_identity_rotation_changes_nothing():
    rep = _prop1([np.eye(4, dtype=complex)])
    assert abs(rep.diff_alloc[0]) <= 1e-12 * rep.beam_ee
    assert abs(rep.diff_nulled[0]) <= 1e-12 * rep.beam_ee
    assert rep.passed()


def test_phase_rotation_changes_nothing():
    phases = np.diag(np.exp(1j * np.array([0.3, 1.1, -2.0, 2.9])))
    rep = _prop1([phases])
    assert abs(rep.diff_alloc[0]) <= 3 * rep.se_alloc[0] + 1e-12 * rep.beam_ee
    assert rep.passed()


def test_random_rotations_never_win():
    rep = prop1_validate(random_stats(1, K=2, M=4), PowerModel(xi=1.0, p_c=0.05, p_s=0.5),
                         random_alloc(1, 2, 4, 1.0), 10, np.random.default_rng(3),
                         SolverConfig(mc_samples=2000))
    assert len(rep.diff_nulled) == 10
    assert rep.passed()
