import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamee import (ChannelStats, DimensionMismatch, NegativeEntry, NonFiniteEntry, PowerAllocation,
                    PowerModel, ScenarioSpec, SolverConfig, UserStats, ValidationError,
                    ZeroCouplingRowAll, dbm_to_watts, generate, validate, watts_to_dbm)
from beamee.synth import PROFILES


@pytest.mark.parametrize("dbm, watts", [(30.0, 1.0), (0.0, 1e-3), (-105.0, 3.1622776601683795e-14),
                                        (40.0, 10.0), (10.0, 0.01)])
def test_dbm_to_watts_values(dbm, watts):
    assert dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-14)


def test_dbm_to_watts_vectorised():
    out = dbm_to_watts(np.array([0.0, 30.0]))
    np.testing.assert_allclose(out, [1e-3, 1.0])


@given(st.floats(-200, 200), st.floats(1e-6, 50))
def test_dbm_strictly_monotone(x, step):
    assert dbm_to_watts(x + step) > dbm_to_watts(x)


@given(st.floats(-200, 200))
def test_plus_ten_db_is_times_ten(x):
    assert dbm_to_watts(x + 10.0) == pytest.approx(10.0 * dbm_to_watts(x), rel=1e-12)


@given(st.floats(-150, 80))
def test_dbm_round_trip(x):
    assert watts_to_dbm(dbm_to_watts(x)) == pytest.approx(x, abs=1e-9)


def test_validate_accepts_two_users():
    stats = ChannelStats.from_omegas([np.ones((2, 3)), np.eye(2, 3)], 1.0)
    validate(stats, PowerModel())


@pytest.mark.parametrize("bad, exc", [
    (np.array([[1.0, np.nan]]), NonFiniteEntry),
    (np.array([[1.0, np.inf]]), NonFiniteEntry),
    (np.array([[1.0, -0.5]]), NegativeEntry),
    (np.zeros((2, 2)), ZeroCouplingRowAll),
])
def test_validate_rejects(bad, exc):
    stats = ChannelStats.from_omegas([np.ones((1, 2)), bad], 1.0)
    with pytest.raises(exc):
        validate(stats)


def test_validate_rejects_bad_noise_and_power_model():
    stats = ChannelStats.from_omegas([np.ones((1, 2))], 0.0)
    with pytest.raises(ValidationError):
        validate(stats)
    ok = ChannelStats.from_omegas([np.ones((1, 2))], 1.0)
    with pytest.raises(ValidationError):
        validate(ok, PowerModel(xi=0.5))
    with pytest.raises(NegativeEntry):
        validate(ok, PowerModel(p_c=-1.0))
    with pytest.raises(ValidationError):
        validate(ok, PowerModel(p_c=0.0, p_s=0.0))


def test_column_mismatch_rejected_at_construction():
    with pytest.raises(DimensionMismatch):
        ChannelStats(3, (UserStats(np.ones((2, 3))), UserStats(np.ones((2, 4)))), 1.0)


@pytest.mark.parametrize("profile", PROFILES)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 4), M=st.integers(1, 12), N=st.integers(1, 3))
def test_validate_accepts_generated(profile, seed, K, M, N):
    validate(generate(ScenarioSpec(M=M, K=K, N=N, profile=profile, seed=seed)), PowerModel())


def test_power_model_affine():
    pm = PowerModel(xi=2.0, p_c=0.5, p_s=3.0, p_max=1.0)
    assert pm.consumed(1.5, 4) == 2.0 * 1.5 + 4 * 0.5 + 3.0
    assert pm.with_pmax(7.0).p_max == 7.0
    pm2 = PowerModel.from_dbm(5, 30, 40, 20)
    assert (pm2.p_c, pm2.p_s) == pytest.approx((1.0, 10.0))
    assert pm2.p_max == pytest.approx(0.1)


def test_allocation_invariants():
    a = PowerAllocation.uniform(2, 4, 2.0)
    assert a.total_power() == pytest.approx(2.0)
    assert a == PowerAllocation(np.full((2, 4), 0.25))
    with pytest.raises(ValidationError):
        PowerAllocation(np.array([[0.1, -1e-3]]))
    with pytest.raises(ValidationError):
        PowerAllocation(np.array([[0.1, np.nan]]))
    with pytest.raises(DimensionMismatch):
        PowerAllocation(np.ones(3))
    with pytest.raises(ValueError):
        a.lambdas[0, 0] = 1.0


@pytest.mark.parametrize("field, value", [("eps_mm", 0.0), ("eps_de", -1.0), ("max_iter_mm", 0),
                                          ("mc_samples", 0), ("de_damping", 1.5),
                                          ("de_refresh", "never"), ("wf_method", "magic")])
def test_solver_config_rejects(field, value):
    with pytest.raises(ValueError):
        SolverConfig(**{field: value})


def test_normalized_stats_scale_omega_only():
    stats = ChannelStats.from_omegas([[[2e-12, 1e-12]]], 1e-13)
    norm = stats.normalized()
    assert norm.noise_power == 1.0
    np.testing.assert_allclose(norm.omegas[0], [[20.0, 10.0]])
    assert math.isclose(stats.omegas[0][0, 0] / stats.noise_power, norm.omegas[0][0, 0])
