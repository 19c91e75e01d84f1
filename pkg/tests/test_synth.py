import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamee import (ChannelStats, DimensionMismatch, InvalidSpec, ParseError, PowerAllocation,
                    ScenarioSpec, generate, load, load_alloc, load_stats, save)
from beamee.synth import PROFILES, dumps


def test_uniform_unit_gain_is_all_ones():
    stats = generate(ScenarioSpec(M=5, K=2, N=3, profile="uniform", pathloss_db=0.0))
    for om in stats.omegas:
        np.testing.assert_allclose(om, np.ones((3, 5)))


@pytest.mark.parametrize("profile", PROFILES)
def test_mean_gain_matches_pathloss(profile):
    stats = generate(ScenarioSpec(M=16, K=3, N=2, profile=profile, pathloss_db=-120.0))
    for om in stats.omegas:
        assert om.mean() == pytest.approx(1e-12, rel=1e-12)
    assert stats.noise_power == pytest.approx(10 ** (-13.5))


def test_generation_is_deterministic():
    a, b = generate(ScenarioSpec(seed=3)), generate(ScenarioSpec(seed=3))
    c = generate(ScenarioSpec(seed=4))
    assert all(np.array_equal(x, y) for x, y in zip(a.omegas, b.omegas))
    assert not all(np.array_equal(x, y) for x, y in zip(a.omegas, c.omegas))


def test_rows_share_profile_up_to_scale():
    om = generate(ScenarioSpec(M=12, K=1, N=3, seed=1)).omegas[0]
    ratios = om / om[0]
    np.testing.assert_allclose(ratios, ratios[:, :1] * np.ones((1, 12)), rtol=1e-12)


def test_sparse_profile_confines_support():
    stats = generate(ScenarioSpec(M=16, K=2, profile="sparse-beam", window=3))
    for om in stats.omegas:
        assert np.count_nonzero(om[0]) == 3


def test_per_user_parameters():
    stats = generate(ScenarioSpec(M=8, K=2, N=(1, 3), pathloss_db=(-100.0, -110.0)))
    assert [u.omega.shape[0] for u in stats.users] == [1, 3]
    assert stats.omegas[0].mean() == pytest.approx(10 * stats.omegas[1].mean())


@pytest.mark.parametrize("spec", [ScenarioSpec(M=0), ScenarioSpec(profile="ring"), ScenarioSpec(N=(1, 2)),
                                  ScenarioSpec(spread=-1.0), ScenarioSpec(window=0, profile="sparse-beam")])
def test_invalid_spec(spec):
    with pytest.raises(InvalidSpec):
        generate(spec)


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 10), st.sampled_from(PROFILES))
def test_stats_round_trip(tmp_path_factory, seed, K, M, profile):
    stats = generate(ScenarioSpec(M=M, K=K, N=2, profile=profile, seed=seed))
    path = tmp_path_factory.mktemp("rt") / "stats.json"
    save(stats, path)
    back = load_stats(path)
    assert back.noise_power == stats.noise_power
    assert all(np.array_equal(x, y) for x, y in zip(back.omegas, stats.omegas))
    assert dumps(back) == dumps(stats)


@given(st.lists(st.floats(0, 1e3), min_size=6, max_size=6))
def test_allocation_round_trip(tmp_path_factory, values):
    alloc = PowerAllocation(np.array(values).reshape(2, 3))
    path = tmp_path_factory.mktemp("rt") / "alloc.json"
    save(alloc, path)
    assert load_alloc(path) == alloc
    assert load(path) == alloc


def test_load_tells_kinds_apart(tmp_path):
    stats = ChannelStats.from_omegas([np.ones((1, 2))], 1.0)
    save(stats, tmp_path / "s.json")
    assert isinstance(load(tmp_path / "s.json"), ChannelStats)


def test_truncated_file(tmp_path):
    path = tmp_path / "s.json"
    save(ChannelStats.from_omegas([np.ones((1, 2))], 1.0), path)
    path.write_text(path.read_text()[:-10])
    with pytest.raises(ParseError, match="s.json:"):
        load_stats(path)


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("sigma2"),
    lambda d: d["users"][0].update(N=3),
    lambda d: d["users"][0].update(omega=[[1.0, "x"]]),
    lambda d: d.update(users=[]),
])
def test_malformed_fields(tmp_path, mutate):
    d = json.loads(dumps(ChannelStats.from_omegas([np.ones((1, 2))], 1.0)))
    mutate(d)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ParseError):
        load_stats(path)


def test_mismatched_beam_count(tmp_path):
    d = json.loads(dumps(ChannelStats.from_omegas([np.ones((1, 2))], 1.0)))
    d["M"] = 3
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    with pytest.raises((ParseError, DimensionMismatch)):
        load_stats(path)
