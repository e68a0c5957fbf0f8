import math

import numpy as np
import pytest

from bubblechan.bubbles import BubbleEnvironment
from bubblechan.errors import ParameterError
from bubblechan.geometry import BeamSpec, aperture_power, obstructed_power
from bubblechan.simulator import (
    EmpiricalDistribution,
    ObstructionTable,
    empirical_cdf,
    run_ensemble,
    simulate_trial,
    trial_rng,
)

BEAM = BeamSpec()
M = aperture_power(BEAM)


@pytest.fixture(scope="module")
def env():
    return BubbleEnvironment(L=1 / 40, mu_R=1.95e-3)


def test_same_seed_same_samples(env):
    a = run_ensemble(env, 300, seed=5)
    b = run_ensemble(env, 300, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, run_ensemble(env, 300, seed=6).samples)


def test_split_runs_concatenate(env):
    whole = run_ensemble(env, 5000, seed=1)
    first = run_ensemble(env, 2100, seed=1)
    rest = run_ensemble(env, 2900, seed=1, first_trial=2100)
    joined = first.concat(rest)
    assert np.array_equal(joined.samples, whole.samples)
    with pytest.raises(ParameterError):
        rest.concat(first)


def test_parallel_matches_serial(env):
    serial = run_ensemble(env, 4500, seed=3, workers=1)
    parallel = run_ensemble(env, 4500, seed=3, workers=2)
    assert np.array_equal(serial.samples, parallel.samples)


def test_single_trial_matches_ensemble(env):
    total, received = simulate_trial(env, trial_rng(9, 4))
    dist = run_ensemble(env, 5, seed=9)
    assert received == pytest.approx(dist.samples[4], abs=1e-15)
    assert total == pytest.approx(dist.obstructed[4], abs=1e-15)


def test_samples_in_range(env):
    dist = run_ensemble(env, 3000, seed=2)
    assert np.all((dist.samples >= 0) & (dist.samples <= M))
    assert dist.mass_at_zero + dist.mass_at_m + dist.interior_mass == pytest.approx(1.0, abs=1e-12)
    assert np.all(dist.obstructed >= 0)
    clamp = M - np.clip(dist.obstructed, 0, M)
    assert np.array_equal(clamp, dist.samples)


def test_zero_window_never_blocks():
    env = BubbleEnvironment(L=0.05, mu_R=1.5e-3, window=0.0)
    dist = run_ensemble(env, 50, seed=0)
    assert dist.mass_at_m == 1.0
    assert simulate_trial(env, trial_rng(0, 0)) == (0.0, M)


def test_single_trial_run():
    dist = run_ensemble(BubbleEnvironment(L=0.05, mu_R=1.5e-3), 1, seed=0)
    assert dist.n_trials == 1
    with pytest.raises(ParameterError):
        run_ensemble(BubbleEnvironment(L=0.05, mu_R=1.5e-3), 0, seed=0)


def test_summary_fields(env):
    s = run_ensemble(env, 2000, seed=4).summary()
    assert s["a_hat"] + s["b_hat"] == pytest.approx(1.0)
    assert s["c_hat_se"] == pytest.approx(math.sqrt(s["c_hat"] * (1 - s["c_hat"]) / 2000))
    assert s["n_trials"] == 2000


def test_table_matches_exact_geometry():
    table = ObstructionTable(BEAM, 0.01)
    rng = np.random.default_rng(12)
    R = rng.uniform(1e-5, 0.01, 20000)
    D = rng.uniform(0, 1, R.size) * (BEAM.aperture_radius + R)
    err = np.abs(table(D, R) - obstructed_power(D, R, BEAM))
    assert err.max() <= 1e-4 * M
    assert np.all(table(BEAM.aperture_radius + R + 1e-6, R) == 0.0)


def test_table_and_exact_runs_agree(env):
    fast = run_ensemble(env, 2000, seed=7)
    exact = run_ensemble(env, 2000, seed=7, exact=True)
    assert np.max(np.abs(fast.obstructed - exact.obstructed)) < 1e-3
    assert fast.mass_at_m == exact.mass_at_m


def test_blockage_grows_with_radius():
    small = run_ensemble(BubbleEnvironment(L=1 / 40, mu_R=1.35e-3), 4000, seed=1)
    large = run_ensemble(BubbleEnvironment(L=1 / 40, mu_R=2.99e-3), 4000, seed=1)
    assert large.mass_at_zero > small.mass_at_zero
    assert large.mass_at_m < small.mass_at_m
    assert large.samples.mean() < small.samples.mean()


def test_empirical_cdf(env):
    dist = EmpiricalDistribution(np.array([0.0, 0.1, 0.1, 0.3, M]), np.zeros(5), M, 0)
    assert list(empirical_cdf(dist, [-1, 0.0, 0.1, 0.2, M])) == [0.0, 0.2, 0.6, 0.6, 1.0]
    assert dist.mass_at_zero == 0.2 and dist.mass_at_m == 0.2
    assert dist.hist_counts.sum() == 3
