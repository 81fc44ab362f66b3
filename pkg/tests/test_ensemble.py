import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwalk.errors import ConfigError, DivergentRateError, WindowTooShortError
from qwalk.ensemble import (
    EnsembleConfig,
    EnsembleResult,
    estimate_dq,
    fit_window,
    purity_mc_pairwise,
    run_ensemble,
)
from qwalk.noise import BitFlip, BrokenLinks, Coherent
from qwalk.purity import density_moments, evolve_density_bitflip, purity_exact_bitflip
from qwalk.walk import evolve_coherent, moments, origin_state, step


def synthetic(var):
    t = np.arange(len(var))
    return EnsembleResult(t=t, mean_x=np.zeros(len(var)), var_x=np.asarray(var, dtype=float))


def test_config_validation():
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, Coherent(), steps=0, walkers=1)
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, Coherent(), steps=5, walkers=0)
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, Coherent(), steps=5, walkers=4, variance="other")
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, "bitflip", steps=5, walkers=4)
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, Coherent(), steps=5, walkers=1, record_purity=True)
    with pytest.raises(ConfigError):
        EnsembleConfig(0.1, Coherent(), steps=5, walkers=4, record_purity=True, purity_times=(9,))
    with pytest.raises(ValueError):
        EnsembleConfig(3.0, Coherent(), steps=5, walkers=4)


def test_coherent_ensemble_matches_single_walker():
    theta, steps = 0.8, 150
    res = run_ensemble(EnsembleConfig(theta, Coherent(), steps, walkers=40))
    state = origin_state(steps)
    var = [0.0]
    for _ in range(steps):
        state = step(state, theta)
        var.append(moments(state)[2])
    assert np.allclose(res.var_x, var, atol=1e-9)
    per = run_ensemble(EnsembleConfig(theta, Coherent(), steps, walkers=40, variance="per_trajectory"))
    assert np.allclose(per.var_x, res.var_x, atol=1e-9)
    assert res.mean_x[-1] == pytest.approx(moments(evolve_coherent(None, theta, steps))[0], abs=1e-10)


@settings(max_examples=6, deadline=None)
@given(st.sampled_from(["bitflip", "broken"]), st.floats(0.01, 0.99), st.integers(0, 2**40))
def test_variance_invariants(kind, p, seed):
    noise = BitFlip(p) if kind == "bitflip" else BrokenLinks(p)
    mix = run_ensemble(EnsembleConfig(0.5, noise, 80, walkers=20, master_seed=seed))
    per = run_ensemble(EnsembleConfig(0.5, noise, 80, walkers=20, master_seed=seed, variance="per_trajectory"))
    assert mix.var_x[0] == 0.0
    assert (mix.var_x >= 0).all() and (per.var_x >= 0).all()
    # E[var] = mixture variance - var(E) <= mixture variance
    assert (per.var_x <= mix.var_x + 1e-9).all()


def test_mixture_variance_matches_exact_density():
    # trajectories flip after the step, so the oracle uses order="after"
    theta, p, steps, n = 0.6, 0.2, 40, 4000
    res = run_ensemble(EnsembleConfig(theta, BitFlip(p), steps, walkers=n, master_seed=3))
    rhos = list(evolve_density_bitflip(theta, p, steps, order="after"))
    for t in (10, 25, 40):
        _, m1, m2 = density_moments(rhos[t])
        exact_var = m2 - m1**2
        # generous 5-sigma bound from the spread of <x^2> over trajectories (<= t^2)
        assert abs(res.var_x[t] - exact_var) < 5 * t**2 / math.sqrt(n)
        assert abs(res.mean_x[t] - m1) < 5 * t / math.sqrt(n)


def test_same_seed_same_result_other_seed_differs():
    cfg = EnsembleConfig(0.4, BitFlip(0.1), 100, walkers=50, master_seed=11)
    a, b = run_ensemble(cfg), run_ensemble(cfg)
    assert np.array_equal(a.var_x, b.var_x)
    c = run_ensemble(EnsembleConfig(0.4, BitFlip(0.1), 100, walkers=50, master_seed=12))
    assert not np.array_equal(a.var_x, c.var_x)


@pytest.mark.parametrize("noise", [BitFlip(0.1), BrokenLinks(0.1)])
def test_bit_exact_across_worker_counts(noise):
    cfg = EnsembleConfig(0.7, noise, 200, walkers=150, master_seed=99, record_purity=True, purity_times=(50, 200))
    one = run_ensemble(cfg, workers=1)
    eight = run_ensemble(cfg, workers=8)
    assert np.array_equal(one.var_x, eight.var_x)
    assert np.array_equal(one.mean_x, eight.mean_x)
    assert np.array_equal(one.purity, eight.purity)


def test_fit_window():
    assert fit_window(1000, 0.1) == (100, 1000)
    assert fit_window(1000, 0.9) == (20, 1000)
    assert fit_window(1000, 0.01, multiplier=5) == (500, 1000)
    with pytest.raises(DivergentRateError):
        fit_window(1000, 0.0)


def test_estimate_dq_exact_line():
    est = estimate_dq(synthetic(3 + 2 * np.arange(1001.0)), 0.1)
    assert est.slope == pytest.approx(2.0, rel=1e-12)
    assert est.intercept == pytest.approx(3.0, rel=1e-9)
    assert est.stderr < 1e-10
    assert est.window == (100, 1000)


def test_estimate_dq_noisy_line():
    rng = np.random.default_rng(0)
    var = 2 * np.arange(10_000.0) + rng.normal(size=10_000)
    est = estimate_dq(synthetic(var), 0.5)
    assert abs(est.slope - 2.0) < 0.01
    # OLS slope error for unit noise over ~10^4 evenly spaced points
    assert est.stderr == pytest.approx(math.sqrt(12 / 9980**3), rel=0.05)


def test_estimate_dq_refuses_short_window_and_coherent():
    with pytest.raises(WindowTooShortError):
        estimate_dq(synthetic(np.arange(1001.0)), 0.01, multiplier=10)
    with pytest.raises(DivergentRateError):
        estimate_dq(synthetic(np.arange(1001.0)), 0.0)
    est = estimate_dq(synthetic(np.arange(1001.0)), 0.1, t_hi=400)
    assert est.window == (100, 400)


def test_half_flip_gives_classical_rate():
    res = run_ensemble(EnsembleConfig(math.pi / 3, BitFlip(0.5), 1000, walkers=1000, master_seed=5))
    assert abs(estimate_dq(res, 0.5).slope - 1.0) < 0.1
    res = run_ensemble(EnsembleConfig(math.pi / 4, BitFlip(0.5), 1000, walkers=1000, master_seed=6))
    assert abs(res.var_x[1000] / 1000 - 1.0) < 0.1


def test_pairwise_purity_trivial_cases():
    state = evolve_coherent(None, 0.3, 10)
    assert purity_mc_pairwise([state, state.copy(), state.copy()]) == pytest.approx(1.0)
    e = np.eye(4, dtype=complex)
    assert purity_mc_pairwise(e[:2]) == 0.0
    with pytest.raises(ValueError):
        purity_mc_pairwise(e[:1])


def test_pairwise_purity_matches_exact():
    t = 300
    cfg = EnsembleConfig(math.pi / 4, BitFlip(0.1), t, walkers=2000, master_seed=17,
                         record_purity=True, purity_times=(t,))
    res = run_ensemble(cfg)
    exact = purity_exact_bitflip(math.pi / 4, 0.1, t)[t]
    assert abs(res.purity[0] - exact) < 3 * res.purity_stderr[0]


def test_default_snapshot_times_are_log_spaced():
    cfg = EnsembleConfig(0.1, BitFlip(0.1), 1000, walkers=2, record_purity=True)
    times = cfg.snapshot_times()
    assert times[0] == 1 and times[-1] == 1000
    assert np.all(np.diff(times) > 0)


@pytest.mark.slow
def test_broken_links_flat_near_theta_zero():
    def slope(theta, seed):
        res = run_ensemble(EnsembleConfig(theta, BrokenLinks(0.1), 1000, walkers=1000, master_seed=seed))
        return estimate_dq(res, 0.1, multiplier=5).slope

    at_zero, nearby = slope(0.0, 41), slope(0.05 * math.pi, 42)
    assert abs(nearby - at_zero) / at_zero < 0.15
