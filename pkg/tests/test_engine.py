import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from bicecm import engine
from bicecm.discrete import MixtureParams, SampleSpace, log_pmf, pmf
from bicecm.engine import (
    AllZeroWeightsError,
    DegenerateLevelWarning,
    EngineConfig,
    LevelFailureError,
    PerformanceModel,
    ess,
    level_weights,
    run,
    sample_cov,
    smoothed_indicator_log,
    solve_sigma,
    stopping_cov,
)
from bicecm.networks import enumerate_pf, toy5


def mp_log_phi(z):
    mpmath.mp.dps = 50
    return float(mpmath.log(mpmath.ncdf(z)))


def weight_cov(g, sigma, sigma_prev):
    num = smoothed_indicator_log(np.asarray(g), sigma)
    den = smoothed_indicator_log(np.asarray(g), sigma_prev)
    w = np.exp(num - den - (num - den).max())
    return w.std(ddof=1) / w.mean()


def linear_model(D=6, n=3, level=4):
    """g = level - number of components in their top state."""
    sp = SampleSpace.uniform(D, n)
    table = np.full(n, 0.9 / (n - 1))
    table[-1] = 0.1
    p = MixtureParams.independent([table] * D)
    return PerformanceModel(sp, p, lambda x: level - 0.5 - (x == n - 1).sum(axis=1))


class TestSmoothedIndicator:
    @pytest.mark.parametrize("ratio", [-40.0, -5.0, 0.0, 1.0, 8.0, 20.0, 38.0])
    def test_matches_high_precision(self, ratio):
        got = smoothed_indicator_log(ratio, 1.0)
        assert got == pytest.approx(mp_log_phi(-ratio), rel=1e-8, abs=1e-300)

    def test_deep_tail_is_finite(self):
        v = smoothed_indicator_log(np.array([38.0, 1e3]), 1.0)
        assert np.all(np.isfinite(v))
        assert v[0] == pytest.approx(mp_log_phi(-38.0), rel=1e-8)

    def test_infinite_sigma(self):
        assert smoothed_indicator_log(3.0, math.inf) == pytest.approx(math.log(0.5))
        np.testing.assert_allclose(smoothed_indicator_log(np.ones(3), math.inf), math.log(0.5))


class TestStatistics:
    def test_sample_cov_example(self):
        assert sample_cov([1.0, 2.0, 3.0]) == pytest.approx(0.5)

    def test_ess_examples(self):
        assert ess(np.ones(10)) == pytest.approx(10.0)
        # One nonzero weight out of N: cov^2 = N, ESS = N / (N + 1).
        w = np.zeros(10)
        w[3] = 7.0
        assert ess(w) == pytest.approx(10 / 11)

    def test_zero_weights(self):
        with pytest.raises(AllZeroWeightsError):
            sample_cov(np.zeros(5))

    def test_too_few_values(self):
        with pytest.raises(ValueError):
            sample_cov([1.0])

    def test_level_weights_rescale_only_when_needed(self):
        g = np.array([1.0, -1.0])
        w = level_weights(g, 1.0, np.log([0.5, 0.5]), np.log([0.25, 0.25]))
        np.testing.assert_allclose(w, 2 * np.array([0.15865525393145707, 0.8413447460685429]))
        tiny = level_weights(g, 1.0, np.array([-800.0, -800.0]), np.zeros(2))
        assert tiny.max() == pytest.approx(1.0)

    def test_level_weights_need_finite_reference(self):
        with pytest.raises(ValueError):
            level_weights([1.0], 1.0, [0.0], [-np.inf])


class TestStoppingCov:
    def test_no_failures(self):
        assert stopping_cov([1.0, 2.0], 1.0) == math.inf

    def test_infinite_sigma_is_indicator_cov(self):
        g = np.array([-1.0, 1.0, 1.0, 1.0])
        assert stopping_cov(g, math.inf) == pytest.approx(sample_cov([1, 0, 0, 0]))

    def test_far_safe_samples_do_not_overflow(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            v = stopping_cov(np.array([-0.1, 1e6, 1e6]), 1e-3)
        assert math.isfinite(v)


class TestSolveSigma:
    @pytest.mark.parametrize("seed", range(5))
    def test_hits_target(self, seed):
        g = np.random.default_rng(seed).normal(2.0, 1.0, 2000)
        s = solve_sigma(g, math.inf, 1.5)
        assert weight_cov(g, s, math.inf) == pytest.approx(1.5, abs=1e-3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.5, 5.0), st.floats(0.1, 100.0))
    def test_below_previous(self, seed, delta, sigma_prev):
        g = np.random.default_rng(seed).normal(1.0, 2.0, 200)
        assert solve_sigma(g, sigma_prev, delta) < sigma_prev

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.3, 4.0))
    def test_smaller_target_never_sharpens(self, seed, delta):
        # The weight c.o.v. falls as sigma grows, so a tighter target needs a larger sigma.
        g = np.random.default_rng(seed).normal(2.0, 1.0, 300)
        assert solve_sigma(g, math.inf, delta / 2) >= solve_sigma(g, math.inf, delta) * (1 - 1e-3)

    def test_constant_g_warns_and_keeps_upper_bound(self):
        with pytest.warns(DegenerateLevelWarning):
            s = solve_sigma(np.full(50, 3.0), math.inf, 1.5)
        assert s == pytest.approx(30.0, rel=1e-3)

    def test_empty(self):
        with pytest.raises(ValueError):
            solve_sigma(np.array([]), 1.0, 1.5)


class TestRun:
    def test_certain_failure_stops_at_first_level(self):
        sp = SampleSpace.uniform(3, 2)
        m = PerformanceModel(sp, MixtureParams.independent([[0.5, 0.5]] * 3),
                             lambda x: -np.ones(x.shape[0]))
        res = run(m, EngineConfig(N=100, seed=1))
        assert res.pf_hat == 1.0
        assert len(res.levels) == 1 and res.converged
        assert res.total_g_evaluations == 100

    def test_sigma_strictly_decreasing(self):
        res = run(linear_model(D=8, level=6), EngineConfig(N=500, seed=2, k=2))
        assert len(res.sigmas) >= 2
        assert np.all(np.diff(res.sigmas) < 0)

    def test_same_seed_same_result(self):
        m = linear_model()
        a = run(m, EngineConfig(N=300, seed=5, k=2))
        b = run(m, EngineConfig(N=300, seed=5, k=2))
        assert a.pf_hat == b.pf_hat
        np.testing.assert_array_equal(a.final_states, b.final_states)
        assert a.sigmas == b.sigmas

    def test_estimate_matches_final_weights(self):
        res = run(linear_model(), EngineConfig(N=300, seed=3, k=2))
        assert res.pf_hat == pytest.approx(res.final_weights.mean())
        fail = res.final_weights > 0
        assert res.levels[-1].n_failures == fail.sum()
        assert res.final_samples.N == 300

    def test_fit_keeps_full_support(self):
        m = linear_model(D=4, level=3)
        res = run(m, EngineConfig(N=300, seed=0, k=3))
        for lv in res.levels[:-1]:
            assert np.all(pmf(lv.params_after, m.space, m.space.all_states()) > 0)

    def test_level_cap(self):
        res = run(linear_model(D=8, level=8), EngineConfig(N=100, seed=0, t_max=1, delta_eps=1e-6))
        assert not res.converged
        assert len(res.levels) == 2

    def test_all_zero_weights(self, monkeypatch):
        monkeypatch.setattr(engine, "level_log_weights",
                            lambda g, s, lp, lh: np.full(len(g), -np.inf))
        with pytest.raises(LevelFailureError) as err:
            run(linear_model(), EngineConfig(N=100, seed=0))
        assert err.value.trace == []

    def test_non_finite_g(self):
        m = linear_model()
        bad = PerformanceModel(m.space, m.input_params, lambda x: np.full(x.shape[0], np.nan))
        with pytest.raises(ValueError):
            run(bad, EngineConfig(N=10))

    def test_bic_mode_records_selection(self):
        res = run(linear_model(), EngineConfig(N=300, seed=1, kmax=3, n_pilot=3))
        assert len(res.selected_ks) == len(res.sigmas)
        assert all(1 <= k <= 3 for k in res.selected_ks)

    @pytest.mark.parametrize("kw", [dict(N=1), dict(delta_tar=0), dict(C=-1), dict(epsilon=0),
                                    dict(kmax=-1), dict(k=0), dict(t_max=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            EngineConfig(**kw)


def reference_ice(model, N, delta, rng):
    """Improved cross-entropy with one independent categorical density, written plainly."""
    sp, p = model.space, model.input_params
    tables = [p.table(0, d).copy() for d in range(sp.D)]
    sigma_prev = math.inf
    log_phi = lambda g, s: smoothed_indicator_log(g, s)
    while True:
        x = np.column_stack([rng.choice(len(t), size=N, p=t) for t in tables])
        g = model.evaluate(x)
        log_h = sum(np.log(tables[d][x[:, d]]) for d in range(sp.D))
        log_p = log_pmf(p, sp, x)
        fail = g <= 0
        if fail.any():
            ratio = np.where(fail, np.exp(-log_phi(np.where(fail, g, 0), sigma_prev)), 0.0)
            if ratio.std(ddof=1) / ratio.mean() <= delta:
                return np.mean(fail * np.exp(log_p - log_h))
        top = sigma_prev if math.isfinite(sigma_prev) else 10 * np.abs(g).max()
        obj = lambda ls: (weight_cov(g, math.exp(ls), sigma_prev) - delta) ** 2
        ls = optimize.minimize_scalar(obj, bounds=(math.log(1e-6 * top), math.log(top) - 1e-4),
                                      method="bounded").x
        sigma_prev = math.exp(ls)
        lw = log_p + log_phi(g, sigma_prev) - log_h
        w = np.exp(lw - lw.max())
        tables = [np.bincount(x[:, d], weights=w, minlength=len(tables[d])) / w.sum()
                  for d in range(sp.D)]


class TestAgainstReferenceICE:
    def test_single_component_flat_prior(self):
        m = linear_model(D=6, level=5)
        exact = math.fsum(pmf(m.input_params, m.space, x)
                          for x in m.space.all_states() if m.evaluate(x[None, :])[0] <= 0)
        reps = 40
        ours = [run(m, EngineConfig(N=1000, seed=s, C=0.0, k=1, n_pilot=1)).pf_hat
                for s in range(reps)]
        rng = np.random.default_rng(123)
        theirs = [reference_ice(m, 1000, 1.5, rng) for _ in range(reps)]
        se = math.sqrt(np.var(ours, ddof=1) / reps + np.var(theirs, ddof=1) / reps)
        assert abs(np.mean(ours) - np.mean(theirs)) < 4 * se
        assert abs(np.mean(ours) - exact) < 4 * np.std(ours, ddof=1) / math.sqrt(reps)


class TestToyNetwork:
    def test_unbiased_on_toy5(self):
        m = toy5()
        exact = enumerate_pf(m)
        est = [run(m, EngineConfig(N=1000, seed=s, k=3)).pf_hat for s in range(30)]
        se = np.std(est, ddof=1) / math.sqrt(len(est))
        assert abs(np.mean(est) - exact) < 4 * se
