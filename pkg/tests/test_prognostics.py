import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcbm import presets
from jointcbm.degradation import (ComponentTypeParams, DegradationSignal, generate_dataset,
                                  simulate_signal, truncate_at_age)
from jointcbm.prognostics import (EmpiricalRld, Priors, RldPosterior, fit_priors, predict_rld,
                                  read_priors, sample_prior_predictive, sample_rld,
                                  update_posterior, write_priors)

LAM = math.exp(3.0)


def line_signal(beta, tau=5, theta=1.5, n2=30, sid=0):
    t = np.arange(tau + 1 + n2, dtype=float)
    s = np.where(t <= tau, 1.0, theta * np.exp(beta * (t - tau)))
    return DegradationSignal(0, t, s, float(t[-1]), float(tau), theta, beta, sid)


def make_priors(**kw):
    base = dict(type_id=0, drift_prior=(0.05, 1e-4), bm_sigma_hat=0.03, phase1_stats=(10.0, 30.0),
                log_theta_stats=(0.2, 0.01), phi=1.0, failure_threshold=LAM, dt=1.0, tau_max=500.0)
    base.update(kw)
    return Priors(**base)


def test_noiseless_identical_slopes_hit_variance_floor():
    pri = fit_priors([line_signal(0.05, sid=0), line_signal(0.05, tau=8, sid=1)], LAM)
    m, v = pri.drift_prior
    assert m == pytest.approx(0.05, rel=1e-9)
    assert v == pytest.approx(1e-8 * m * m, rel=1e-6)


def test_drift_prior_matches_generator():
    p = presets.default_component_types()[0]
    sigs = generate_dataset(p, 50, seed=11)
    pri = fit_priors(sigs, p.failure_threshold)
    mu2, s2 = p.log_beta_prior
    expected = math.exp(mu2 + s2 * s2 / 2)
    se = math.sqrt(pri.drift_prior[1] / 50)
    assert abs(pri.drift_prior[0] - expected) <= 3 * se
    assert pri.bm_sigma_hat == pytest.approx(p.bm_sigma, rel=0.1)
    assert pri.tau_max == pytest.approx(3 * max(s.failure_time for s in sigs))


def test_fit_priors_errors(caplog):
    with pytest.raises(ValueError):
        fit_priors([], LAM)
    with pytest.raises(ValueError):
        fit_priors([line_signal(0.05)], LAM)
    flat = line_signal(0.05, n2=1, sid=9)
    with caplog.at_level(logging.WARNING):
        pri = fit_priors([line_signal(0.05), line_signal(0.06, sid=1), flat], LAM)
    assert pri.n_signals == 2
    assert "fewer than 3" in caplog.text
    with pytest.raises(ValueError):
        fit_priors([flat, line_signal(0.05, n2=2)], LAM)


def test_noiseless_limit_concentrates():
    pri = make_priors(bm_sigma_hat=1e-9, drift_prior=(0.05, 1e-12))
    obs = truncate_at_age(line_signal(0.05), 20)
    post = update_posterior(pri, obs)
    r = math.log(LAM) - math.log(obs.s[-1])
    assert post.nu == pytest.approx(r / 0.05, rel=1e-6)
    rld = sample_rld(post, 100, seed=1)
    assert np.allclose(rld.samples, r / 0.05, rtol=1e-4)


def test_update_preconditions(caplog):
    pri = make_priors()
    sig = line_signal(0.05)
    with pytest.raises(ValueError):
        update_posterior(pri, truncate_at_age(sig, 0))
    over = DegradationSignal(0, np.arange(3.0), np.array([1.0, 2.0, LAM * 1.01]), 2.0, 0.5, 1, 1)
    with pytest.raises(ValueError):
        update_posterior(pri, over)
    falling = DegradationSignal(0, np.arange(8.0), np.array([1.0, 5, 4.5, 4, 3.5, 3, 2.5, 2]), 9, 0.5, 1, 1)
    with caplog.at_level(logging.WARNING):
        post = update_posterior(make_priors(drift_prior=(0.05, 10.0)), falling)
    assert post.drift_mean == 0.05
    assert "falling back" in caplog.text


def test_interval_coverage_under_abundant_training():
    p = presets.default_component_types()[0]
    pri = fit_priors(generate_dataset(p, 50, seed=3), p.failure_threshold)
    hits = 0
    for rep in range(200):
        sig = simulate_signal(p, (77, rep))
        obs = truncate_at_age(sig, math.floor(sig.failure_time / 2))
        rld = predict_rld(pri, obs, 1000, seed=(78, rep))
        lo, hi = np.quantile(rld.samples, [0.1, 0.9])
        hits += lo <= obs.residual_life <= hi
    assert hits / 200 >= 0.6


def test_sample_rld_examples():
    one = sample_rld(RldPosterior(10.0, 40.0, 100.0), 1, seed=0)
    assert one.n == 1 and 0 <= one.samples[0] <= 100
    sharp = sample_rld(RldPosterior(10.0, 1e15, 100.0), 1000, seed=0)
    assert np.allclose(sharp.samples, 10.0, atol=1e-3)
    big = sample_rld(RldPosterior(10.0, 40.0, 1e6), 100_000, seed=4)
    assert abs(big.samples.mean() - 10.0) <= 0.1
    assert abs(big.samples.var() - 25.0) <= 0.05 * 25.0
    with pytest.raises(ValueError):
        sample_rld(RldPosterior(10.0, 40.0, 100.0), 0, seed=0)
    with pytest.raises(ValueError):
        RldPosterior(-1.0, 40.0, 100.0)


def test_sample_rld_deterministic_and_clipped():
    post = RldPosterior(30.0, 5.0, 40.0)
    a = sample_rld(post, 500, seed=(1, 2))
    b = sample_rld(post, 500, seed=(1, 2))
    assert np.array_equal(a.samples, b.samples)
    assert a.samples.max() <= 40.0 and a.samples.min() >= 0
    assert a.sigma_hat == pytest.approx(np.std(a.samples, ddof=1))


@settings(max_examples=60, deadline=None)
@given(m0=st.floats(0.01, 0.2), v0=st.floats(1e-6, 1e-2), sigma=st.floats(0.005, 0.2),
       n=st.integers(1, 60), slope=st.floats(0.01, 0.2))
def test_posterior_variance_contracts(m0, v0, sigma, n, slope):
    pri = make_priors(drift_prior=(m0, v0), bm_sigma_hat=sigma)
    n = max(1, min(n, int(2.5 / slope)))  # stay below the threshold
    obs = truncate_at_age(line_signal(slope, n2=80), 5 + n)
    post = update_posterior(pri, obs)
    assert post.drift_var <= v0


@settings(max_examples=30, deadline=None)
@given(slope=st.floats(0.02, 0.1), m0=st.floats(0.01, 0.2))
def test_more_increments_move_nu_toward_empirical(slope, m0):
    pri = make_priors(drift_prior=(m0, 1e-4), bm_sigma_hat=0.05)
    sig = line_signal(slope, n2=50, theta=1.0)
    gaps = []
    for k in [k for k in (2, 5, 10, 20, 40) if slope * k < 2.9]:
        obs = truncate_at_age(sig, 5 + k)
        post = update_posterior(pri, obs)
        r = math.log(LAM) - math.log(obs.s[-1])
        gaps.append(abs(post.drift_mean - slope))
        assert post.nu == pytest.approx(r / post.drift_mean)
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.1, 500), gamma=st.floats(0.01, 1e5), tau_max=st.floats(1, 300),
       seed=st.integers(0, 1000))
def test_samples_respect_support(nu, gamma, tau_max, seed):
    rld = sample_rld(RldPosterior(nu, gamma, tau_max), 50, seed)
    assert np.all((rld.samples >= 0) & (rld.samples <= tau_max))


def test_prior_predictive_for_phase_one_prefix():
    pri = make_priors()
    obs = truncate_at_age(line_signal(0.05, tau=20), 12)
    rld = predict_rld(pri, obs, 300, seed=1)
    # at least the remaining Phase-I time of the observed range
    assert rld.samples.min() >= 0
    assert np.mean(rld.samples) > 30 - 12
    again = sample_prior_predictive(pri, 12, 300, seed=1)
    assert np.array_equal(rld.samples, again.samples)


def test_empirical_rld_validation():
    with pytest.raises(ValueError):
        EmpiricalRld(np.array([]), 0.0, 10.0)
    with pytest.raises(ValueError):
        EmpiricalRld(np.array([11.0]), 0.0, 10.0)
    assert EmpiricalRld.from_samples([3.0]).sigma_hat == 0.0


def test_priors_roundtrip(tmp_path):
    pri = make_priors()
    write_priors({0: pri}, tmp_path / "p.json")
    assert read_priors(tmp_path / "p.json")[0] == pri
    json.loads((tmp_path / "p.json").read_text())
    with pytest.raises(ValueError):
        make_priors(drift_prior=(0.1, 0.0))
    with pytest.raises(ValueError):
        make_priors(bm_sigma_hat=0.0)
