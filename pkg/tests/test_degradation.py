import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcbm import presets
from jointcbm.degradation import (ComponentTypeParams, DatasetManifest, SimulationError,
                                  generate_dataset, mean_lifetime, read_signals_csv,
                                  simulate_signal, truncate_at_age, write_signals_csv)


def fast_params(**kw):
    base = dict(type_id=0, phi=1.0, tau_range=(5.0, 15.0), log_theta_prior=(0.1, 0.1),
                log_beta_prior=(math.log(0.2), 0.2), bm_sigma=0.05,
                failure_threshold=math.exp(2.0))
    base.update(kw)
    return ComponentTypeParams(**base)


def test_noiseless_crossing_matches_closed_form():
    beta = 0.07
    p = fast_params(bm_sigma=0.0, fixed_theta=1.0, fixed_beta=beta, fixed_tau=10.3)
    sig = simulate_signal(p, 1)
    expected = math.ceil(10.3 + math.log(p.failure_threshold / p.phi) / beta)
    assert sig.failure_time == expected


def test_noiseless_log_signal_is_linear():
    p = fast_params(bm_sigma=0.0)
    sig = simulate_signal(p, 3)
    mask = sig.t > sig.tau
    ls = np.log(sig.s[mask][:-1])  # the last sample may be clamped to the threshold
    pred = math.log(sig.theta) + sig.beta * (sig.t[mask][:-1] - sig.tau)
    np.testing.assert_allclose(ls, pred, rtol=0, atol=1e-12)


def test_threshold_must_exceed_phi():
    with pytest.raises(ValueError):
        fast_params(failure_threshold=1.0)
    with pytest.raises(ValueError):
        fast_params(failure_threshold=0.5)


@pytest.mark.parametrize("bad", [dict(tau_range=(3.0, 3.0)), dict(tau_range=(-1.0, 3.0)),
                                 dict(log_theta_prior=(0.0, 0.0)), dict(bm_sigma=-1.0),
                                 dict(dt=0.0), dict(tau_max=0.0)])
def test_parameter_invariants(bad):
    with pytest.raises(ValueError):
        fast_params(**bad)


def test_non_termination_guard():
    p = fast_params(bm_sigma=0.0, fixed_beta=1e-9, hard_cap=500.0)
    with pytest.raises(SimulationError):
        simulate_signal(p, 0)


@pytest.mark.parametrize("type_id", [0, 1, 2])
def test_calibrated_lifetimes_within_ten_percent(type_id):
    p = presets.default_component_types()[type_id]
    target = presets.TARGET_LIFETIMES[type_id]
    got = mean_lifetime(p, n=1000, seed=12345)
    assert abs(got - target) <= 0.1 * target


@pytest.mark.parametrize("n", [5, 50])
def test_dataset_sizes(n):
    sigs = generate_dataset(fast_params(), n, seed=7)
    assert len(sigs) == n
    assert [s.signal_id for s in sigs] == list(range(n))


def test_dataset_rejects_empty():
    with pytest.raises(ValueError):
        generate_dataset(fast_params(), 0, seed=1)


def test_same_seed_identical_bytes():
    a = generate_dataset(fast_params(), 1, seed=42)[0]
    b = generate_dataset(fast_params(), 1, seed=42)[0]
    assert a.s.tobytes() == b.s.tobytes() and a.t.tobytes() == b.t.tobytes()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), sigma=st.sampled_from([0.0, 0.02, 0.1, 0.3]),
       dt=st.sampled_from([0.5, 1.0, 2.0]))
def test_signal_invariants(seed, sigma, dt):
    p = fast_params(bm_sigma=sigma, dt=dt)
    sig = simulate_signal(p, seed)
    assert np.all(sig.s[:-1] < p.failure_threshold)
    assert sig.s[-1] >= p.failure_threshold
    np.testing.assert_allclose(np.diff(sig.t), dt)
    assert np.all(sig.s[sig.t <= sig.tau] == p.phi)
    assert sig.failure_time == sig.t[-1]


def test_log_theta_moments():
    p = fast_params(log_theta_prior=(0.3, 0.2), tau_range=(0.0, 1.0),
                    log_beta_prior=(math.log(2.0), 0.1))
    n = 10_000
    lt = np.array([math.log(simulate_signal(p, (9, i)).theta) for i in range(n)])
    se_mean = 0.2 / math.sqrt(n)
    assert abs(lt.mean() - 0.3) <= 3 * se_mean
    se_sd = 0.2 / math.sqrt(2 * (n - 1))
    assert abs(lt.std(ddof=1) - 0.2) <= 3 * se_sd


def test_truncate_examples():
    sig = simulate_signal(fast_params(), 5)
    first = truncate_at_age(sig, 0)
    assert len(first) == 1 and first.s[0] == 1.0 and first.t[0] == 0
    full = truncate_at_age(sig, sig.failure_time)
    assert len(full) == len(sig) and full.residual_life == 0
    half = sig.failure_time / 2
    pre = truncate_at_age(sig, half)
    assert len(pre) == math.floor(half / sig.t[1]) + 1
    assert pre.residual_life == sig.failure_time - half


def test_truncate_errors():
    sig = simulate_signal(fast_params(), 5)
    with pytest.raises(ValueError):
        truncate_at_age(sig, sig.failure_time + 1)
    with pytest.raises(ValueError):
        truncate_at_age(sig, -1)


def test_csv_and_manifest_roundtrip(tmp_path):
    sigs = generate_dataset(fast_params(), 3, seed=2)
    path = tmp_path / "signals.csv"
    write_signals_csv(sigs, path)
    back = sorted(read_signals_csv(path), key=lambda s: s.signal_id)
    for a, b in zip(sigs, back):
        assert np.array_equal(a.s, b.s) and np.array_equal(a.t, b.t)
        assert a.failure_time == b.failure_time
    man = DatasetManifest("x", 2, 3, [fast_params().to_dict()], {"0": "signals.csv"})
    man.write(tmp_path / "m.json")
    again = DatasetManifest.read(tmp_path / "m.json")
    assert (again.name, again.seed, again.files) == (man.name, man.seed, man.files)
    assert ComponentTypeParams.from_dict(again.types[0]) == fast_params()


def test_params_roundtrip():
    p = replace(presets.default_component_types()[1], hard_cap=5000.0)
    assert ComponentTypeParams.from_dict(p.to_dict()) == p
