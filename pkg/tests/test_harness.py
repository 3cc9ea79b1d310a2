import logging

import pytest

from jointcbm import presets
from jointcbm.harness import (EpisodeAborted, EpisodeConfig, EpisodeResult, StudySpec,
                              compute_kpis, read_rows, run_bench, run_episode, run_study,
                              run_z2_comparison, violation_rates, write_events, write_rows)


def fake_episode(n_prev=0, n_corr=0, downtimes=(), failure_days=(), sim_days=100, window=50):
    return EpisodeResult(
        policy="X", seed=0, sim_days=sim_days, window=window, rho=5.0, gamma=7, ledger={},
        total_cost=123.0, n_preventive=n_prev, n_corrective=n_corr,
        failure_days=list(failure_days), downtimes=list(downtimes), events=[], solve_times=[],
        min_stock=0, stock_decrements=0, n_repairs=n_prev + n_corr, n_emergency=0,
        ledger_exact_ok=True)


def test_pct_pm_arithmetic():
    ep = fake_episode(n_prev=9, n_corr=1)
    assert ep.kpis()["pct_pm"] == pytest.approx(90.0)
    assert ep.kpis()["cost_per_day"] == pytest.approx(1.23)
    assert fake_episode().kpis()["pct_pm"] is None


def test_downtime_window_contributes_half():
    # failure on day 10 repaired on day 16: six days down, above rho = 5
    ep = fake_episode(n_corr=2, downtimes=[(0, 10, 16), (1, 12, 13)], failure_days=[10, 12])
    assert ep.window_flags() == [(True, False), (False, False)]
    assert ep.kpis()["avg_cc_violation"] == pytest.approx(0.25)
    # five days down is allowed
    assert fake_episode(downtimes=[(0, 10, 15)], failure_days=[10]).kpis()["avg_cc_violation"] == 0.0


def test_failure_count_and_open_downtime():
    ep = fake_episode(failure_days=[51 + i for i in range(8)], downtimes=[(0, 90, None)])
    assert ep.window_flags() == [(False, False), (True, True)]
    assert ep.kpis()["avg_cc_violation"] == pytest.approx(0.5)
    # a violation dated past the last full window is not counted
    assert fake_episode(downtimes=[(0, 95, None)], sim_days=102).window_flags()[1][0] is False
    # still inside its grace period when the episode ends
    assert fake_episode(downtimes=[(0, 98, None)]).window_flags()[1][0] is False


def test_compute_kpis_aggregates():
    eps = [fake_episode(n_prev=9, n_corr=1), fake_episode(n_prev=10)]
    rep = compute_kpis(eps, "cell")
    assert rep.pct_pm == pytest.approx(95.0)
    assert rep.se["pct_pm"] == pytest.approx(5.0)
    lo, hi = rep.ci95["pct_pm"]
    assert lo < 95.0 < hi
    with pytest.raises(ValueError):
        compute_kpis([])


def short(**kw):
    base = dict(n_turbines=2, sim_days=60, n_samples=100)
    base.update(kw)
    return EpisodeConfig(**base)


def test_single_freeze_period_means_one_solve():
    ep = run_episode(short(sim_days=20), "SAA", seed=3)
    assert len(ep.solve_times) == 1
    repairs = [e for e in ep.events if e["kind"] == "cost" and e["category"] in ("preventive", "corrective")]
    assert all(1 <= e["day"] <= 20 for e in repairs)


def test_integrity_and_replay():
    for pol in ("SAA", "DRCC:0.2", "Robust", "Sequential:0"):
        a = run_episode(short(), pol, seed=1)
        b = run_episode(short(), pol, seed=1)
        assert a.ledger_exact_ok
        assert sum(a.ledger.values()) == pytest.approx(a.total_cost, rel=1e-12)
        assert a.min_stock >= 0
        assert a.stock_decrements == a.n_repairs == a.n_preventive + a.n_corrective
        assert a.events == b.events
        assert a.total_cost == b.total_cost


def test_seeds_change_outcomes():
    a = run_episode(short(), "SAA", seed=1)
    b = run_episode(short(), "SAA", seed=2)
    assert a.events != b.events


def test_robust_on_noiseless_world_respects_downtime():
    # crossing times are known exactly once Phase II is visible, so no repair is late by more
    # than rho; a corrective repair inside that grace can still be the cheaper batch
    cfg = EpisodeConfig(n_turbines=5, sim_days=200, n_train=50, n_samples=100,
                        component_types=presets.noiseless(presets.default_component_types()))
    n_corr = n_rep = 0
    for seed in range(5):
        ep = run_episode(cfg, "Robust", seed=seed)
        assert all(d is not None and d - f <= cfg.template().rho for _, f, d in ep.downtimes)
        assert ep.kpis()["avg_cc_violation"] == 0.0
        n_corr += ep.n_corrective
        n_rep += ep.n_repairs
    assert n_corr <= 0.02 * n_rep


def test_infeasible_solve_aborts_episode():
    cfg = short(instance_overrides={"crew_capacity": 0}, sim_days=20)
    with pytest.raises(EpisodeAborted, match="infeasible"):
        run_episode(cfg, "SAA", seed=0)


def test_warns_on_partial_freeze(caplog):
    with caplog.at_level(logging.WARNING):
        run_episode(short(sim_days=30), "SAA", seed=0)
    assert "not a multiple" in caplog.text


def test_study_single_cell_reduces_to_episode(tmp_path):
    spec = StudySpec("one", ["SAA"], [5], replications=1, base_seed=4, episode=short())
    res = run_study(spec)
    ep = run_episode(short(), "SAA", seed=4)
    assert res.episodes["SAA", 5][0].events == ep.events
    rows = res.summary_rows()
    assert rows[0]["n"] == 1 and rows[0]["n_failed"] == 0
    write_rows(res.replication_rows(), tmp_path / "r.csv")
    back = read_rows(tmp_path / "r.csv")
    assert float(back[0]["total_cost"]) == ep.total_cost
    write_events(res.episodes["SAA", 5], tmp_path / "e.jsonl")
    assert len((tmp_path / "e.jsonl").read_text().splitlines()) == len(ep.events)
    assert StudySpec.from_dict(spec.to_dict()) == spec


def test_study_records_failed_cells():
    spec = StudySpec("bad", ["SAA"], [5], replications=2,
                     episode=short(sim_days=20, instance_overrides={"crew_capacity": 0}))
    res = run_study(spec)
    assert len(res.failures) == 2
    assert res.fully_failed_cells() == [("SAA", 5)]
    assert res.report(("SAA", 5)) is None


def test_z2_comparison_rows():
    cases = [presets.tight_regression_case(s) for s in range(3)]
    rows = run_z2_comparison(cases, [20, 400], seed=0)
    assert len(rows) == 9
    rates = violation_rates(rows)
    assert rates["exact", 0] == 0.0
    assert all(r["verified"] for r in rows if r["method"] == "exact")


def test_bench_reports_counts():
    rows = run_bench([1, 2], repeats=1)
    assert [r["components"] for r in rows] == [3, 6]
    assert rows[1]["binary"] > rows[0]["binary"]
    assert all(r["status"] == "optimal" for r in rows)
