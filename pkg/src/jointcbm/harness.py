"""Rolling-horizon closed-loop simulation, KPIs and study drivers.

Day ``c + t`` of the world is epoch ``t`` of the plan made at clock ``c``.
Every ``freeze`` days the planner observes all signals, rebuilds remaining-life
distributions, re-solves over a fresh horizon and executes only the first
``freeze`` epochs.

Costs are accumulated as exact fractions so the six ledger categories add up
to the total without round-off.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import milp, presets
from .baselines import Policy, run_policy
from .degradation import ComponentTypeParams, DegradationSignal, simulate_signal, truncate_at_age
from .dro import AmbiguityConfig, check_z2_probability, precompute
from .milp import SolverOptions
from .model import ProblemInstance, build_milp, solve, verify_solution
from .prognostics import DEFAULT_N_SAMPLES, EmpiricalRld, Priors, fit_priors, predict_rld

log = logging.getLogger(__name__)

CATEGORIES = ("preventive", "corrective", "shutdown", "crew", "holding", "ordering")


class EpisodeAborted(RuntimeError):
    pass


@dataclass
class EpisodeConfig:
    n_turbines: int = 5
    sim_days: int = 200
    n_train: int = 5
    n_samples: int = DEFAULT_N_SAMPLES
    z2_mode: str = "exact"
    n_scenarios: int = 0
    component_types: list[ComponentTypeParams] | None = None
    instance_overrides: dict = field(default_factory=dict)
    # horizon solves take well under a second at desk scale, so the gap can stay tight
    time_limit: float = 120.0
    mip_gap: float = 1e-6
    backend: str = "auto"

    def types(self) -> list[ComponentTypeParams]:
        return self.component_types or presets.default_component_types()

    def template(self) -> ProblemInstance:
        return presets.wind_farm_instance(self.n_turbines, n_types=len(self.types()),
                                          **self.instance_overrides)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(backend=self.backend, time_limit=self.time_limit, mip_gap=self.mip_gap)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["component_types"] = None if self.component_types is None else [
            p.to_dict() for p in self.component_types]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        d = dict(d)
        if d.get("component_types") is not None:
            d["component_types"] = [ComponentTypeParams.from_dict(p) for p in d["component_types"]]
        return cls(**d)


@dataclass
class ComponentState:
    index: int
    type_id: int
    machine: int
    signal: DegradationSignal
    install_day: int
    generation: int = 0
    failed_day: int | None = None

    @property
    def failure_day(self) -> int:
        return self.install_day + int(round(self.signal.failure_time))


@dataclass
class SimState:
    clock: int
    components: list[ComponentState]
    stock: list[int]
    pipeline: list[tuple[int, int, int]]  # (arrival_day, type, qty)
    ledger: dict[str, Fraction] = field(default_factory=lambda: {c: Fraction(0) for c in CATEGORIES})
    total: Fraction = Fraction(0)
    events: list[dict] = field(default_factory=list)

    def charge(self, category: str, amount: float, day: int, **info) -> None:
        amt = Fraction(amount)
        self.ledger[category] += amt
        self.total += amt
        if category != "holding":
            self.events.append({"day": day, "kind": "cost", "category": category,
                                "amount": float(amount), **info})


@dataclass
class EpisodeResult:
    policy: str
    seed: int
    sim_days: int
    window: int
    rho: float
    gamma: int
    ledger: dict[str, float]
    total_cost: float
    n_preventive: int
    n_corrective: int
    failure_days: list[int]
    downtimes: list[tuple[int, int, int | None]]  # (component, failure day, repair day)
    events: list[dict]
    solve_times: list[float]
    min_stock: int
    stock_decrements: int
    n_repairs: int
    n_emergency: int
    ledger_exact_ok: bool

    @property
    def n_windows(self) -> int:
        return self.sim_days // self.window

    def window_flags(self) -> list[tuple[bool, bool]]:
        nw = self.n_windows
        z1 = [False] * nw
        z2_counts = [0] * nw
        first_bad = int(math.floor(self.rho)) + 1  # downtime > rho from this many days on
        for _, f, d in self.downtimes:
            day = f + first_bad
            end = d if d is not None else self.sim_days
            if day <= end:
                w = (day - 1) // self.window
                if 0 <= w < nw:
                    z1[w] = True
        for f in self.failure_days:
            w = (f - 1) // self.window
            if 0 <= w < nw:
                z2_counts[w] += 1
        return [(z1[w], z2_counts[w] > self.gamma) for w in range(nw)]

    def kpis(self) -> dict:
        n = self.n_preventive + self.n_corrective
        flags = self.window_flags()
        return {
            "pct_pm": 100.0 * self.n_preventive / n if n else None,
            "cost_per_day": self.total_cost / self.sim_days,
            "avg_cc_violation": (float(np.mean([0.5 * a + 0.5 * b for a, b in flags]))
                                 if flags else None),
        }

    def row(self) -> dict:
        out = {"policy": self.policy, "seed": self.seed, "sim_days": self.sim_days,
               "total_cost": self.total_cost, "n_preventive": self.n_preventive,
               "n_corrective": self.n_corrective, "n_emergency": self.n_emergency,
               "solve_time": float(sum(self.solve_times))}
        out.update(self.kpis())
        out.update({f"cost_{k}": v for k, v in self.ledger.items()})
        return out


def training_signals(types: Sequence[ComponentTypeParams], n_train: int, seed: int
                     ) -> dict[int, list[DegradationSignal]]:
    """Training sets; for a fixed seed smaller sets are prefixes of larger ones."""
    return {p.type_id: [simulate_signal(p, (seed, 3, p.type_id, i), i) for i in range(n_train)]
            for p in types}


def fit_all_priors(types: Sequence[ComponentTypeParams], n_train: int, seed: int) -> dict[int, Priors]:
    train = training_signals(types, n_train, seed)
    return {p.type_id: fit_priors(train[p.type_id], p.failure_threshold) for p in types}


def initial_state(template: ProblemInstance, types: Sequence[ComponentTypeParams], seed: int) -> SimState:
    """Components start at a uniform age that leaves at least two days of life,
    so a repair on the first executable day can still be preventive."""
    comps = []
    for j in range(template.J):
        l = template.type_of[j]
        sig = simulate_signal(types[l], (seed, 1, j, 0), signal_id=j)
        f = int(round(sig.failure_time))
        age = int(np.random.default_rng((seed, 2, j)).integers(0, max(f - 1, 1)))
        comps.append(ComponentState(j, l, template.machine_of[j], sig, install_day=-age))
    return SimState(0, comps, list(template.h0), [])


def observe_rlds(state: SimState, priors: dict[int, Priors], n_samples: int, seed: int,
                 solve_idx: int) -> list[EmpiricalRld]:
    out = []
    c = state.clock
    for comp in state.components:
        pr = priors[comp.type_id]
        if comp.failure_day <= c:
            out.append(EmpiricalRld(np.zeros(n_samples), 0.0, pr.tau_max))
            continue
        obs = truncate_at_age(comp.signal, c - comp.install_day)
        out.append(predict_rld(pr, obs, n_samples, (seed, 4, solve_idx, comp.index)))
    return out


def horizon_instance(template: ProblemInstance, state: SimState) -> ProblemInstance:
    D = template.lead_time
    inflight = [[0] * D for _ in range(template.L)]
    for day, l, q in state.pipeline:
        t = day - state.clock
        if not 1 <= t <= D:
            raise EpisodeAborted(f"pipeline order arriving on day {day} is outside the lead-time window")
        inflight[l][t - 1] += q
    return replace(template, h0=list(state.stock), inflight=inflight,
                   name=f"{template.name}@{state.clock}")


def run_episode(config: EpisodeConfig, policy: Policy | str, seed: int) -> EpisodeResult:
    """One closed-loop episode; deterministic per ``seed``."""
    if isinstance(policy, str):
        policy = Policy.parse(policy)
    types = config.types()
    tmpl = config.template()
    F, T = tmpl.freeze, tmpl.t_max
    if config.sim_days % F:
        log.warning("sim_days=%d is not a multiple of the freeze period %d", config.sim_days, F)
    priors = fit_all_priors(types, config.n_train, seed)
    st = initial_state(tmpl, types, seed)
    opts = config.solver_options()

    n_prev = n_corr = n_emerg = decrements = repairs = 0
    failure_days: list[int] = []
    downtimes: list[tuple[int, int, int | None]] = []
    open_down: dict[int, int] = {}
    solve_times: list[float] = []
    min_stock = min(st.stock)

    for solve_idx, c in enumerate(range(0, config.sim_days, F)):
        st.clock = c
        rlds = observe_rlds(st, priors, config.n_samples, seed, solve_idx)
        inst = horizon_instance(tmpl, st)
        res = run_policy(policy, inst, rlds, config.z2_mode, opts,
                         n_scenarios=config.n_scenarios, seed=(seed, 5, solve_idx))
        sol = res.solution
        if not sol.feasible:
            raise EpisodeAborted(f"{policy.label} seed {seed} day {c}: solver status {sol.status}"
                                 f" {sol.message}".rstrip())
        solve_times.append(sol.runtime)
        st.events.append({"day": c, "kind": "solve", "objective": sol.objective,
                          "status": sol.status, "repairs": sol.repair_epochs()})

        for t in range(1, min(F, config.sim_days - c) + 1):
            d = c + t
            keep = []
            for day, l, q in st.pipeline:
                if day == d:
                    st.stock[l] += q
                    st.events.append({"day": d, "kind": "arrival", "type": l, "qty": q})
                else:
                    keep.append((day, l, q))
            st.pipeline = keep
            for comp in st.components:
                if comp.failed_day is None and comp.failure_day == d:
                    comp.failed_day = d
                    failure_days.append(d)
                    open_down[comp.index] = d
                    st.events.append({"day": d, "kind": "failure", "component": comp.index})
            for l in range(tmpl.L):
                q = int(sol.g_exp[l, t - 1])
                if q:
                    st.stock[l] += q
                    st.charge("ordering", tmpl.c_exp[l] * q, d, order="expedited", type=l, qty=q)
            placed = 0
            for l in range(tmpl.L):
                q = int(sol.g_reg[l, t - 1])
                if q:
                    placed += q
                    st.pipeline.append((d + tmpl.lead_time, l, q))
                    st.charge("ordering", tmpl.c_reg[l] * q, d, order="regular", type=l, qty=q)
            if placed:
                st.charge("ordering", tmpl.b_reg, d, order="fixed")

            todo = [comp for comp in st.components if sol.x[comp.index, t - 1]]
            machines = set()
            for comp in todo:
                l = comp.type_id
                if st.stock[l] == 0:
                    st.stock[l] += 1
                    n_emerg += 1
                    st.charge("ordering", tmpl.c_exp[l], d, order="emergency", type=l, qty=1)
                st.stock[l] -= 1
                decrements += 1
                repairs += 1
                costs = tmpl.costs(comp.index)
                f = comp.failure_day
                if f <= d:
                    n_corr += 1
                    st.charge("corrective", costs.c_co + costs.v_co * (d - f), d, component=comp.index)
                    downtimes.append((comp.index, f, d))
                    open_down.pop(comp.index, None)
                else:
                    n_prev += 1
                    st.charge("preventive", costs.c_pr + costs.v_pr * (f - d), d, component=comp.index)
                machines.add(comp.machine)
                comp.generation += 1
                comp.signal = simulate_signal(types[l], (seed, 1, comp.index, comp.generation),
                                              signal_id=comp.index)
                comp.install_day = d
                comp.failed_day = None
            if len(todo) > tmpl.crew_capacity:
                st.events.append({"day": d, "kind": "capacity_exempt", "repairs": len(todo)})
            for k in sorted(machines):
                st.charge("shutdown", tmpl.c_down[k], d, machine=k)
            if todo:
                st.charge("crew", tmpl.c_crew, d)
            for l in range(tmpl.L):
                if st.stock[l]:
                    st.charge("holding", tmpl.c_hold[l] * st.stock[l], d)
            min_stock = min(min_stock, *st.stock)
        st.clock = min(c + F, config.sim_days)

    for j, f in open_down.items():
        downtimes.append((j, f, None))
    exact_ok = sum(st.ledger.values(), Fraction(0)) == st.total
    return EpisodeResult(
        policy=policy.label, seed=seed, sim_days=config.sim_days, window=T, rho=tmpl.rho,
        gamma=tmpl.gamma, ledger={k: float(v) for k, v in st.ledger.items()},
        total_cost=float(st.total), n_preventive=n_prev, n_corrective=n_corr,
        failure_days=failure_days, downtimes=downtimes, events=st.events,
        solve_times=solve_times, min_stock=min_stock, stock_decrements=decrements,
        n_repairs=repairs, n_emergency=n_emerg, ledger_exact_ok=exact_ok,
    )


# -- KPIs ------------------------------------------------------------------

@dataclass
class KpiReport:
    label: str
    n: int
    pct_pm: float | None
    cost_per_day: float
    avg_cc_violation: float | None
    se: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    rows: list[dict]

    def summary_row(self) -> dict:
        out = {"cell": self.label, "n": self.n, "pct_pm": self.pct_pm,
               "cost_per_day": self.cost_per_day, "avg_cc_violation": self.avg_cc_violation}
        for k, v in self.se.items():
            out[f"se_{k}"] = v
        return out


def compute_kpis(episodes: Sequence[EpisodeResult], label: str | None = None) -> KpiReport:
    if not episodes:
        raise ValueError("need at least one episode")
    rows = [e.row() for e in episodes]
    means, se, ci = {}, {}, {}
    for key in ("pct_pm", "cost_per_day", "avg_cc_violation"):
        vals = np.array([r[key] for r in rows if r[key] is not None], dtype=float)
        if vals.size == 0:
            means[key] = None
            continue
        means[key] = float(vals.mean())
        s = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        se[key] = s
        ci[key] = (means[key] - 1.96 * s, means[key] + 1.96 * s)
    return KpiReport(label or episodes[0].policy, len(episodes), means["pct_pm"],
                     means["cost_per_day"], means["avg_cc_violation"], se, ci, rows)


# -- studies ---------------------------------------------------------------

@dataclass
class StudySpec:
    name: str
    policies: list[str]
    training_sizes: list[int] = field(default_factory=lambda: [5])
    replications: int = 20
    base_seed: int = 0
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    workers: int = 1

    def cells(self) -> list[tuple[str, int]]:
        return [(p, n) for n in self.training_sizes for p in self.policies]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["episode"] = self.episode.to_dict()
        d["schema_version"] = 1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudySpec":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        d["episode"] = EpisodeConfig.from_dict(d.get("episode", {}))
        return cls(**d)


@dataclass
class StudyResult:
    spec: StudySpec
    episodes: dict[tuple[str, int], list[EpisodeResult]]
    failures: list[dict]

    def report(self, cell: tuple[str, int]) -> KpiReport | None:
        eps = self.episodes.get(cell)
        if not eps:
            return None
        return compute_kpis(eps, label=f"{cell[0]}|train={cell[1]}")

    def summary_rows(self) -> list[dict]:
        out = []
        for cell in self.spec.cells():
            rep = self.report(cell)
            row = {"policy": cell[0], "n_train": cell[1],
                   "n_failed": sum(1 for f in self.failures if (f["policy"], f["n_train"]) == cell)}
            if rep is not None:
                row.update({k: v for k, v in rep.summary_row().items() if k != "cell"})
            out.append(row)
        return out

    def replication_rows(self) -> list[dict]:
        out = []
        for (p, n), eps in self.episodes.items():
            for e in eps:
                out.append({"cell_policy": p, "n_train": n, **e.row()})
        return out

    def fully_failed_cells(self) -> list[tuple[str, int]]:
        return [c for c in self.spec.cells() if not self.episodes.get(c)]


def _episode_task(args):
    cfg_dict, policy, n_train, seed = args
    cfg = replace(EpisodeConfig.from_dict(cfg_dict), n_train=n_train)
    try:
        return policy, n_train, seed, run_episode(cfg, policy, seed), None
    except Exception as exc:  # recorded per cell; the study continues
        return policy, n_train, seed, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


def run_study(spec: StudySpec, progress=None) -> StudyResult:
    """Every cell runs the same replication seeds (common random numbers)."""
    tasks = [(spec.episode.to_dict(), p, n, spec.base_seed + r)
             for (p, n) in spec.cells() for r in range(spec.replications)]
    episodes: dict[tuple[str, int], list[EpisodeResult]] = {c: [] for c in spec.cells()}
    failures = []
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as ex:
            results = list(ex.map(_episode_task, tasks))
    else:
        results = []
        for task in tasks:
            results.append(_episode_task(task))
            if progress:
                progress(results[-1])
    for p, n, seed, ep, err in results:
        if ep is None:
            failures.append({"policy": p, "n_train": n, "seed": seed, "error": err})
        else:
            episodes[p, n].append(ep)
    for v in episodes.values():
        v.sort(key=lambda e: e.seed)
    return StudyResult(spec, episodes, failures)


def study_preset(name: str, replications: int = 20, workers: int = 1, base_seed: int = 0) -> StudySpec:
    """Closed-loop study presets: ``training`` (policies under sparse and
    abundant training data) and ``sequential`` (joint vs two-stage planning)."""
    if name == "training":
        return StudySpec("training", ["SAA", "DRCC:0.1", "DRCC:0.2", "Robust"], [5, 50],
                         replications, base_seed, EpisodeConfig(), workers)
    if name == "sequential":
        return StudySpec("sequential", ["DRCC:0", "Sequential:0"], [50], replications, base_seed,
                         EpisodeConfig(n_train=50), workers)
    raise ValueError(f"unknown study preset {name!r}")


# -- exact vs sample-based failure-count constraint -------------------------

def run_z2_comparison(cases: Sequence[tuple[ProblemInstance, Sequence[EmpiricalRld]]],
                      sample_sizes: Sequence[int], delta: float = 0.0,
                      options: SolverOptions | None = None, seed: int = 0) -> list[dict]:
    """Solve each case exactly and with sampled scenarios; check each sampled
    solution against the exact failure-count probability."""
    rows = []
    for i, (inst, rlds) in enumerate(cases):
        params = precompute(rlds, inst.all_costs(), AmbiguityConfig(delta), inst.rho, inst.eps,
                            inst.t_max)
        ex = solve(build_milp(inst, params, "exact"), options)
        rep = verify_solution(inst, params, ex)
        rows.append({"case": i, "method": "exact", "S": 0, "status": ex.status,
                     "objective": ex.objective, "runtime": ex.runtime,
                     "probability": rep.z2_probability, "violated": not bool(rep.z2_feasible),
                     "verified": rep.ok})
        for S in sample_sizes:
            sol = solve(build_milp(inst, params, "sample", n_scenarios=S, seed=(seed, i)), options)
            prob, ok = (check_z2_probability(sol.repair_epochs(), params.p_bar, inst.gamma, inst.beta)
                        if sol.feasible else (None, False))
            rows.append({"case": i, "method": "sample", "S": S, "status": sol.status,
                         "objective": sol.objective, "runtime": sol.runtime,
                         "probability": prob, "violated": not ok, "verified": None})
    return rows


def violation_rates(rows: Sequence[dict]) -> dict[tuple[str, int], float]:
    out: dict[tuple[str, int], list[bool]] = {}
    for r in rows:
        out.setdefault((r["method"], r["S"]), []).append(bool(r["violated"]))
    return {k: float(np.mean(v)) for k, v in out.items()}


def snapshot_case(n_turbines: int, seed: int, n_train: int = 50, delta: float = 0.0,
                  n_samples: int = DEFAULT_N_SAMPLES, **overrides
                  ) -> tuple[ProblemInstance, list[EmpiricalRld]]:
    """A wind-farm planning problem at day 0 of a simulated episode."""
    cfg = EpisodeConfig(n_turbines=n_turbines, n_train=n_train, n_samples=n_samples,
                        instance_overrides=overrides)
    types = cfg.types()
    tmpl = cfg.template()
    st = initial_state(tmpl, types, seed)
    rlds = observe_rlds(st, fit_all_priors(types, n_train, seed), n_samples, seed, 0)
    return tmpl, rlds


def run_bench(sizes: Sequence[int], repeats: int = 3, seed: int = 0,
              options: SolverOptions | None = None, delta: float = 0.2) -> list[dict]:
    """Exact-method model sizes and solve times per number of turbines."""
    rows = []
    for n in sizes:
        for r in range(repeats):
            inst, rlds = snapshot_case(n, seed + r)
            params = precompute(rlds, inst.all_costs(), AmbiguityConfig(delta), inst.rho,
                                inst.eps, inst.t_max)
            t0 = time.perf_counter()
            b = build_milp(inst, params, "exact")
            build_time = time.perf_counter() - t0
            sol = solve(b, options)
            rows.append({"turbines": n, "components": inst.J, "repeat": r, **b.model.counts(),
                         "build_time": build_time, "solve_time": sol.runtime, "status": sol.status,
                         "time_limit_hit": sol.status == milp.TIME_LIMIT})
    return rows


# -- persistence -----------------------------------------------------------

def write_rows(rows: Sequence[dict], path: str | Path) -> None:
    rows = list(rows)
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in keys})


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_events(episodes: Sequence[EpisodeResult], path: str | Path) -> None:
    with open(path, "w") as fh:
        for e in episodes:
            for ev in e.events:
                fh.write(json.dumps({"policy": e.policy, "seed": e.seed, **ev}) + "\n")
