"""Comparison policies: SAA, robust worst case, sequential planning, and DRCC itself."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import milp
from .dro import AmbiguityConfig, PrecomputedParams, precompute
from .milp import SolverOptions
from .model import (ProblemInstance, Solution, build_inventory_milp, build_milp, cost_breakdown,
                    solve)
from .prognostics import EmpiricalRld

KINDS = ("drcc", "saa", "robust", "sequential")


@dataclass(frozen=True)
class Policy:
    """A planning policy. ``joint`` is accepted as an alias of ``drcc``."""

    kind: str
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {KINDS}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.kind == "saa" and self.delta != 0:
            raise ValueError("SAA is DRCC with delta = 0")

    @property
    def label(self) -> str:
        if self.kind == "saa":
            return "SAA"
        if self.kind == "robust":
            return "Robust" if self.delta == 0 else f"Robust:{self.delta:g}"
        if self.kind == "sequential":
            return f"Sequential:{self.delta:g}"
        return f"DRCC:{self.delta:g}"

    @classmethod
    def parse(cls, text: str) -> "Policy":
        m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?::\s*([0-9.eE+-]+))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse policy {text!r}")
        kind = m.group(1).lower()
        kind = {"rob": "robust", "joint": "drcc", "seq": "sequential"}.get(kind, kind)
        delta = float(m.group(2)) if m.group(2) else 0.0
        return cls(kind, delta)


@dataclass
class PlanResult:
    solution: Solution
    params: PrecomputedParams
    policy: Policy
    stages: list[Solution] = field(default_factory=list)

    @property
    def objective(self) -> float | None:
        return self.solution.objective


def run_drcc(instance: ProblemInstance, rlds: Sequence[EmpiricalRld], delta: float,
             z2_mode: str = "exact", options: SolverOptions | None = None,
             n_scenarios: int = 0, seed: int = 0) -> PlanResult:
    params = precompute(rlds, instance.all_costs(), AmbiguityConfig(delta), instance.rho,
                        instance.eps, instance.t_max)
    b = build_milp(instance, params, z2_mode, n_scenarios=n_scenarios, seed=seed)
    return PlanResult(solve(b, options), params, Policy("drcc", delta))


def run_saa(instance: ProblemInstance, rlds: Sequence[EmpiricalRld], z2_mode: str = "exact",
            options: SolverOptions | None = None, **kw) -> PlanResult:
    res = run_drcc(instance, rlds, 0.0, z2_mode, options, **kw)
    res.policy = Policy("saa")
    return res


def worst_case_life(rld: EmpiricalRld, delta: float) -> float:
    """Earliest remaining life inside the ball: ``max(min_i omega_i - delta * sigma, 0)``."""
    return max(float(rld.samples.min()) - delta * rld.sigma_hat, 0.0)


def run_robust(instance: ProblemInstance, rlds: Sequence[EmpiricalRld], delta: float = 0.0,
               options: SolverOptions | None = None) -> PlanResult:
    """Plan against a single worst-case failure time per component.

    Each remaining life is pinned at its earliest value, so the cost weights
    are ``alpha(omega_wc, t)``, the downtime rule becomes ``t <= omega_wc + rho``
    and the failure count is deterministic.
    """
    pinned = [EmpiricalRld(np.array([worst_case_life(r, delta)]), 0.0, r.tau_max) for r in rlds]
    params = precompute(pinned, instance.all_costs(), AmbiguityConfig(0.0), instance.rho,
                        instance.eps, instance.t_max)
    b = build_milp(instance, params, "exact")
    return PlanResult(solve(b, options), params, Policy("robust", delta))


def run_sequential(instance: ProblemInstance, rlds: Sequence[EmpiricalRld], delta: float = 0.0,
                   z2_mode: str = "exact", options: SolverOptions | None = None,
                   n_scenarios: int = 0, seed: int = 0) -> PlanResult:
    """Maintenance first (no spare variables), then inventory for the fixed schedule.

    The returned solution merges both stages; its objective is the combined
    cost on the joint model's ledger.
    """
    params = precompute(rlds, instance.all_costs(), AmbiguityConfig(delta), instance.rho,
                        instance.eps, instance.t_max)
    stage1 = solve(build_milp(instance, params, z2_mode, n_scenarios=n_scenarios, seed=seed,
                              inventory=False), options)
    policy = Policy("sequential", delta)
    if not stage1.feasible:
        return PlanResult(stage1, params, policy, [stage1])
    stage2 = solve(build_inventory_milp(instance, stage1.x), options)
    # expedited orders are unbounded in time, so the inventory stage always has a solution
    assert stage2.feasible, f"inventory stage failed with status {stage2.status}"
    merged = Solution(
        status=stage1.status if stage2.status == milp.OPTIMAL else stage2.status,
        objective=stage1.objective + stage2.objective,
        mip_gap=max(stage1.mip_gap or 0.0, stage2.mip_gap or 0.0),
        runtime=stage1.runtime + stage2.runtime,
        x=stage1.x, y=stage1.y, z=stage1.z, r=stage2.r, h=stage2.h,
        g_reg=stage2.g_reg, g_exp=stage2.g_exp, a=stage1.a, b=stage1.b, c=stage1.c,
        a_final=stage1.a_final, z2_mode=stage1.z2_mode, backend=stage1.backend,
        counts={"stage1": stage1.counts, "stage2": stage2.counts},
    )
    return PlanResult(merged, params, policy, [stage1, stage2])


def run_policy(policy: Policy, instance: ProblemInstance, rlds: Sequence[EmpiricalRld],
               z2_mode: str = "exact", options: SolverOptions | None = None,
               n_scenarios: int = 0, seed: int = 0) -> PlanResult:
    if policy.kind == "saa":
        return run_saa(instance, rlds, z2_mode, options, n_scenarios=n_scenarios, seed=seed)
    if policy.kind == "drcc":
        return run_drcc(instance, rlds, policy.delta, z2_mode, options, n_scenarios, seed)
    if policy.kind == "robust":
        return run_robust(instance, rlds, policy.delta, options)
    return run_sequential(instance, rlds, policy.delta, z2_mode, options, n_scenarios, seed)


def plan_costs(instance: ProblemInstance, result: PlanResult) -> dict[str, float]:
    return cost_breakdown(instance, result.params, result.solution)
