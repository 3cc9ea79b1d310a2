"""Problem instance, exact MILP reformulation, and solution verification.

Epochs are 1-based in the public API (``repair_epochs`` returns 1..T) and
0-based in arrays (column ``t - 1`` holds epoch ``t``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import milp
from .dro import MaintenanceCosts, PrecomputedParams, check_z2_probability
from .milp import BINARY, CONTINUOUS, INTEGER, LinearModel, SolverOptions

Z2_MODES = ("exact", "sample", "off")

_PER_COMPONENT = ("c_pr", "v_pr", "c_co", "v_co")
_PER_TYPE = ("c_hold", "c_reg", "c_exp")


@dataclass
class ProblemInstance:
    """Sets, topology and the cost/capacity/risk table for one planning horizon."""

    machine_of: list[int]
    type_of: list[int]
    n_machines: int
    n_types: int
    t_max: int = 50
    freeze: int = 20
    lead_time: int = 20
    crew_capacity: int = 10
    supplier_capacity: list[float] | float = 30.0
    c_pr: list[float] | float = 1.3
    v_pr: list[float] | float = 0.13
    c_co: list[float] | float = 7.8
    v_co: list[float] | float = 0.78
    c_down: list[float] | float = 2.0
    c_crew: float = 40.0
    c_hold: list[float] | float = 0.1
    c_reg: list[float] | float = 1.5
    c_exp: list[float] | float = 6.0
    b_reg: float = 3.0
    rho: float = 5.0
    gamma: int = 7
    eps: float = 0.1
    beta: float = 0.1
    h0: list[int] | int = 0
    inflight: list[list[int]] | None = None  # [l][t-1]: regular units arriving at epoch t <= lead_time
    name: str = "instance"

    def __post_init__(self):
        J = len(self.machine_of)
        if len(self.type_of) != J:
            raise ValueError("machine_of and type_of must have one entry per component")
        for key in _PER_COMPONENT:
            setattr(self, key, _broadcast(getattr(self, key), J, key))
        for key in _PER_TYPE:
            setattr(self, key, _broadcast(getattr(self, key), self.n_types, key))
        self.c_down = _broadcast(self.c_down, self.n_machines, "c_down")
        self.supplier_capacity = _broadcast(self.supplier_capacity, self.t_max, "supplier_capacity")
        self.h0 = [int(v) for v in _broadcast(self.h0, self.n_types, "h0")]
        if self.inflight is None:
            self.inflight = [[0] * self.lead_time for _ in range(self.n_types)]
        self.inflight = [[int(q) for q in row] + [0] * (self.lead_time - len(row))
                         for row in self.inflight]
        self.gamma = int(self.gamma)
        self.validate()

    def validate(self) -> None:
        J, K, L = self.J, self.n_machines, self.n_types
        if any(not 0 <= k < K for k in self.machine_of):
            raise ValueError("machine index out of range")
        if any(not 0 <= l < L for l in self.type_of):
            raise ValueError("spare type index out of range")
        if not 1 <= self.freeze <= self.t_max:
            raise ValueError("need 1 <= freeze <= t_max")
        if self.lead_time < 0:
            raise ValueError("lead_time must be >= 0")
        if not (0 < self.eps < 1 and 0 < self.beta < 1):
            raise ValueError("eps and beta must lie in (0, 1)")
        if self.rho < 0 or self.gamma < 0:
            raise ValueError("rho and gamma must be non-negative")
        scalars = [self.c_crew, self.b_reg, self.crew_capacity]
        lists = [self.c_pr, self.v_pr, self.c_co, self.v_co, self.c_down, self.c_hold,
                 self.c_reg, self.c_exp, self.supplier_capacity, self.h0]
        if min(scalars) < 0 or any(min(v) < 0 for v in lists if len(v)):
            raise ValueError("costs and capacities must be non-negative")
        if len(self.inflight) != L or any(min(row, default=0) < 0 for row in self.inflight):
            raise ValueError("inflight must hold non-negative quantities per spare type")
        if J == 0:
            raise ValueError("instance has no components")

    @property
    def J(self) -> int:
        return len(self.machine_of)

    @property
    def K(self) -> int:
        return self.n_machines

    @property
    def L(self) -> int:
        return self.n_types

    def components_of_machine(self, k: int) -> list[int]:
        return [j for j, m in enumerate(self.machine_of) if m == k]

    def components_of_type(self, l: int) -> list[int]:
        return [j for j, m in enumerate(self.type_of) if m == l]

    def costs(self, j: int) -> MaintenanceCosts:
        return MaintenanceCosts(self.c_pr[j], self.v_pr[j], self.c_co[j], self.v_co[j])

    def all_costs(self) -> list[MaintenanceCosts]:
        return [self.costs(j) for j in range(self.J)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = 1
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        d = {k: v for k, v in d.items() if k != "schema_version"}
        return cls(**d)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def read(cls, path: str | Path) -> "ProblemInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _broadcast(value, n: int, name: str) -> list[float]:
    if np.ndim(value) == 0:
        return [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ValueError(f"{name}: expected {n} entries, got {len(value)}")
    return value


@dataclass
class Solution:
    status: str
    objective: float | None = None
    mip_gap: float | None = None
    runtime: float = 0.0
    x: np.ndarray | None = None  # (J, T)
    y: np.ndarray | None = None  # (K, T)
    z: np.ndarray | None = None  # (T,)
    r: np.ndarray | None = None  # (T,)
    h: np.ndarray | None = None  # (L, T)
    g_reg: np.ndarray | None = None
    g_exp: np.ndarray | None = None
    a: dict = field(default_factory=dict)  # (j, e) -> value
    b: dict = field(default_factory=dict)  # (j, t) -> value
    c: dict = field(default_factory=dict)  # (j, e, t) -> value
    a_final: float | None = None
    z2_mode: str = "exact"
    message: str = ""
    counts: dict = field(default_factory=dict)
    backend: str = ""

    @property
    def feasible(self) -> bool:
        return self.x is not None and self.status in (milp.OPTIMAL, milp.FEASIBLE_GAP, milp.TIME_LIMIT)

    def repair_epochs(self) -> list[int | None]:
        out = []
        for row in self.x:
            idx = np.flatnonzero(row > 0.5)
            out.append(int(idx[0]) + 1 if idx.size == 1 else None)
        return out

    def to_dict(self) -> dict:
        def arr(v):
            return None if v is None else np.asarray(v).tolist()

        return {
            "status": self.status, "objective": self.objective, "mip_gap": self.mip_gap,
            "runtime": self.runtime, "z2_mode": self.z2_mode, "message": self.message,
            "backend": self.backend, "counts": self.counts,
            "repair_epochs": None if self.x is None else self.repair_epochs(),
            "x": arr(self.x), "y": arr(self.y), "z": arr(self.z), "r": arr(self.r),
            "h": arr(self.h), "g_reg": arr(self.g_reg), "g_exp": arr(self.g_exp),
            "a": [[*k, v] for k, v in sorted(self.a.items())],
            "b": [[*k, v] for k, v in sorted(self.b.items())],
            "c": [[*k, v] for k, v in sorted(self.c.items())],
            "a_final": self.a_final,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        def arr(v, dtype=float):
            return None if v is None else np.asarray(v, dtype=dtype)

        return cls(
            status=d["status"], objective=d.get("objective"), mip_gap=d.get("mip_gap"),
            runtime=d.get("runtime", 0.0), x=arr(d.get("x"), int), y=arr(d.get("y"), int),
            z=arr(d.get("z"), int), r=arr(d.get("r"), int), h=arr(d.get("h")),
            g_reg=arr(d.get("g_reg")), g_exp=arr(d.get("g_exp")),
            a={tuple(int(i) for i in row[:-1]): row[-1] for row in d.get("a", [])},
            b={tuple(int(i) for i in row[:-1]): row[-1] for row in d.get("b", [])},
            c={tuple(int(i) for i in row[:-1]): row[-1] for row in d.get("c", [])},
            a_final=d.get("a_final"), z2_mode=d.get("z2_mode", "exact"),
            message=d.get("message", ""), counts=d.get("counts", {}), backend=d.get("backend", ""),
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def read(cls, path: str | Path) -> "Solution":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class MilpBuild:
    """A built model plus the index maps needed to read a solution back."""

    model: LinearModel
    instance: ProblemInstance
    params: PrecomputedParams | None
    z2_mode: str
    inventory: bool
    x: dict = field(default_factory=dict)  # (j, t) -> col, t 1-based
    y: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    h: dict = field(default_factory=dict)
    g_reg: dict = field(default_factory=dict)
    g_exp: dict = field(default_factory=dict)
    a: dict = field(default_factory=dict)  # (j, e) -> col (variables only)
    b: dict = field(default_factory=dict)
    c: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)  # scenario violation indicators
    a_final_col: int | None = None
    fixed_x: np.ndarray | None = None
    infeasible_components: list[int] = field(default_factory=list)
    scenarios: np.ndarray | None = None


class DimensionError(ValueError):
    pass


def _check_dims(instance: ProblemInstance, params: PrecomputedParams) -> None:
    J, T = instance.J, instance.t_max
    if params.psi.shape != (J, T) or params.p_bar.shape != (J, T) or params.t_star.shape != (J,):
        raise DimensionError(
            f"precomputed parameters have shape psi={params.psi.shape}, p_bar={params.p_bar.shape}, "
            f"t_star={params.t_star.shape}; instance needs ({J}, {T})")


def build_milp(instance: ProblemInstance, params: PrecomputedParams, z2_mode: str = "exact", *,
               n_scenarios: int = 0, seed=0, inventory: bool = True,
               valid_cuts: bool = True) -> MilpBuild:
    """Build the MILP: linear objective, one repair per component, crew and machine links,
    inventory, downtime cutoff and failure-count constraint.

    ``z2_mode`` selects the failure-count constraint: ``"exact"`` (recursion
    linearization), ``"sample"`` (``n_scenarios`` Bernoulli scenarios with at
    most ``floor(beta * S)`` violated) or ``"off"``. ``inventory=False`` drops
    all spare-parts variables and rows.
    """
    if z2_mode not in Z2_MODES:
        raise ValueError(f"z2_mode must be one of {Z2_MODES}")
    if z2_mode == "sample" and n_scenarios < 1:
        raise ValueError("sample-based mode needs n_scenarios >= 1")
    _check_dims(instance, params)
    inst = instance
    J, K, L, T = inst.J, inst.K, inst.L, inst.t_max
    m = LinearModel(name=inst.name)
    B = MilpBuild(m, inst, params, z2_mode, inventory)

    B.infeasible_components = [j for j in range(J) if params.t_star[j] <= 1]
    obj: dict[int, float] = {}

    # maintenance block ---------------------------------------------------
    for j in range(J):
        last = min(int(params.t_star[j]) - 1, T)
        for t in range(1, last + 1):
            col = m.add_var(kind=BINARY, name=f"x[{j},{t}]")
            B.x[j, t] = col
            obj[col] = params.psi[j, t - 1]
    for k in range(K):
        for t in range(1, T + 1):
            B.y[k, t] = col = m.add_var(kind=BINARY, name=f"y[{k},{t}]")
            obj[col] = inst.c_down[k]
    for t in range(1, T + 1):
        B.z[t] = col = m.add_var(kind=BINARY, name=f"z[{t}]")
        obj[col] = inst.c_crew

    for j in range(J):  # exactly one repair per component
        m.add_eq([(B.x[j, t], 1.0) for t in range(1, T + 1) if (j, t) in B.x], 1.0,
                 name=f"one_repair[{j}]")
    for t in range(1, T + 1):  # (5)
        terms = [(B.x[j, t], 1.0) for j in range(J) if (j, t) in B.x]
        if terms:
            m.add_le(terms + [(B.z[t], -float(inst.crew_capacity))], 0.0, name=f"crew[{t}]")
    members = [inst.components_of_machine(k) for k in range(K)]
    for k in range(K):  # (6)
        for t in range(1, T + 1):
            terms = [(B.x[j, t], 1.0) for j in members[k] if (j, t) in B.x]
            if terms:
                m.add_le(terms + [(B.y[k, t], -float(len(members[k])))], 0.0,
                         name=f"shutdown[{k},{t}]")
    if valid_cuts:
        # x <= y and x <= z hold for every integer point of (5)-(6); they only
        # tighten the LP relaxation
        for (j, t), col in B.x.items():
            m.add_le([(col, 1.0), (B.z[t], -1.0)], 0.0, name=f"cut_z[{j},{t}]")
            m.add_le([(col, 1.0), (B.y[inst.machine_of[j], t], -1.0)], 0.0, name=f"cut_y[{j},{t}]")

    if inventory:
        _add_inventory(B, obj, demand=None)
    if z2_mode == "exact":
        _add_z2_exact(B)
    elif z2_mode == "sample":
        _add_z2_sample(B, n_scenarios, seed)
    m.set_objective(obj)
    return B


def _add_inventory(B: MilpBuild, obj: dict[int, float], demand: np.ndarray | None) -> None:
    """Supplier capacity and stock balance. ``demand`` (L, T) replaces the x-terms when the schedule is fixed."""
    inst, m = B.instance, B.model
    J, L, T, D = inst.J, inst.L, inst.t_max, inst.lead_time
    for t in range(1, T + 1):
        B.r[t] = col = m.add_var(kind=BINARY, name=f"r[{t}]")
        obj[col] = inst.b_reg
    n_of_type = [0] * L
    for l in range(L):
        h_ub = J + inst.h0[l] + sum(inst.inflight[l])
        n_of_type[l] = len(inst.components_of_type(l))
        for t in range(1, T + 1):
            B.h[l, t] = m.add_var(0, h_ub, INTEGER, name=f"h[{l},{t}]")
            # one repair per component, so no single order needs more than |M_l| units
            B.g_reg[l, t] = m.add_var(0, n_of_type[l], INTEGER, name=f"greg[{l},{t}]")
            B.g_exp[l, t] = m.add_var(0, n_of_type[l], INTEGER, name=f"gexp[{l},{t}]")
            obj[B.h[l, t]] = inst.c_hold[l]
            obj[B.g_reg[l, t]] = inst.c_reg[l]
            obj[B.g_exp[l, t]] = inst.c_exp[l]
    for t in range(1, T + 1):  # supplier capacity
        m.add_le([(B.g_reg[l, t], 1.0) for l in range(L)]
                 + [(B.r[t], -float(inst.supplier_capacity[t - 1]))], 0.0, name=f"supplier[{t}]")
        for l in range(L):  # per-type supplier row; tighter when G_t exceeds |M_l|
            cap = min(float(inst.supplier_capacity[t - 1]), float(n_of_type[l]))
            m.add_le([(B.g_reg[l, t], 1.0), (B.r[t], -cap)], 0.0, name=f"supplier[{l},{t}]")
    for l in range(L):  # telescoping stock balance
        comps = inst.components_of_type(l)
        for t in range(1, T + 1):
            terms = [(B.h[l, t], 1.0), (B.g_exp[l, t], -1.0)]
            rhs = 0.0
            if t == 1:
                rhs += inst.h0[l]
            else:
                terms.append((B.h[l, t - 1], -1.0))
            if t <= D:
                rhs += inst.inflight[l][t - 1]
            else:
                terms.append((B.g_reg[l, t - D], -1.0))
            if demand is None:
                terms += [(B.x[j, t], 1.0) for j in comps if (j, t) in B.x]
            else:
                rhs -= demand[l, t - 1]
            m.add_eq(terms, rhs, name=f"balance[{l},{t}]")


def _add_z2_exact(B: MilpBuild) -> None:
    """Linearized Poisson-binomial recursion for the failure-count constraint.

    Only the layers that feed ``a[J, gamma]`` are created: at layer ``j`` the
    needed indices are ``e >= gamma - (J - j)``; ``a[j, e] = 1`` for ``e >= j``.
    """
    inst, m, pb = B.instance, B.model, B.params.p_bar
    J, T, g = inst.J, inst.t_max, inst.gamma
    if g >= J:
        return  # a[J, gamma] = 1 identically

    def a_ref(j: int, e: int):
        """Column index, or None when a[j, e] is the constant 1."""
        if e >= j:
            return None
        return B.a[j, e]

    for j in range(1, J + 1):
        jc = j - 1  # component index
        ts = [t for t in range(1, T + 1) if (jc, t) in B.x and pb[jc, t - 1] > 0.0]
        lo = max(0, g - (J - j))
        for e in range(lo, min(g, j - 1) + 1):
            B.a[j, e] = m.add_var(0.0, 1.0, CONTINUOUS, name=f"a[{j},{e}]")
        for e in range(lo, min(g, j - 1) + 1):
            col = B.a[j, e]
            if e == 0:
                prev = a_ref(j - 1, 0)
                rhs = 1.0 if prev is None else 0.0
                terms = [(col, 1.0)] + ([] if prev is None else [(prev, -1.0)])
                for t in ts:
                    p = pb[jc, t - 1]
                    bcol = B.b[j, t] = m.add_var(0.0, 1.0, CONTINUOUS, name=f"b[{j},{t}]")
                    terms.append((bcol, 1.0))
                    xcol = B.x[jc, t]
                    m.add_le([(bcol, 1.0), (xcol, -p)], 0.0, name=f"b_x[{j},{t}]")
                    # 0 <= a p - b <= p (1 - x)
                    if prev is None:
                        m.add_le([(bcol, 1.0)], p, name=f"b_lo[{j},{t}]")
                        m.add_le([(bcol, -1.0), (xcol, p)], 0.0, name=f"b_up[{j},{t}]")
                    else:
                        m.add_ge([(prev, p), (bcol, -1.0)], 0.0, name=f"b_lo[{j},{t}]")
                        m.add_le([(prev, p), (bcol, -1.0), (xcol, p)], p, name=f"b_up[{j},{t}]")
                m.add_eq(terms, rhs, name=f"a_rec[{j},{e}]")
            else:
                A = a_ref(j - 1, e - 1)  # a[j-1, e-1]
                Bv = a_ref(j - 1, e)  # a[j-1, e]
                rhs = 1.0 if Bv is None else 0.0
                terms = [(col, 1.0)] + ([] if Bv is None else [(Bv, -1.0)])
                for t in ts:
                    p = pb[jc, t - 1]
                    ccol = B.c[j, e, t] = m.add_var(-1.0, 0.0, CONTINUOUS, name=f"c[{j},{e},{t}]")
                    terms.append((ccol, -1.0))
                    xcol = B.x[jc, t]
                    m.add_ge([(ccol, 1.0), (xcol, p)], 0.0, name=f"c_x[{j},{e},{t}]")
                    # -p (1 - x) <= p (A - B) - c <= 0 ; constants moved to the right
                    diff, const = [], 0.0
                    if A is None:
                        const += p
                    else:
                        diff.append((A, p))
                    if Bv is None:
                        const -= p
                    else:
                        diff.append((Bv, -p))
                    m.add_le(diff + [(ccol, -1.0)], -const, name=f"c_up[{j},{e},{t}]")
                    m.add_ge(diff + [(ccol, -1.0), (xcol, -p)], -p - const, name=f"c_lo[{j},{e},{t}]")
                m.add_eq(terms, rhs, name=f"a_rec[{j},{e}]")
    B.a_final_col = B.a[J, g]
    m.add_ge([(B.a_final_col, 1.0)], 1.0 - inst.beta, name="z2_level")


def draw_scenarios(p_bar: np.ndarray, n_scenarios: int, seed: int) -> np.ndarray:
    """Bernoulli scenarios ``eta[s, j, t]`` with marginals ``p_bar[j, t]``.

    One uniform per (scenario, component) drives every epoch, so each
    component's indicators are monotone in ``t``; components stay independent.
    """
    rng = np.random.default_rng(seed)
    u = rng.random((n_scenarios, p_bar.shape[0]))
    return u[:, :, None] < p_bar[None, :, :]


def _add_z2_sample(B: MilpBuild, n_scenarios: int, seed: int) -> None:
    inst, m = B.instance, B.model
    J, g = inst.J, inst.gamma
    if g >= J:
        return
    eta = draw_scenarios(B.params.p_bar, n_scenarios, seed)
    B.scenarios = eta
    big_m = float(J - g)
    allowed = math.floor(inst.beta * n_scenarios)
    vs = []
    for s in range(n_scenarios):
        terms = [(col, 1.0) for (j, t), col in B.x.items() if eta[s, j, t - 1]]
        hit = {j for (j, t) in B.x if eta[s, j, t - 1]}
        if len(hit) <= g:
            continue  # at most one repair per component, so this scenario can never exceed gamma
        v = B.v[s] = m.add_var(kind=BINARY, name=f"v[{s}]")
        vs.append(v)
        m.add_le(terms + [(v, -big_m)], float(g), name=f"scen[{s}]")
    if vs:
        m.add_le([(v, 1.0) for v in vs], float(allowed), name="scen_budget")


def solve(build: MilpBuild, options: SolverOptions | None = None) -> Solution:
    """Optimize a built model; infeasibility is a status, never an exception."""
    inst = build.instance
    J, K, L, T = inst.J, inst.K, inst.L, inst.t_max
    counts = build.model.counts()
    if build.infeasible_components:
        return Solution(status=milp.INFEASIBLE, z2_mode=build.z2_mode, counts=counts,
                        message="no admissible repair epoch for components "
                                f"{build.infeasible_components}")
    res = build.model.optimize(options)
    sol = Solution(status=res.status, objective=res.objective, mip_gap=res.mip_gap,
                   runtime=res.runtime, z2_mode=build.z2_mode, counts=counts, backend=res.backend)
    if not res.has_solution:
        return sol
    v = res.values

    def grid(idx: dict, rows: int, integral: bool = True) -> np.ndarray:
        out = np.zeros((rows, T))
        for (i, t), col in idx.items():
            out[i, t - 1] = v[col]
        return np.rint(out).astype(int) if integral else out

    sol.x = build.fixed_x.copy() if build.fixed_x is not None else grid(build.x, J)
    if build.y:
        sol.y = grid(build.y, K)
    if build.z:
        sol.z = np.rint([v[build.z[t]] for t in range(1, T + 1)]).astype(int)
    if build.inventory:
        sol.r = np.rint([v[build.r[t]] for t in range(1, T + 1)]).astype(int)
        sol.h = grid(build.h, L)
        sol.g_reg = grid(build.g_reg, L)
        sol.g_exp = grid(build.g_exp, L)
    sol.a = {k: float(v[c]) for k, c in build.a.items()}
    sol.b = {k: float(v[c]) for k, c in build.b.items()}
    sol.c = {k: float(v[c]) for k, c in build.c.items()}
    if build.z2_mode == "exact":
        sol.a_final = 1.0 if build.a_final_col is None else float(v[build.a_final_col])
    return sol


def build_and_solve(instance: ProblemInstance, params: PrecomputedParams, z2_mode: str = "exact",
                    options: SolverOptions | None = None, **kw) -> Solution:
    return solve(build_milp(instance, params, z2_mode, **kw), options)


def build_inventory_milp(instance: ProblemInstance, schedule: np.ndarray) -> MilpBuild:
    """Inventory-only model for a fixed repair schedule ``schedule`` (J, T)."""
    inst = instance
    schedule = np.asarray(schedule, dtype=int)
    demand = np.zeros((inst.L, inst.t_max))
    for j in range(inst.J):
        demand[inst.type_of[j]] += schedule[j]
    m = LinearModel(name=inst.name + "-inventory")
    B = MilpBuild(m, inst, None, "off", True, fixed_x=schedule)
    obj: dict[int, float] = {}
    _add_inventory(B, obj, demand=demand)
    m.set_objective(obj)
    return B


# -- cost accounting -------------------------------------------------------

def cost_breakdown(instance: ProblemInstance, params: PrecomputedParams | None,
                   sol: Solution) -> dict[str, float]:
    """Objective split into maintenance (worst-case weights), shutdown, crew,
    holding and ordering parts."""
    inst = instance
    out = {"maintenance": 0.0, "shutdown": 0.0, "crew": 0.0, "holding": 0.0, "ordering": 0.0}
    if params is not None and sol.x is not None:
        out["maintenance"] = float(np.sum(params.psi * sol.x))
    if sol.y is not None:
        out["shutdown"] = float(np.sum(np.asarray(inst.c_down)[:, None] * sol.y))
    if sol.z is not None:
        out["crew"] = float(inst.c_crew * np.sum(sol.z))
    if sol.h is not None:
        out["holding"] = float(np.sum(np.asarray(inst.c_hold)[:, None] * sol.h))
        out["ordering"] = float(np.sum(np.asarray(inst.c_reg)[:, None] * sol.g_reg)
                                + np.sum(np.asarray(inst.c_exp)[:, None] * sol.g_exp)
                                + inst.b_reg * np.sum(sol.r))
    return out


# -- verification ----------------------------------------------------------

@dataclass
class VerificationReport:
    violations: list[str] = field(default_factory=list)
    z2_probability: float | None = None
    z2_feasible: bool | None = None
    a_solver: float | None = None
    a_mismatch: float | None = None
    objective_recomputed: float | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def verify_solution(instance: ProblemInstance, params: PrecomputedParams, solution: Solution,
                    tol: float = 1e-6) -> VerificationReport:
    """Re-check every constraint arithmetically and recompute the failure-count probability."""
    inst, sol = instance, solution
    rep = VerificationReport()
    if sol.x is None:
        rep.violations.append(f"no solution to verify (status {sol.status})")
        return rep
    J, K, L, T = inst.J, inst.K, inst.L, inst.t_max
    x = np.asarray(sol.x)
    viol = rep.violations

    if not np.all((x == 0) | (x == 1)):
        viol.append("x is not binary")
    for j in range(J):
        n = int(x[j].sum())
        if n != 1:
            viol.append(f"one-repair: component {j} has {n} repairs")
    cut = np.arange(1, T + 1)[None, :] >= params.t_star[:, None]
    for j, t in zip(*np.nonzero(cut & (x > 0))):
        viol.append(f"z1: component {j} repaired at epoch {t + 1} >= t*={params.t_star[j]}")
    if sol.z is not None:
        load = x.sum(axis=0)
        for t in np.flatnonzero(load > inst.crew_capacity * np.asarray(sol.z)):
            viol.append(f"eq5: epoch {t + 1} has {load[t]} repairs with z={sol.z[t]}")
    if sol.y is not None:
        for k in range(K):
            comps = inst.components_of_machine(k)
            load = x[comps].sum(axis=0)
            for t in np.flatnonzero(load > len(comps) * np.asarray(sol.y[k])):
                viol.append(f"eq6: machine {k} epoch {t + 1} repairs without shutdown")
    if sol.h is not None:
        h, gr, ge, r = (np.asarray(v, dtype=float) for v in (sol.h, sol.g_reg, sol.g_exp, sol.r))
        for arr, name in ((h, "h"), (gr, "g_reg"), (ge, "g_exp")):
            if np.any(np.abs(arr - np.rint(arr)) > tol):
                viol.append(f"{name} is not integral")
            if np.any(arr < -tol):
                viol.append(f"{name} has negative entries")
        for t in range(T):
            if gr[:, t].sum() > inst.supplier_capacity[t] * r[t] + tol:
                viol.append(f"eq7: epoch {t + 1} regular orders exceed capacity/flag")
        for l in range(L):
            comps = inst.components_of_type(l)
            prev = inst.h0[l]
            for t in range(1, T + 1):
                arrive = inst.inflight[l][t - 1] if t <= inst.lead_time else gr[l, t - 1 - inst.lead_time]
                expect = prev + ge[l, t - 1] + arrive - x[comps, t - 1].sum()
                if abs(h[l, t - 1] - expect) > tol:
                    viol.append(f"eq8: type {l} epoch {t}: h={h[l, t - 1]:g}, balance gives {expect:g}")
                prev = h[l, t - 1]

    parts = cost_breakdown(inst, params, sol)
    rep.objective_recomputed = sum(parts.values())
    if sol.objective is not None and abs(sol.objective - rep.objective_recomputed) > tol * max(1.0, abs(sol.objective)):
        viol.append(f"objective {sol.objective:.9g} != recomputed {rep.objective_recomputed:.9g}")

    epochs = sol.repair_epochs()
    if all(t is not None for t in epochs):
        prob, ok = check_z2_probability(epochs, params.p_bar, inst.gamma, inst.beta)
        rep.z2_probability, rep.z2_feasible = prob, ok
        if sol.z2_mode == "exact":
            rep.a_solver = sol.a_final
            if sol.a_final is not None:
                rep.a_mismatch = abs(sol.a_final - prob)
                if rep.a_mismatch > tol:
                    viol.append(f"z2: solver a={sol.a_final:.9f} vs recursion {prob:.9f}")
            if not ok:
                viol.append(f"z2: probability {prob:.6f} < 1 - beta")
    return rep


def exhaustive_schedule_cost(instance: ProblemInstance, params: PrecomputedParams,
                             epochs: Sequence[int]) -> float:
    """Maintenance-side cost (psi + shutdown + crew) of a fixed schedule, used by oracles."""
    inst = instance
    cost = sum(params.psi[j, t - 1] for j, t in enumerate(epochs))
    used = {t for t in epochs}
    for t in used:
        n = sum(1 for tt in epochs if tt == t)
        if n > inst.crew_capacity:
            return math.inf
        cost += inst.c_crew
        machines = {inst.machine_of[j] for j, tt in enumerate(epochs) if tt == t}
        cost += sum(inst.c_down[k] for k in machines)
    return cost
