"""Worst-case parameters over a type-infinity Wasserstein ball.

Every sample of an empirical remaining-life distribution may move by at most
``delta_j`` inside ``[0, tau_max]``. That turns the worst-case expectation,
the downtime chance constraint and the failure-probability bound into
closed-form per-sample evaluations, all computed here ahead of model build.

Also home of the exact Poisson-binomial CDF recursion used to evaluate the
number-of-failures chance constraint.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .prognostics import EmpiricalRld

log = logging.getLogger(__name__)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class AmbiguityConfig:
    delta_normalized: float = 0.0

    def __post_init__(self):
        if self.delta_normalized < 0:
            raise ValueError("normalized radius must be >= 0")

    def radius(self, rld: EmpiricalRld) -> float:
        """Per-component radius ``delta * sigma_j``."""
        return self.delta_normalized * rld.sigma_hat


@dataclass(frozen=True)
class MaintenanceCosts:
    c_pr: float
    v_pr: float
    c_co: float
    v_co: float

    def __post_init__(self):
        if min(self.c_pr, self.v_pr, self.c_co, self.v_co) < 0:
            raise ValueError("maintenance costs must be non-negative")
        if self.c_pr > self.c_co or self.v_pr > self.v_co:
            log.warning("preventive costs exceed corrective costs: %s", self)


@dataclass
class PrecomputedParams:
    """Model weights for J components over epochs 1..T (column t-1 is epoch t)."""

    psi: np.ndarray  # (J, T)
    t_star: np.ndarray  # (J,) first epoch with u_jt = 0, or T + 1
    p_bar: np.ndarray  # (J, T)
    delta: np.ndarray | None = None  # (J,) radii used

    @property
    def shape(self) -> tuple[int, int]:
        return self.psi.shape

    def u(self) -> np.ndarray:
        J, T = self.psi.shape
        return (np.arange(1, T + 1)[None, :] < self.t_star[:, None]).astype(int)

    def to_dict(self) -> dict:
        return {
            "psi": self.psi.tolist(),
            "t_star": [int(v) for v in self.t_star],
            "p_bar": self.p_bar.tolist(),
            "delta": None if self.delta is None else self.delta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrecomputedParams":
        return cls(np.asarray(d["psi"], dtype=float), np.asarray(d["t_star"], dtype=int),
                   np.asarray(d["p_bar"], dtype=float),
                   None if d.get("delta") is None else np.asarray(d["delta"], dtype=float))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def read(cls, path: str | Path) -> "PrecomputedParams":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_matrices(self, directory: str | Path) -> None:
        """Plain-text matrices (one row per component) for auditing."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.savetxt(d / "psi.txt", self.psi, fmt="%.17g")
        np.savetxt(d / "p_bar.txt", self.p_bar, fmt="%.17g")
        np.savetxt(d / "t_star.txt", self.t_star, fmt="%d")


# -- cost and per-sample worst cases -------------------------------------

def alpha(omega, t, costs: MaintenanceCosts):
    """Realized maintenance cost of repairing at epoch ``t`` given remaining life ``omega``.

    Corrective when ``omega <= t``, preventive otherwise.
    """
    omega = np.asarray(omega, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.where(omega > t,
                   costs.c_pr + costs.v_pr * (omega - t),
                   costs.c_co + costs.v_co * (t - omega))
    return out if out.ndim else float(out)


def theta_ijt(omega_i, delta_j: float, t, costs: MaintenanceCosts, xi_max: float):
    """Sup of ``alpha`` over ``|omega - omega_i| <= delta_j`` within the support."""
    omega_i = np.asarray(omega_i, dtype=float)
    t = np.asarray(t, dtype=float)
    prev_on = t < omega_i + delta_j
    corr_on = omega_i - delta_j <= t
    assert np.all(prev_on | corr_on), "both branches inactive; radius must be >= 0"
    prev = costs.c_pr + costs.v_pr * (np.minimum(omega_i + delta_j, xi_max) - t)
    corr = costs.c_co + costs.v_co * (t - np.maximum(omega_i - delta_j, 0.0))
    out = np.maximum(np.where(prev_on, prev, -np.inf), np.where(corr_on, corr, -np.inf))
    return out if out.ndim else float(out)


def psi_jt(rld: EmpiricalRld, delta_j: float, t, costs: MaintenanceCosts):
    """Worst-case expected maintenance cost (mean of per-sample sups)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    th = theta_ijt(rld.samples[:, None], delta_j, t_arr[None, :], costs, rld.tau_max)
    out = th.mean(axis=0)
    return out if np.ndim(t) else float(out[0])


def downtime_fraction(rld: EmpiricalRld, delta_j: float, t, rho: float):
    """Worst-case fraction of samples with downtime ``[t - omega]_+ <= rho``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    low = np.maximum(rld.samples - delta_j, 0.0)
    ok = np.maximum(t_arr[None, :] - low[:, None], 0.0) <= rho
    out = ok.mean(axis=0)
    return out if np.ndim(t) else float(out[0])


def u_jt(rld: EmpiricalRld, delta_j: float, t, rho: float, eps: float):
    if rho < 0 or not 0 < eps < 1:
        raise ValueError("need rho >= 0 and 0 < eps < 1")
    frac = downtime_fraction(rld, delta_j, t, rho)
    # a fraction of N samples is k/N; compare with a tolerance so 1-eps = k/N counts
    return (np.asarray(frac) >= 1.0 - eps - 1e-12).astype(int) if np.ndim(t) else int(frac >= 1.0 - eps - 1e-12)


def t_star(rld: EmpiricalRld, delta_j: float, rho: float, eps: float, t_max: int) -> int:
    """First epoch in ``1..t_max`` where ``u`` drops to 0 (binary search), else ``t_max + 1``."""
    lo, hi = 1, t_max + 1  # invariant: u == 1 on [1, lo), answer in [lo, hi]
    while lo < hi:
        mid = (lo + hi) // 2
        if u_jt(rld, delta_j, mid, rho, eps):
            lo = mid + 1
        else:
            hi = mid
    return lo


def t_star_linear(rld: EmpiricalRld, delta_j: float, rho: float, eps: float, t_max: int) -> int:
    for t in range(1, t_max + 1):
        if not u_jt(rld, delta_j, t, rho, eps):
            return t
    return t_max + 1


def p_bar_jt(rld: EmpiricalRld, delta_j: float, t):
    """Worst-case probability of failing by epoch ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = (rld.samples[:, None] - delta_j <= t_arr[None, :]).mean(axis=0)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(t) else float(out[0])


def precompute(rlds: Sequence[EmpiricalRld], costs: Sequence[MaintenanceCosts],
               ambiguity: AmbiguityConfig | float, rho: float, eps: float,
               t_max: int) -> PrecomputedParams:
    if not isinstance(ambiguity, AmbiguityConfig):
        ambiguity = AmbiguityConfig(float(ambiguity))
    if len(rlds) != len(costs):
        raise ValueError("one cost record per component required")
    epochs = np.arange(1, t_max + 1)
    J = len(rlds)
    psi = np.empty((J, t_max))
    pb = np.empty((J, t_max))
    ts = np.empty(J, dtype=int)
    deltas = np.empty(J)
    for j, (rld, c) in enumerate(zip(rlds, costs)):
        d = ambiguity.radius(rld)
        deltas[j] = d
        psi[j] = psi_jt(rld, d, epochs, c)
        pb[j] = p_bar_jt(rld, d, epochs)
        ts[j] = t_star(rld, d, rho, eps, t_max)
    return PrecomputedParams(psi=psi, t_star=ts, p_bar=pb, delta=deltas)


# -- Poisson-binomial CDF ----------------------------------------------------

def pbinom_table(ps: Sequence[float], m: int) -> np.ndarray:
    """Full table ``v[j, k] = P(sum of the first j Bernoullis <= k)`` for k <= m."""
    ps = np.asarray(ps, dtype=float)
    n = ps.size
    v = np.ones((n + 1, m + 1))
    for j in range(1, n + 1):
        p = ps[j - 1]
        for k in range(0, min(j, m + 1)):  # j > k; entries with j <= k stay 1
            if k == 0:
                v[j, 0] = v[j - 1, 0] * (1.0 - p)
            else:
                v[j, k] = v[j - 1, k - 1] * p + v[j - 1, k] * (1.0 - p)
    return np.clip(v, 0.0, 1.0)


def pbinom_cdf(ps: Sequence[float], m: int) -> float:
    """Exact ``P(sum Bernoulli(p_i) <= m)`` with O(m) rolling storage."""
    if m < 0:
        return 0.0
    ps = np.asarray(ps, dtype=float)
    if np.any((ps < -PROB_TOL) | (ps > 1 + PROB_TOL)):
        raise ValueError("probabilities must lie in [0, 1]")
    n = ps.size
    if m >= n:
        return 1.0
    v = np.ones(m + 1)  # layer j = 0
    for j in range(1, n + 1):
        p = ps[j - 1]
        new = v.copy()
        kmax = min(j - 1, m)  # entries k >= j stay 1
        new[0] = v[0] * (1.0 - p)
        if kmax >= 1:
            k = np.arange(1, kmax + 1)
            new[k] = v[k - 1] * p + v[k] * (1.0 - p)
        v = new
    return float(min(max(v[m], 0.0), 1.0))


def check_z2_probability(repair_epochs: Sequence[int | None] | Mapping[int, int],
                         p_bar: np.ndarray, gamma: int, beta: float) -> tuple[float, bool]:
    """Probability of at most ``gamma`` unexpected failures for a fixed schedule.

    ``repair_epochs[j]`` is the (1-based) repair epoch of component ``j``.
    """
    J = p_bar.shape[0]
    if isinstance(repair_epochs, Mapping):
        repair_epochs = [repair_epochs.get(j) for j in range(J)]
    if len(repair_epochs) != J or any(t is None for t in repair_epochs):
        missing = [j for j in range(J) if j >= len(repair_epochs) or repair_epochs[j] is None]
        raise ValueError(f"missing repair epoch for components {missing}")
    ps = [p_bar[j, int(t) - 1] for j, t in enumerate(repair_epochs)]
    prob = pbinom_cdf(ps, int(gamma))
    return prob, prob >= 1.0 - beta - 1e-12
