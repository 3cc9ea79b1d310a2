"""Two-phase exponential degradation signals with Brownian noise.

Phase I holds the signal at a constant level ``phi`` for a random duration
``tau ~ Uniform(a, b)``. Phase II grows as

    S(t) = theta * exp(beta * (t - tau) + W(t - tau))

where ``W`` is a zero-mean Brownian motion with variance ``bm_sigma**2 * s``
after elapsed time ``s``. A component fails at the first grid point where
``S(t) >= failure_threshold``.

Time is measured in days throughout the package.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SeedLike = int | Sequence[int] | np.random.SeedSequence

_CHUNK = 256


@dataclass(frozen=True)
class ComponentTypeParams:
    """Generative degradation model for one component (spare) type."""

    type_id: int
    phi: float
    tau_range: tuple[float, float]
    log_theta_prior: tuple[float, float]
    log_beta_prior: tuple[float, float]
    bm_sigma: float
    failure_threshold: float
    dt: float = 1.0
    tau_max: float = 1000.0
    hard_cap: float | None = None
    # overrides used by deterministic tests; None means "draw from the prior"
    fixed_theta: float | None = None
    fixed_beta: float | None = None
    fixed_tau: float | None = None

    def __post_init__(self):
        a, b = self.tau_range
        if not (a >= 0 and b > a):
            raise ValueError(f"tau_range must satisfy 0 <= a < b, got {self.tau_range}")
        if self.log_theta_prior[1] <= 0 or self.log_beta_prior[1] <= 0:
            raise ValueError("prior standard deviations must be positive")
        if self.bm_sigma < 0:
            raise ValueError("bm_sigma must be non-negative")
        if not (self.failure_threshold > self.phi > 0):
            raise ValueError(f"need failure_threshold > phi > 0, got "
                             f"{self.failure_threshold} and {self.phi}")
        if self.dt <= 0 or self.tau_max <= 0:
            raise ValueError("dt and tau_max must be positive")

    @property
    def cap(self) -> float:
        return self.hard_cap if self.hard_cap is not None else 100.0 * self.tau_range[1]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentTypeParams":
        d = dict(d)
        for key in ("tau_range", "log_theta_prior", "log_beta_prior"):
            d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class DegradationSignal:
    type_id: int
    t: np.ndarray
    s: np.ndarray
    failure_time: float
    tau: float
    theta: float
    beta: float
    signal_id: int = 0
    residual_life: float | None = None  # set on truncated prefixes

    def __len__(self) -> int:
        return len(self.t)

    @property
    def age(self) -> float:
        return float(self.t[-1])

    @property
    def realized_params(self) -> tuple[float, float, float]:
        return self.tau, self.theta, self.beta


class SimulationError(RuntimeError):
    pass


def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def simulate_signal(params: ComponentTypeParams, seed: SeedLike, signal_id: int = 0) -> DegradationSignal:
    """Simulate one run-to-failure signal on the ``dt`` grid."""
    rng = _rng(seed)
    a, b = params.tau_range
    tau = rng.uniform(a, b)
    log_theta = rng.normal(*params.log_theta_prior)
    log_beta = rng.normal(*params.log_beta_prior)
    if params.fixed_tau is not None:
        tau = params.fixed_tau
    theta = math.exp(log_theta) if params.fixed_theta is None else params.fixed_theta
    beta = math.exp(log_beta) if params.fixed_beta is None else params.fixed_beta

    dt = params.dt
    k_tau = int(math.floor(tau / dt))  # last grid index inside Phase I
    first = k_tau + 1
    log_lam = math.log(params.failure_threshold)
    log_theta = math.log(theta)

    # Phase II, generated chunk by chunk so the draw sequence never depends
    # on where the crossing happens.
    logs: list[np.ndarray] = []
    k0 = first
    w = 0.0
    prev_elapsed = 0.0
    crossing = None
    while crossing is None:
        ks = np.arange(k0, k0 + _CHUNK)
        elapsed = ks * dt - tau
        steps = np.diff(np.concatenate(([prev_elapsed], elapsed)))
        incr = rng.normal(0.0, 1.0, size=_CHUNK) * params.bm_sigma * np.sqrt(steps)
        wpath = w + np.cumsum(incr)
        log_s = log_theta + beta * elapsed + wpath
        hit = np.nonzero(log_s >= log_lam)[0]
        if hit.size:
            crossing = int(hit[0])
            logs.append(log_s[: crossing + 1])
        else:
            logs.append(log_s)
            if (k0 + _CHUNK) * dt > params.cap:
                raise SimulationError(
                    f"type {params.type_id}: no threshold crossing before t={params.cap:g}")
        w = float(wpath[-1])
        prev_elapsed = float(elapsed[-1])
        k0 += _CHUNK

    phase2 = np.exp(np.concatenate(logs))
    # exp/log round trips must not push the last sample under the threshold
    phase2[-1] = max(phase2[-1], params.failure_threshold)
    phase2[:-1] = np.minimum(phase2[:-1], np.nextafter(params.failure_threshold, 0.0))
    s = np.concatenate((np.full(first, params.phi), phase2))
    t = np.arange(len(s)) * dt
    return DegradationSignal(
        type_id=params.type_id, t=t, s=s, failure_time=float(t[-1]),
        tau=float(tau), theta=float(theta), beta=float(beta), signal_id=signal_id,
    )


def generate_dataset(params: ComponentTypeParams, n: int, seed: int) -> list[DegradationSignal]:
    """``n`` independent signals; signal ``i`` is seeded by ``(seed, i)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [simulate_signal(params, (seed, i), signal_id=i) for i in range(n)]


def truncate_at_age(signal: DegradationSignal, age: float) -> DegradationSignal:
    """Observed prefix up to ``age``; records the true residual life."""
    if age < 0:
        raise ValueError("age must be non-negative")
    if age > signal.failure_time:
        raise ValueError(f"age {age} is past the failure time {signal.failure_time}: "
                         "component already failed")
    keep = signal.t <= age + 1e-9
    return replace(signal, t=signal.t[keep], s=signal.s[keep],
                   residual_life=signal.failure_time - age)


def mean_lifetime(params: ComponentTypeParams, n: int = 1000, seed: int = 0) -> float:
    return float(np.mean([sig.failure_time for sig in generate_dataset(params, n, seed)]))


def calibrate_phase1(params: ComponentTypeParams, target: float, n: int = 1000,
                     seed: int = 0, iters: int = 4) -> ComponentTypeParams:
    """Shift the Phase-I window so the Monte-Carlo mean lifetime hits ``target``.

    The width ``b - a`` is preserved; ``a`` is floored at zero.
    """
    p = params
    for _ in range(iters):
        gap = target - mean_lifetime(p, n, seed)
        a, b = p.tau_range
        shift = max(gap, -a)
        p = replace(p, tau_range=(a + shift, b + shift))
        if abs(gap) < 0.5:
            break
    return p


# -- serialization ---------------------------------------------------------

def write_signals_csv(signals: Iterable[DegradationSignal], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component_type", "signal_id", "t", "S"])
        for sig in signals:
            for t, s in zip(sig.t, sig.s):
                w.writerow([sig.type_id, sig.signal_id, repr(float(t)), repr(float(s))])


def read_signals_csv(path: str | Path, params: dict[int, ComponentTypeParams] | None = None
                     ) -> list[DegradationSignal]:
    """Read signals back. Realized parameters are not stored, so they come back as NaN."""
    groups: dict[tuple[int, int], tuple[list[float], list[float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["component_type"]), int(row["signal_id"]))
            ts, ss = groups.setdefault(key, ([], []))
            ts.append(float(row["t"]))
            ss.append(float(row["S"]))
    out = []
    for (type_id, sid), (ts, ss) in groups.items():
        out.append(DegradationSignal(type_id=type_id, t=np.array(ts), s=np.array(ss),
                                     failure_time=ts[-1], tau=math.nan, theta=math.nan,
                                     beta=math.nan, signal_id=sid))
    return out


@dataclass
class DatasetManifest:
    name: str
    seed: int
    signals_per_type: int
    types: list[dict] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)
    schema_version: int = 1

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2))

    @classmethod
    def read(cls, path: str | Path) -> "DatasetManifest":
        return cls(**json.loads(Path(path).read_text()))
