"""Bayesian remaining-life estimation from partially observed signals.

The Phase-II log-signal is modelled as Brownian motion with unknown drift
and known volatility. Training signals give a normal prior on the drift and
a plug-in volatility; online increments update the drift conjugately, and
the first passage of the remaining log-distance is Inverse Gaussian.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .degradation import DegradationSignal, SeedLike

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-8
SIGMA_FLOOR = 1e-9
DEFAULT_N_SAMPLES = 200


@dataclass
class Priors:
    type_id: int
    drift_prior: tuple[float, float]  # (mean, variance)
    bm_sigma_hat: float
    phase1_stats: tuple[float, float]  # observed (min, max) Phase-I length
    log_theta_stats: tuple[float, float]  # (mean, variance)
    phi: float
    failure_threshold: float
    dt: float
    tau_max: float
    n_signals: int = 0

    def __post_init__(self):
        if self.drift_prior[1] <= 0 or self.log_theta_stats[1] < 0:
            raise ValueError("prior variances must be positive")
        if self.bm_sigma_hat <= 0:
            raise ValueError("bm_sigma_hat must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Priors":
        d = dict(d)
        for key in ("drift_prior", "phase1_stats", "log_theta_stats"):
            d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class RldPosterior:
    nu: float
    gamma_shape: float
    tau_max: float
    drift_mean: float = math.nan
    drift_var: float = math.nan

    def __post_init__(self):
        if not (self.nu > 0 and self.gamma_shape > 0):
            raise ValueError(f"IG parameters must be positive, got nu={self.nu}, "
                             f"gamma={self.gamma_shape}")

    @property
    def mean(self) -> float:
        return self.nu

    @property
    def variance(self) -> float:
        return self.nu ** 3 / self.gamma_shape


@dataclass
class EmpiricalRld:
    samples: np.ndarray
    sigma_hat: float
    tau_max: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("need at least one sample")
        if np.any(self.samples < 0) or np.any(self.samples > self.tau_max):
            raise ValueError("samples must lie in [0, tau_max]")

    @classmethod
    def from_samples(cls, samples, tau_max: float | None = None) -> "EmpiricalRld":
        samples = np.asarray(samples, dtype=float)
        if tau_max is None:
            tau_max = float(samples.max()) if samples.size else 0.0
        sd = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
        return cls(samples, sd, float(tau_max))

    @property
    def n(self) -> int:
        return self.samples.size


def _phase2_mask(signal: DegradationSignal, phi: float) -> np.ndarray:
    return signal.s != phi


def fit_priors(training: Sequence[DegradationSignal], failure_threshold: float,
               tau_max: float | None = None) -> Priors:
    """Estimate drift/volatility priors from complete run-to-failure signals."""
    if len(training) < 2:
        raise ValueError(f"need at least 2 training signals, got {len(training)}")
    phi = float(training[0].s[0])
    dt = float(training[0].t[1] - training[0].t[0]) if len(training[0].t) > 1 else 1.0

    slopes, intercepts, taus, lifetimes = [], [], [], []
    resid_ss, resid_df = 0.0, 0
    for sig in training:
        mask = _phase2_mask(sig, phi)
        if mask.sum() < 3:
            log.warning("signal %s has fewer than 3 Phase-II samples; skipped", sig.signal_id)
            continue
        first = int(np.argmax(mask))
        tau_hat = float(sig.t[first - 1]) if first > 0 else 0.0
        tt = sig.t[mask] - tau_hat
        ls = np.log(sig.s[mask])
        slope, intercept = np.polyfit(tt, ls, 1)
        slopes.append(slope)
        intercepts.append(intercept)
        taus.append(tau_hat)
        lifetimes.append(sig.failure_time)
        inc = np.diff(ls)
        resid_ss += float(np.sum((inc - inc.mean()) ** 2))
        resid_df += inc.size - 1
    if len(slopes) < 2:
        raise ValueError("fewer than 2 usable training signals after skipping")

    slopes = np.array(slopes)
    m = float(slopes.mean())
    v = float(slopes.var(ddof=1))
    v = max(v, VARIANCE_FLOOR * m * m, 1e-300)
    sigma = math.sqrt(resid_ss / max(resid_df, 1) / dt)
    sigma = max(sigma, SIGMA_FLOOR)
    icpt = np.array(intercepts)
    return Priors(
        type_id=training[0].type_id,
        drift_prior=(m, v),
        bm_sigma_hat=sigma,
        phase1_stats=(float(min(taus)), float(max(taus))),
        log_theta_stats=(float(icpt.mean()), float(icpt.var(ddof=1))),
        phi=phi,
        failure_threshold=float(failure_threshold),
        dt=dt,
        tau_max=float(tau_max) if tau_max is not None else 3.0 * float(max(lifetimes)),
        n_signals=len(slopes),
    )


def has_phase2(priors: Priors, observed: DegradationSignal) -> bool:
    return bool(np.any(_phase2_mask(observed, priors.phi)))


def update_posterior(priors: Priors, observed: DegradationSignal) -> RldPosterior:
    """Conjugate drift update, then the IG first-passage law of the remaining distance."""
    mask = _phase2_mask(observed, priors.phi)
    if not mask.any():
        raise ValueError("observed prefix has no Phase-II samples")
    ls = np.log(observed.s[mask])
    r = math.log(priors.failure_threshold) - float(ls[-1])
    if r <= 0:
        raise ValueError("signal is already at or over the failure threshold")

    m0, v0 = priors.drift_prior
    sig2 = priors.bm_sigma_hat ** 2
    inc = np.diff(ls)
    prec = 1.0 / v0 + inc.size * priors.dt / sig2
    mean = (m0 / v0 + float(inc.sum()) / sig2) / prec
    if mean <= 0:
        log.warning("posterior drift %.3g <= 0; falling back to the prior mean", mean)
        mean = m0
    return RldPosterior(nu=r / mean, gamma_shape=r * r / sig2, tau_max=priors.tau_max,
                        drift_mean=mean, drift_var=1.0 / prec)


def sample_rld(posterior: RldPosterior, n: int, seed: SeedLike) -> EmpiricalRld:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    ratio = posterior.gamma_shape / posterior.nu
    if ratio > 1e12:
        # numpy's Wald sampler loses precision for near-degenerate shapes
        draws = posterior.nu + math.sqrt(posterior.variance) * rng.standard_normal(n)
    else:
        draws = rng.wald(posterior.nu, posterior.gamma_shape, size=n)
    samples = np.clip(draws, 0.0, posterior.tau_max)
    return EmpiricalRld.from_samples(samples, posterior.tau_max)


def sample_prior_predictive(priors: Priors, age: float, n: int, seed: SeedLike) -> EmpiricalRld:
    """Remaining-life samples for a component still in Phase I.

    Remaining Phase-I time comes from the observed training range of Phase-I
    lengths conditioned on survival to ``age``; Phase II draws a start level
    and a drift from the training statistics, then an IG first-passage time.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    a, b = priors.phase1_stats
    lo = max(a, age)
    if b > lo:
        rem1 = rng.uniform(lo, b, size=n) - age
    else:
        rem1 = np.zeros(n)
    lt_mean, lt_var = priors.log_theta_stats
    log_theta = rng.normal(lt_mean, math.sqrt(max(lt_var, 0.0)), size=n)
    m0, v0 = priors.drift_prior
    drift = rng.normal(m0, math.sqrt(v0), size=n)
    drift = np.maximum(drift, 0.05 * abs(m0))
    r = np.maximum(math.log(priors.failure_threshold) - log_theta, 1e-9)
    sig2 = priors.bm_sigma_hat ** 2
    shape = np.minimum(r * r / sig2, 1e12)
    rem2 = rng.wald(r / drift, shape)
    samples = np.clip(rem1 + rem2, 0.0, priors.tau_max)
    return EmpiricalRld.from_samples(samples, priors.tau_max)


def predict_rld(priors: Priors, observed: DegradationSignal, n: int = DEFAULT_N_SAMPLES,
                seed: SeedLike = 0) -> EmpiricalRld:
    """Empirical RLD for a surviving component given its observed prefix."""
    if has_phase2(priors, observed):
        return sample_rld(update_posterior(priors, observed), n, seed)
    return sample_prior_predictive(priors, observed.age, n, seed)


def write_priors(priors: dict[int, Priors], path: str | Path) -> None:
    Path(path).write_text(json.dumps({str(k): p.to_dict() for k, p in priors.items()}, indent=2))


def read_priors(path: str | Path) -> dict[int, Priors]:
    raw = json.loads(Path(path).read_text())
    return {int(k): Priors.from_dict(v) for k, v in raw.items()}


def write_rlds(rlds: Sequence[EmpiricalRld], path: str | Path) -> None:
    """One entry per component, in component order. Floats round-trip exactly."""
    data = {"schema_version": 1,
            "rlds": [{"samples": [float(v) for v in r.samples], "sigma_hat": r.sigma_hat,
                      "tau_max": r.tau_max} for r in rlds]}
    Path(path).write_text(json.dumps(data))


def read_rlds(path: str | Path) -> list[EmpiricalRld]:
    raw = json.loads(Path(path).read_text())
    return [EmpiricalRld(np.array(r["samples"], dtype=float), float(r["sigma_hat"]),
                         float(r["tau_max"])) for r in raw["rlds"]]
