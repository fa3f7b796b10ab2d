"""Pilot Monte Carlo estimation of moment profiles and the resulting schedules.

A single batch of coupled bundles ``(Y_0, ..., Y_m)`` feeds both profiles:

* coupled:     ``eta_bar = (Var Y_m, E(Y_0 - Y_m)^2, ..., E(Y_{m-1} - Y_m)^2, 0)``
* independent: ``eta_tilde`` from ``Var(Y_j - Y_{j-1})`` and ``E(Y_i - Y_m)`` via
  :func:`rmlmc.estimators.mu_tilde_profile`.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import DegenerateProfileError, DomainError
from .estimators import mu_tilde_profile
from .schedule_opt import optimal_distribution
from .sde import coupled_bundles, coupled_cost_profile, independent_cost_profile

__all__ = [
    "PilotConfig",
    "PilotResult",
    "pilot_bundles",
    "eta_bar_from_bundles",
    "eta_tilde_from_bundles",
    "estimate_eta_bar",
    "estimate_eta_tilde",
    "build_schedules",
    "run_pilot",
]


@dataclass(frozen=True)
class PilotConfig:
    m: int = 13
    n_pilot: int = 10_000
    seed: int = 0
    chunk: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise DomainError(f"pilot needs m >= 1, got {self.m}")
        if self.n_pilot < 2:
            raise DomainError(f"pilot needs n_pilot >= 2, got {self.n_pilot}")
        if self.chunk < 1:
            raise DomainError("chunk must be positive")


@dataclass
class PilotResult:
    m: int
    n_pilot: int
    eta_bar: np.ndarray
    eta_bar_se: np.ndarray
    eta_tilde: np.ndarray
    eta_tilde_se: np.ndarray
    q_star_coupled: np.ndarray | None = None
    q_star_independent: np.ndarray | None = None
    n_nonmonotone: dict = field(default_factory=dict)

    _ARRAYS = ("eta_bar", "eta_bar_se", "eta_tilde", "eta_tilde_se",
               "q_star_coupled", "q_star_independent")

    def to_dict(self):
        d = {"m": self.m, "n_pilot": self.n_pilot, "n_nonmonotone": dict(self.n_nonmonotone)}
        for name in self._ARRAYS:
            v = getattr(self, name)
            d[name] = None if v is None else [float(x) for x in v]
        return d

    @classmethod
    def from_dict(cls, d):
        kw = {k: d[k] for k in ("m", "n_pilot")}
        for name in cls._ARRAYS:
            v = d.get(name)
            kw[name] = None if v is None else np.asarray(v, dtype=float)
        kw["n_nonmonotone"] = dict(d.get("n_nonmonotone", {}))
        return cls(**kw)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _var_se(x):
    # Large-sample standard error of the sample variance.
    n = x.shape[0]
    c = x - x.mean(axis=0)
    s2 = (c * c).sum(axis=0) / (n - 1)
    m4 = (c ** 4).mean(axis=0)
    return s2, np.sqrt(np.maximum(m4 - s2 * s2, 0.0) / n)


def _mean_se(x):
    n = x.shape[0]
    return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(n)


def _check_positive(profile, name):
    bad = np.flatnonzero(profile[:-1] <= 0)
    if bad.size:
        raise DegenerateProfileError(
            f"{name} is not positive at index {int(bad[0])} (value {profile[bad[0]]!r}); "
            "the optimal schedule is undefined"
        )


def eta_bar_from_bundles(y, check: bool = True):
    """Coupled profile and standard errors from bundles ``y`` of shape ``(n, m+1)``."""
    y = np.asarray(y, dtype=float)
    m = y.shape[1] - 1
    top = y[:, m]
    eta = np.zeros(m + 2)
    se = np.zeros(m + 2)
    eta[0], se[0] = _var_se(top)
    sq = (y[:, :m] - top[:, None]) ** 2
    eta[1 : m + 1], se[1 : m + 1] = _mean_se(sq)
    if check:
        _check_positive(eta, "eta_bar")
    return eta, se


def eta_tilde_from_bundles(y, check: bool = True):
    """Independent profile and approximate standard errors from the same bundles."""
    y = np.asarray(y, dtype=float)
    m = y.shape[1] - 1
    deltas = np.diff(y, axis=1, prepend=0.0)
    var_delta, var_delta_se = _var_se(deltas)
    bias, bias_se = _mean_se(y - y[:, m : m + 1])
    eta = mu_tilde_profile(var_delta, bias, m)
    # Component errors combined as if independent; adequate for diagnostics.
    tail_se2 = np.cumsum((var_delta_se ** 2)[::-1])[::-1]
    se = np.zeros(m + 2)
    se[0] = np.sqrt(tail_se2[0])
    se[1 : m + 1] = np.sqrt((2.0 * bias[:m] * bias_se[:m]) ** 2 + tail_se2[1:])
    if check:
        _check_positive(eta, "eta_tilde")
    return eta, se


def pilot_bundles(model, payoff, config: PilotConfig) -> np.ndarray:
    """All pilot bundles, chunked over fixed substreams and merged in chunk order."""
    bounds = list(range(0, config.n_pilot, config.chunk)) + [config.n_pilot]

    def run(k):
        rng = streams.stream(config.seed, streams.PILOT, k)
        y, _ = coupled_bundles(model, payoff, config.m, bounds[k + 1] - bounds[k], rng)
        return y

    jobs = range(len(bounds) - 1)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(k) for k in jobs]
    return np.concatenate(parts, axis=0)


def estimate_eta_bar(model, payoff, m: int, n_pilot: int, rng):
    y, _ = coupled_bundles(model, payoff, m, n_pilot, rng)
    return eta_bar_from_bundles(y)


def estimate_eta_tilde(model, payoff, m: int, n_pilot: int, rng):
    y, _ = coupled_bundles(model, payoff, m, n_pilot, rng)
    return eta_tilde_from_bundles(y)


def build_schedules(pilot: PilotResult, cost_bar=None, cost_tilde=None):
    """Optimal ``q`` for each estimator from the pilot profiles.

    Cost profiles default to the Milstein step counts for ``pilot.m``.
    """
    if cost_bar is None:
        cost_bar = coupled_cost_profile(pilot.m)
    if cost_tilde is None:
        cost_tilde = independent_cost_profile(pilot.m)
    q_bar = optimal_distribution(cost_bar, pilot.eta_bar).q_star
    q_tilde = optimal_distribution(cost_tilde, pilot.eta_tilde).q_star
    return q_bar, q_tilde


def _count_increases(profile):
    return int(np.sum(np.diff(profile[1:]) > 0))


def run_pilot(model, payoff, config: PilotConfig) -> PilotResult:
    y = pilot_bundles(model, payoff, config)
    eta_bar, eta_bar_se = eta_bar_from_bundles(y)
    eta_tilde, eta_tilde_se = eta_tilde_from_bundles(y)
    result = PilotResult(
        m=config.m,
        n_pilot=config.n_pilot,
        eta_bar=eta_bar,
        eta_bar_se=eta_bar_se,
        eta_tilde=eta_tilde,
        eta_tilde_se=eta_tilde_se,
        n_nonmonotone={
            "eta_bar": _count_increases(eta_bar),
            "eta_tilde": _count_increases(eta_tilde),
        },
    )
    result.q_star_coupled, result.q_star_independent = build_schedules(result)
    return result
