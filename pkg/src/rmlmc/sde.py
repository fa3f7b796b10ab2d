"""Milstein discretization of scalar SDEs on a dyadic hierarchy of time grids.

Level ``i`` uses ``2**i`` steps of size ``T * 2**-i``. Coupled bundles draw Brownian
increments once at the finest level and sum adjacent pairs to obtain each coarser
level, so every ``Y_i`` in a bundle is driven by the same Brownian path.

Increments are stored time-major, shape ``(n_steps, n_paths)``, internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, DomainError

__all__ = [
    "SdeModel",
    "GbmParams",
    "LevelPathBundle",
    "gbm_model",
    "call_payoff",
    "constant_payoff",
    "milstein_path",
    "aggregate_increments",
    "coupled_bundle",
    "coupled_bundles",
    "independent_delta",
    "independent_deltas",
    "bundle_generator",
    "delta_generator",
    "coupled_cost_profile",
    "independent_cost_profile",
    "independent_level_cost",
    "black_scholes_call",
]

# Upper bound on fine increments held in memory at once (float64 entries).
_MAX_BLOCK = 1 << 22


@dataclass(frozen=True)
class SdeModel:
    """``dX = drift(X, t) dt + diffusion(X, t) dW`` on ``[0, horizon]``.

    All three callables must accept numpy arrays for ``x`` and a float ``t``.
    """

    drift: Callable
    diffusion: Callable
    diffusion_dx: Callable
    x0: float
    horizon: float


@dataclass(frozen=True)
class GbmParams:
    r: float = 0.05
    sigma: float = 0.2
    strike: float = 1.0
    x0: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not self.x0 > 0:
            raise DomainError(f"x0 must be positive, got {self.x0!r}")


@dataclass(frozen=True)
class LevelPathBundle:
    y: np.ndarray
    work: int


def gbm_model(params: GbmParams, T: float = 1.0) -> SdeModel:
    r, sigma = params.r, params.sigma
    return SdeModel(
        drift=lambda x, t: r * x,
        diffusion=lambda x, t: sigma * x,
        diffusion_dx=lambda x, t: sigma,
        x0=params.x0,
        horizon=T,
    )


def call_payoff(params: GbmParams, T: float = 1.0) -> Callable:
    """Discounted European call ``exp(-r T) * max(x - K, 0)``."""
    disc = math.exp(-params.r * T)
    strike = params.strike

    def payoff(x):
        return disc * np.maximum(x - strike, 0.0)

    return payoff


def constant_payoff(c: float) -> Callable:
    def payoff(x):
        return np.full(np.shape(x), c, dtype=float)

    return payoff


def _milstein_terminal(model: SdeModel, dt: float, dw: np.ndarray) -> np.ndarray:
    x = np.full(dw.shape[1:], float(model.x0))
    for k in range(dw.shape[0]):
        t = k * dt
        w = dw[k]
        b = model.diffusion(x, t)
        x = (
            x
            + model.drift(x, t) * dt
            + b * w
            + 0.5 * b * model.diffusion_dx(x, t) * (w * w - dt)
        )
    return x


def milstein_path(model: SdeModel, level: int, increments) -> np.ndarray | float:
    """Terminal value of the level-``level`` Milstein scheme.

    ``increments`` holds the ``2**level`` Brownian increments along its last axis;
    leading axes are treated as independent paths.
    """
    inc = np.asarray(increments, dtype=float)
    n_steps = 1 << level
    if inc.ndim == 0 or inc.shape[-1] != n_steps:
        raise ContractViolation(
            f"level {level} needs {n_steps} increments, got shape {inc.shape}"
        )
    dt = model.horizon / n_steps
    dw = np.ascontiguousarray(np.moveaxis(inc, -1, 0))
    x = _milstein_terminal(model, dt, dw)
    return float(x) if x.ndim == 0 else x


def aggregate_increments(fine, levels_up: int) -> np.ndarray:
    """Sum adjacent pairs ``levels_up`` times along the last axis."""
    inc = np.asarray(fine, dtype=float)
    for _ in range(levels_up):
        inc = inc[..., 0::2] + inc[..., 1::2]
    return inc


def _chunks(size, n_fine):
    per = max(1, _MAX_BLOCK // n_fine)
    start = 0
    while start < size:
        stop = min(size, start + per)
        yield start, stop
        start = stop


def coupled_bundles(model: SdeModel, payoff, top_level: int, size: int, rng):
    """``size`` coupled bundles; returns ``(y, work)`` with ``y.shape == (size, top_level+1)``.

    ``work`` is the per-bundle step count ``2**(top_level+1) - 1``.
    """
    if top_level < 0:
        raise DomainError(f"top_level must be >= 0, got {top_level}")
    n_fine = 1 << top_level
    y = np.empty((size, top_level + 1))
    for start, stop in _chunks(size, n_fine):
        dw = rng.standard_normal((n_fine, stop - start))
        dw *= math.sqrt(model.horizon / n_fine)
        for level in range(top_level, -1, -1):
            dt = model.horizon / (1 << level)
            y[start:stop, level] = payoff(_milstein_terminal(model, dt, dw))
            if level:
                dw = dw[0::2] + dw[1::2]
    return y, (1 << (top_level + 1)) - 1


def coupled_bundle(model: SdeModel, payoff, top_level: int, rng) -> LevelPathBundle:
    y, work = coupled_bundles(model, payoff, top_level, 1, rng)
    return LevelPathBundle(y=y[0], work=work)


def independent_level_cost(level: int) -> int:
    """Steps simulated for one independent level difference."""
    return 1 if level == 0 else 3 << (level - 1)


def independent_deltas(model: SdeModel, payoff, level: int, size: int, rng):
    """``size`` independent draws of ``Y_level - Y_{level-1}`` and the per-draw cost."""
    if level < 0:
        raise DomainError(f"level must be >= 0, got {level}")
    n_fine = 1 << level
    out = np.empty(size)
    for start, stop in _chunks(size, n_fine):
        dw = rng.standard_normal((n_fine, stop - start))
        dw *= math.sqrt(model.horizon / n_fine)
        fine = payoff(_milstein_terminal(model, model.horizon / n_fine, dw))
        if level == 0:
            out[start:stop] = fine
        else:
            coarse_dw = dw[0::2] + dw[1::2]
            coarse = payoff(_milstein_terminal(model, 2 * model.horizon / n_fine, coarse_dw))
            out[start:stop] = fine - coarse
    return out, independent_level_cost(level)


def independent_delta(model: SdeModel, payoff, level: int, rng):
    d, work = independent_deltas(model, payoff, level, 1, rng)
    return float(d[0]), work


def bundle_generator(model: SdeModel, payoff):
    """Adapter to the ``bundle_gen(top_level, size, rng)`` estimator protocol."""

    def gen(top_level, size, rng):
        return coupled_bundles(model, payoff, top_level, size, rng)

    return gen


def delta_generator(model: SdeModel, payoff):
    """Adapter to the ``delta_gen(level, size, rng)`` estimator protocol."""

    def gen(level, size, rng):
        return independent_deltas(model, payoff, level, size, rng)

    return gen


def coupled_cost_profile(m: int) -> np.ndarray:
    """Cumulative cost ``t_i = 2**i - 1`` of generating ``Y_0..Y_{i-1}``, ``i = 0..m+1``."""
    return np.array([(1 << i) - 1 for i in range(m + 2)], dtype=float)


def independent_cost_profile(m: int) -> np.ndarray:
    """Cumulative cost of ``D_0..D_{i-1}`` for ``i = 0..m+1``."""
    costs = [independent_level_cost(i) for i in range(m + 1)]
    return np.concatenate([[0.0], np.cumsum(costs, dtype=float)])


def _norm_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes_call(params: GbmParams, T: float = 1.0) -> float:
    """Discounted European call price under geometric Brownian motion."""
    if not T > 0:
        raise DomainError(f"maturity must be positive, got {T!r}")
    s, k, r, sigma = params.x0, params.strike, params.r, params.sigma
    disc = math.exp(-r * T)
    if k <= 0:
        return s - k * disc
    vol = sigma * math.sqrt(T)
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * T) / vol
    d2 = d1 - vol
    return s * _norm_cdf(d1) - k * disc * _norm_cdf(d2)
