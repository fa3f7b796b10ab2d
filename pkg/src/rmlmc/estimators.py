"""Coupled-sum and independent-sum randomized multilevel estimators.

Both estimators debias a sequence of approximations ``Y_0, Y_1, ...`` by summing
level differences up to a random level ``S`` and reweighting each term by
``1 / Pr(S >= i)``::

    coupled:      Z = sum_{i<=S} (Y_i - Y_{i-1}) / q_i     (all Y_i from one path)
    independent:  Z = sum_{i<=S} D_i / q_i                 (D_i independent, D_i ~ Y_i - Y_{i-1})

with ``Y_{-1} = 0``. Only the truncated forms (``S <= m``) are sampled; for them
``E[Z] = E[Y_m]``.

Sampler protocols
-----------------
``bundle_gen(top_level, size, rng)`` returns ``(y, work)`` where ``y`` has shape
``(size, top_level + 1)`` holding ``Y_0..Y_top`` computed from one shared source of
randomness per row, and ``work`` is a scalar or ``(size,)`` array of cost units.

``delta_gen(level, size, rng)`` returns ``(delta, work)`` where ``delta`` has shape
``(size,)`` and each entry is an independent draw distributed as
``Y_level - Y_{level-1}``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError, ShapeError
from .schedule_opt import as_level_distribution

__all__ = [
    "TruncationSampler",
    "EstimatorSample",
    "EstimatorBatch",
    "CoupledSumEstimator",
    "IndependentSumEstimator",
    "coupled_sum_estimate",
    "independent_sum_estimate",
    "coupled_variance_formula",
    "independent_variance_formula",
    "coupled_second_moment",
    "mu_tilde_profile",
    "Verdict",
    "ConditionReport",
    "check_coupled_condition",
    "check_independent_condition",
    "check_sufficient_condition",
]


def _stream_id(rng):
    seed_seq = getattr(rng.bit_generator, "seed_seq", None)
    if seed_seq is None or not hasattr(seed_seq, "entropy"):
        return None
    return (seed_seq.entropy, tuple(seed_seq.spawn_key), seed_seq.n_children_spawned)


def _check_independent_streams(level_rng, path_rng):
    if level_rng is path_rng or level_rng.bit_generator is path_rng.bit_generator:
        raise ValueError("level sampler and path sampler must use distinct RNG streams")
    a, b = _stream_id(level_rng), _stream_id(path_rng)
    if a is not None and b is not None and a[:2] == b[:2]:
        raise ValueError("level sampler and path sampler share a seed stream identifier")


class TruncationSampler:
    """Draws levels ``S`` in ``0..m`` with ``Pr(S >= i) = q[i]``.

    Uses one uniform per draw: ``S = #{i >= 1 : q[i] > U}``.
    """

    def __init__(self, q, rng: np.random.Generator):
        self.q = as_level_distribution(q)
        self.rng = rng
        self._neg_tail = -self.q[1:]

    @property
    def m(self) -> int:
        return self.q.size - 1

    def sample(self, size=None):
        u = self.rng.random(size)
        s = np.searchsorted(self._neg_tail, -np.asarray(u), side="left")
        if size is None:
            return int(s)
        return s.astype(np.int64)


@dataclass(frozen=True)
class EstimatorSample:
    value: float
    level: int
    work: float


@dataclass(frozen=True)
class EstimatorBatch:
    values: np.ndarray
    levels: np.ndarray
    work: np.ndarray

    def __len__(self):
        return self.values.size


def _coupled_values(y, inv_q, s):
    if y.ndim != 2 or y.shape[1] < s + 1:
        raise ContractViolation(
            f"bundle generator returned shape {y.shape}; need at least {s + 1} levels"
        )
    diffs = np.diff(y[:, : s + 1], axis=1, prepend=0.0)
    return diffs @ inv_q[: s + 1]


class CoupledSumEstimator:
    """Truncated coupled-sum estimator.

    ``level_rng`` drives the truncation level and ``path_rng`` the bundles; they
    must be distinct streams.
    """

    def __init__(self, q, bundle_gen, level_rng, path_rng):
        _check_independent_streams(level_rng, path_rng)
        self.sampler = TruncationSampler(q, level_rng)
        self.q = self.sampler.q
        self.inv_q = 1.0 / self.q
        self.bundle_gen = bundle_gen
        self.path_rng = path_rng

    def sample(self) -> EstimatorSample:
        return coupled_sum_estimate(self.bundle_gen, self.sampler, self.path_rng)

    def sample_batch(self, n: int) -> EstimatorBatch:
        levels = self.sampler.sample(n)
        values = np.empty(n)
        work = np.empty(n)
        for s in np.unique(levels):
            idx = np.flatnonzero(levels == s)
            y, w = self.bundle_gen(int(s), idx.size, self.path_rng)
            values[idx] = _coupled_values(np.asarray(y, dtype=float), self.inv_q, int(s))
            work[idx] = w
        return EstimatorBatch(values, levels, work)


class IndependentSumEstimator:
    """Truncated independent-sum estimator; see :class:`CoupledSumEstimator`."""

    def __init__(self, q, delta_gen, level_rng, path_rng):
        _check_independent_streams(level_rng, path_rng)
        self.sampler = TruncationSampler(q, level_rng)
        self.q = self.sampler.q
        self.delta_gen = delta_gen
        self.path_rng = path_rng

    def sample(self) -> EstimatorSample:
        return independent_sum_estimate(self.delta_gen, self.sampler, self.path_rng)

    def sample_batch(self, n: int) -> EstimatorBatch:
        levels = self.sampler.sample(n)
        values = np.zeros(n)
        work = np.zeros(n)
        top = int(levels.max()) if n else -1
        for i in range(top + 1):
            idx = np.flatnonzero(levels >= i)
            d, w = self.delta_gen(i, idx.size, self.path_rng)
            d = np.asarray(d, dtype=float)
            if d.shape != (idx.size,):
                raise ContractViolation(f"delta generator returned shape {d.shape}, expected ({idx.size},)")
            values[idx] += d / self.q[i]
            work[idx] += w
        return EstimatorBatch(values, levels, work)


def coupled_sum_estimate(bundle_gen, sampler: TruncationSampler, rng) -> EstimatorSample:
    """One draw of the truncated coupled-sum estimator."""
    s = sampler.sample()
    y, w = bundle_gen(s, 1, rng)
    y = np.asarray(y, dtype=float)
    value = _coupled_values(y[:1], 1.0 / sampler.q, s)[0]
    return EstimatorSample(float(value), s, float(np.asarray(w).reshape(-1)[0]))


def independent_sum_estimate(delta_gen, sampler: TruncationSampler, rng) -> EstimatorSample:
    """One draw of the truncated independent-sum estimator."""
    s = sampler.sample()
    value = 0.0
    work = 0.0
    for i in range(s + 1):
        d, w = delta_gen(i, 1, rng)
        value += float(np.asarray(d).reshape(-1)[0]) / sampler.q[i]
        work += float(np.asarray(w).reshape(-1)[0])
    return EstimatorSample(value, s, work)


# --- closed-form moments -------------------------------------------------


def _profile_and_q(q, profile):
    q = as_level_distribution(q)
    profile = np.asarray(profile, dtype=float)
    if profile.size != q.size + 1:
        raise ShapeError(f"profile has {profile.size} entries; expected {q.size + 1}")
    if np.any(np.isnan(profile)) or np.any(profile < 0):
        raise DomainError("profile must be nonnegative and free of NaN")
    return q, profile


def coupled_variance_formula(q, eta_bar) -> float:
    """``Var = sum_i (eta_i - eta_{i+1}) / q_i`` for the coupled profile."""
    q, eta_bar = _profile_and_q(q, eta_bar)
    return float(np.sum((eta_bar[:-1] - eta_bar[1:]) / q))


def independent_variance_formula(q, eta_tilde) -> float:
    """Same telescoped form as :func:`coupled_variance_formula`, independent profile."""
    q, eta_tilde = _profile_and_q(q, eta_tilde)
    return float(np.sum((eta_tilde[:-1] - eta_tilde[1:]) / q))


def coupled_second_moment(q, sq_dist, form: str = "telescoped") -> float:
    """Second moment of the truncated coupled-sum estimator.

    ``sq_dist[i] = E[(Y_{i-1} - Y_m)^2]`` for ``i = 0..m+1``, so ``sq_dist[0]``
    is ``E[Y_m^2]`` and ``sq_dist[m+1]`` is 0.

    ``form="telescoped"`` evaluates ``sum_i (d_i - d_{i+1}) / q_i``;
    ``form="increments"`` evaluates ``E[Y_m^2] + sum_{i<m} (1/q_{i+1} - 1/q_i) d_{i+1}``.
    """
    q, d = _profile_and_q(q, sq_dist)
    if form == "telescoped":
        return float(np.sum((d[:-1] - d[1:]) / q))
    if form == "increments":
        return float(d[0] + np.sum((1.0 / q[1:] - 1.0 / q[:-1]) * d[1:-1]))
    raise ValueError(f"unknown form {form!r}")


def mu_tilde_profile(var_delta, bias, m: int) -> np.ndarray:
    """Independent-sum moment profile of length ``m + 2``.

    ``var_delta[j] = Var(Y_j - Y_{j-1})`` and ``bias[i] = E[Y_i - Y_m]``. Entry 0 is
    the total variance; entry ``i >= 1`` is ``bias[i-1]**2 + sum_{j>=i} var_delta[j]``;
    the last entry is forced to 0.
    """
    var_delta = np.asarray(var_delta, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if var_delta.size < m + 1 or bias.size < m + 1:
        raise ShapeError(f"need at least {m + 1} entries of var_delta and bias")
    var_delta = var_delta[: m + 1]
    if np.any(var_delta < 0):
        raise DomainError("variances must be nonnegative")
    tail = np.cumsum(var_delta[::-1])[::-1]
    out = np.zeros(m + 2)
    out[0] = tail[0]
    out[1 : m + 1] = bias[:m] ** 2 + tail[1:]
    return out


# --- square-integrability diagnostics -------------------------------------


class Verdict(str, enum.Enum):
    CONVERGING = "converging"
    DIVERGING = "diverging"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ConditionReport:
    partial_sums: np.ndarray
    verdict: Verdict
    n_terms: int
    tail_exponent: float
    tail_estimate: float


def _summation_report(summand, n_terms, tol, bound, margin, window):
    terms = []
    quiet = 0
    for i in range(n_terms):
        a = summand(i)
        if not a >= 0:
            raise DomainError(f"summand {i} is {a!r}; expected a nonnegative number")
        terms.append(a)
        quiet = quiet + 1 if a <= tol else 0
        if quiet >= window:
            break
    terms = np.asarray(terms, dtype=float)
    partial = np.cumsum(terms)
    n = terms.size
    if quiet >= window or not np.any(terms > tol):
        return ConditionReport(partial, Verdict.CONVERGING, n, np.inf, 0.0)

    # Comparison with a p-series fitted on the last decade of positive terms.
    lo = max(n // 10, 1)
    idx = np.arange(lo, n)
    pos = terms[lo:] > 0
    if pos.sum() < 2:
        return ConditionReport(partial, Verdict.INCONCLUSIVE, n, np.nan, np.nan)
    slope = np.polyfit(np.log(idx[pos] + 1.0), np.log(terms[lo:][pos]), 1)[0]
    p = -slope
    if p > 1.0 + margin:
        tail = terms[-1] * n / (p - 1.0)
        return ConditionReport(partial, Verdict.CONVERGING, n, p, tail)
    if partial[-1] > bound:
        return ConditionReport(partial, Verdict.DIVERGING, n, p, np.inf)
    return ConditionReport(partial, Verdict.INCONCLUSIVE, n, p, np.nan)


def _checked_q(q):
    # q is in A: q(0) = 1, positive, nonincreasing. Values are memoized since
    # each summand needs two consecutive entries.
    cache = {}

    def get(i):
        if i not in cache:
            v = float(q(i))
            if not v > 0:
                raise DomainError(f"q({i}) = {v!r} must be positive")
            if i == 0 and v != 1.0:
                raise DomainError(f"q(0) must be 1, got {v!r}")
            if i > 0 and v > get(i - 1):
                raise DomainError(f"q increases at index {i}")
            cache[i] = v
        return cache[i]

    return get


def _inv_diff_times(g, qi, qi1):
    # (1/q_{i+1} - 1/q_i) * g without forming 1/q for tiny q.
    if g == 0:
        return 0.0
    return g / qi1 - g / qi


def check_coupled_condition(
    q, gamma, n_terms: int = 10_000, tol: float = 1e-12, bound: float = 5.0,
    margin: float = 0.1, window: int = 20,
) -> ConditionReport:
    """Partial sums of ``sum_i (1/q_{i+1} - 1/q_i) * gamma(i)``.

    ``q`` and ``gamma`` are callables ``i -> float``; ``gamma(i)`` should be
    ``E[(Y_i - Y)^2]``. The verdict is a heuristic: ``converging`` if the summands
    drop below ``tol`` for ``window`` consecutive terms or decay faster than
    ``i**-(1 + margin)``; ``diverging`` if they decay no faster than that and the
    partial sum exceeds ``bound``; otherwise ``inconclusive``.
    """
    qq = _checked_q(q)

    def summand(i):
        return _inv_diff_times(float(gamma(i)), qq(i), qq(i + 1))

    return _summation_report(summand, n_terms, tol, bound, margin, window)


def check_independent_condition(
    q, var_delta, bias_sq, n_terms: int = 10_000, tol: float = 1e-12, bound: float = 5.0,
    margin: float = 0.1, window: int = 20,
) -> ConditionReport:
    """Partial sums of ``sum_i var_delta(i)/q_i + (1/q_{i+1} - 1/q_i) * bias_sq(i)``.

    ``var_delta(i) = Var(Y_i - Y_{i-1})`` and ``bias_sq(i) = (E[Y_i - Y])**2``.
    Verdict rules as in :func:`check_coupled_condition`.
    """
    qq = _checked_q(q)

    def summand(i):
        v = float(var_delta(i))
        first = 0.0 if v == 0 else v / qq(i)
        return first + _inv_diff_times(float(bias_sq(i)), qq(i), qq(i + 1))

    return _summation_report(summand, n_terms, tol, bound, margin, window)


def check_sufficient_condition(
    q, gamma, n_terms: int = 10_000, tol: float = 1e-12, bound: float = 5.0,
    margin: float = 0.1, window: int = 20,
) -> ConditionReport:
    """The older sufficient criterion ``sum_{i>=1} gamma(i-1) / q_i``.

    Summand ``i`` of the report corresponds to series index ``i + 1``.
    """
    qq = _checked_q(q)

    def summand(i):
        g = float(gamma(i))
        return 0.0 if g == 0 else g / qq(i + 1)

    return _summation_report(summand, n_terms, tol, bound, margin, window)
