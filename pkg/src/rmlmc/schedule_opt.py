"""Optimal truncation-level distributions via lower convex hulls.

Given an increasing cost profile ``t = (t_0, ..., t_{m+1})`` with ``t_0 = 0`` and a
moment profile ``gamma = (gamma_0, ..., gamma_m, 0)``, the work-variance product of
a truncated randomized multilevel estimator driven by survival probabilities
``q = (q_0, ..., q_m)`` is::

    R(q) = (sum_i q_i (t_{i+1} - t_i)) * (sum_i (gamma_i - gamma_{i+1}) / q_i)

The minimizer over nonincreasing ``q`` with ``q_0 = 1`` is read off the lower hull
of the points ``(t_i, gamma_i)``: if ``theta_i`` is the hull slope on
``[t_i, t_{i+1}]`` then ``q*_i = sqrt(theta_i / theta_0)``. The hull is built by a
backward monotone-chain sweep in O(m).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProfileError, DomainError, ShapeError

__all__ = [
    "HullResult",
    "as_cost_profile",
    "as_moment_profile",
    "as_level_distribution",
    "point_masses",
    "lower_hull",
    "optimal_distribution",
    "objective_R",
    "optimal_value",
    "optimal_distribution_oracle",
    "extend_tail",
    "ORACLE_MAX_M",
]

ORACLE_MAX_M = 10


@dataclass(frozen=True)
class HullResult:
    """Lower hull of ``(t_i, gamma_i)`` and, when requested, the optimal schedule.

    Attributes
    ----------
    support : ndarray of int
        Increasing indices of the hull vertices; always contains 0 and m+1.
    gamma_prime : ndarray
        The hull evaluated at every ``t_i`` (length m+2).
    theta : ndarray or None
        Hull slopes on each interval ``[t_i, t_{i+1}]`` (length m+1).
    q_star : ndarray or None
        Optimal survival probabilities ``sqrt(theta_i / theta_0)`` (length m+1).
    n_ops : int
        Stack pushes plus pops performed while building the hull.
    """

    support: np.ndarray
    gamma_prime: np.ndarray
    theta: np.ndarray | None = None
    q_star: np.ndarray | None = None
    n_ops: int = 0

    def to_dict(self):
        return {
            "support": [int(i) for i in self.support],
            "gamma_prime": [float(g) for g in self.gamma_prime],
            "theta": None if self.theta is None else [float(x) for x in self.theta],
            "q_star": None if self.q_star is None else [float(x) for x in self.q_star],
        }


def as_cost_profile(t) -> np.ndarray:
    """Validate a cost profile: finite, ``t[0] == 0``, strictly increasing."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ShapeError(f"cost profile must be 1-d with at least 2 entries, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise DomainError("cost profile contains non-finite values")
    if t[0] != 0.0:
        raise DomainError(f"cost profile must start at 0, got t[0]={t[0]!r}")
    if np.any(np.diff(t) <= 0):
        raise DomainError("cost profile must be strictly increasing")
    return t


def as_moment_profile(gamma, *, require_positive: bool = False) -> np.ndarray:
    """Validate a truncated moment profile and force its last entry to zero.

    With ``require_positive`` the entries ``gamma[0..m]`` must all be > 0.
    """
    gamma = np.array(gamma, dtype=float)
    if gamma.ndim != 1 or gamma.size < 2:
        raise ShapeError(f"moment profile must be 1-d with at least 2 entries, got shape {gamma.shape}")
    if not np.all(np.isfinite(gamma)):
        raise DomainError("moment profile contains non-finite values")
    gamma[-1] = 0.0
    if np.any(gamma < 0):
        raise DomainError("moment profile entries must be nonnegative")
    if require_positive and np.any(gamma[:-1] <= 0):
        bad = int(np.flatnonzero(gamma[:-1] <= 0)[0])
        raise DegenerateProfileError(
            f"moment profile must be positive on 0..m; gamma[{bad}]={gamma[bad]!r}"
        )
    return gamma


def as_level_distribution(q) -> np.ndarray:
    """Validate ``q``: ``q[0] == 1`` and ``q[i] >= q[i+1] > 0``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise ShapeError(f"level distribution must be a non-empty 1-d array, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DomainError("level distribution contains non-finite values")
    if q[0] != 1.0:
        raise DomainError(f"level distribution must have q[0] == 1, got {q[0]!r}")
    if np.any(q <= 0):
        raise DomainError("level distribution must be strictly positive")
    if np.any(np.diff(q) > 0):
        raise DomainError("level distribution must be nonincreasing")
    return q


def point_masses(q) -> np.ndarray:
    """Probabilities ``Pr(S = i) = q_i - q_{i+1}`` with ``q_{m+1} = 0``."""
    q = as_level_distribution(q)
    return q - np.append(q[1:], 0.0)


def _check_pair(t, gamma):
    t = as_cost_profile(t)
    gamma = as_moment_profile(gamma)
    if t.size != gamma.size:
        raise ShapeError(f"cost profile has {t.size} entries but moment profile has {gamma.size}")
    return t, gamma


def _hull_support(t, gamma):
    # Backward sweep: stack[-1] is the smallest index currently on the hull of
    # points j..m+1. A vertex is kept only if it lies strictly below the chord
    # from the new point to the vertex after it; collinear vertices are dropped.
    n = t.size
    stack = [n - 1, n - 2]
    ops = 2
    for j in range(n - 3, -1, -1):
        tj, gj = t[j], gamma[j]
        while len(stack) >= 2:
            a = stack[-1]
            b = stack[-2]
            lhs = (gamma[a] - gj) * (t[b] - tj)
            rhs = (gamma[b] - gj) * (t[a] - tj)
            if lhs < rhs:
                break
            stack.pop()
            ops += 1
        stack.append(j)
        ops += 1
    return np.array(stack[::-1], dtype=int), ops


def lower_hull(t, gamma) -> HullResult:
    """Greatest convex minorant of ``(t_i, gamma_i)`` evaluated at every ``t_i``.

    Returns a :class:`HullResult` with ``support`` and ``gamma_prime`` filled in;
    ``theta`` and ``q_star`` are left as ``None``.
    """
    t, gamma = _check_pair(t, gamma)
    support, ops = _hull_support(t, gamma)
    gamma_prime = gamma.copy()
    for lo, hi in zip(support[:-1], support[1:]):
        if hi - lo > 1:
            slope = (gamma[hi] - gamma[lo]) / (t[hi] - t[lo])
            inner = slice(lo + 1, hi)
            gamma_prime[inner] = gamma[lo] + slope * (t[inner] - t[lo])
    return HullResult(support=support, gamma_prime=gamma_prime, n_ops=ops)


def optimal_distribution(t, gamma) -> HullResult:
    """Minimize :func:`objective_R` over nonincreasing ``q`` with ``q[0] = 1``.

    Raises
    ------
    DegenerateProfileError
        If any of ``gamma[0..m]`` is not strictly positive.
    """
    t, gamma = _check_pair(t, gamma)
    gamma = as_moment_profile(gamma, require_positive=True)
    hull = lower_hull(t, gamma)
    support = hull.support
    theta = np.empty(t.size - 1)
    for lo, hi in zip(support[:-1], support[1:]):
        theta[lo:hi] = (gamma[hi] - gamma[lo]) / (t[hi] - t[lo])
    if not theta[0] < 0:
        raise DegenerateProfileError(f"initial hull slope must be negative, got {theta[0]!r}")
    q_star = np.sqrt(theta / theta[0])
    q_star[0] = 1.0
    return HullResult(
        support=support,
        gamma_prime=hull.gamma_prime,
        theta=theta,
        q_star=q_star,
        n_ops=hull.n_ops,
    )


def objective_R(q, t, gamma) -> float:
    """Expected work times variance of the truncated estimator driven by ``q``."""
    q = as_level_distribution(q)
    t, gamma = _check_pair(t, gamma)
    if q.size + 1 != t.size:
        raise ShapeError(f"q has {q.size} entries; expected {t.size - 1} to match the profiles")
    # Terms sharing a q value are telescoped before dividing; otherwise large
    # interior gamma values cancel only after rounding.
    starts = np.flatnonzero(np.concatenate([[True], q[1:] != q[:-1]]))
    ends = np.append(starts[1:], q.size)
    work = math.fsum(q * np.diff(t))
    var = math.fsum((gamma[starts] - gamma[ends]) / q[starts])
    return work * var


def optimal_value(t, gamma) -> float:
    """Closed-form minimum ``(sum_i sqrt((g'_i - g'_{i+1}) (t_{i+1} - t_i)))**2``.

    On a hull segment the summands collapse to ``sqrt(drop * width)`` of the whole
    segment, which is how it is evaluated here.
    """
    t, gamma = _check_pair(t, gamma)
    support = lower_hull(t, gamma).support
    drops = gamma[support[:-1]] - gamma[support[1:]]
    widths = t[support[1:]] - t[support[:-1]]
    return math.fsum(np.sqrt(drops * widths)) ** 2


def optimal_distribution_oracle(t, gamma) -> np.ndarray:
    """Brute-force minimizer of :func:`objective_R`, for cross-checking only.

    Enumerates every split of ``0..m`` into consecutive blocks on which ``q`` is
    constant. For a fixed split with block widths ``A_k`` and block drops ``D_k``,
    Cauchy-Schwarz gives the best block values ``x_k ~ sqrt(D_k / A_k)`` and the
    value ``(sum_k sqrt(A_k D_k))**2``; the optimum is the smallest value among
    splits whose block values come out nonincreasing. Cost is ``O(m 2^m)``, so
    ``m`` is capped at :data:`ORACLE_MAX_M`.
    """
    t, gamma = _check_pair(t, gamma)
    gamma = as_moment_profile(gamma, require_positive=True)
    m = t.size - 2
    if m > ORACLE_MAX_M:
        raise DomainError(f"oracle refuses m={m} > {ORACLE_MAX_M}")
    best_val = np.inf
    best_q = None
    for mask in itertools.product((False, True), repeat=m):
        starts = [0] + [i + 1 for i, cut in enumerate(mask) if cut]
        ends = starts[1:] + [m + 1]
        widths = np.array([t[e] - t[s] for s, e in zip(starts, ends)])
        drops = np.array([gamma[s] - gamma[e] for s, e in zip(starts, ends)])
        if np.any(drops <= 0):
            continue
        x = np.sqrt(drops / widths)
        x = x / x[0]
        if np.any(np.diff(x) > 0):
            continue
        val = np.sum(np.sqrt(widths * drops)) ** 2
        if val < best_val:
            best_val = val
            best_q = np.repeat(x, np.subtract(ends, starts))
    return best_q


def extend_tail(q_star, m: int, i: int) -> float:
    """Tail rule ``q_i = 2**(-3 (i - m) / 2) * q_m`` beyond the truncation level.

    ``i == m`` returns ``q_star[m]`` itself; ``i < m`` is rejected.
    """
    q_star = np.asarray(q_star, dtype=float)
    if i < m:
        raise DomainError(f"tail index i={i} must be >= m={m}")
    if m >= q_star.size:
        raise ShapeError(f"q_star has {q_star.size} entries, no level m={m}")
    return float(2.0 ** (-1.5 * (i - m)) * q_star[m])
