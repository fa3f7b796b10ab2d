"""Replicated pricing runs and their price and work reports.

Replications are split into fixed-size shards. Shard ``k`` of estimator ``e``
draws its levels from substream ``(seed, e, k, 0)`` and its paths from
``(seed, e, k, 1)``; shard summaries are merged in shard order, so the report does
not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from statistics import NormalDist

import numpy as np

from . import streams
from .errors import DomainError, ResourceCapError
from .estimators import CoupledSumEstimator, IndependentSumEstimator
from .pilot import PilotConfig, PilotResult, run_pilot
from .schedule_opt import as_level_distribution, extend_tail
from .sde import (
    GbmParams,
    bundle_generator,
    call_payoff,
    delta_generator,
    gbm_model,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "run_estimator",
    "emit_report",
    "parse_report",
    "FORMATS",
]

FORMATS = ("table", "json", "csv")
ESTIMATORS = ("coupled", "independent")
LABELS = {"coupled": "Coupled Sum", "independent": "Independent Sum"}
_STREAM_IDS = {"coupled": streams.COUPLED, "independent": streams.INDEPENDENT}
_Z90 = NormalDist().inv_cdf(0.95)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "gbm"
    r: float = 0.05
    sigma: float = 0.2
    T: float = 1.0
    strike: float = 1.0
    x0: float = 1.0
    m: int = 13
    n_pilot: int = 10_000
    n: int = 1_000_000
    estimator: str = "both"
    seed: int = 0
    workers: int = 1
    shard_size: int = 100_000
    max_work: float | None = None
    format: str = "table"

    def __post_init__(self):
        if self.model != "gbm":
            raise DomainError(f"unknown model {self.model!r}; only 'gbm' is available")
        if self.n < 100:
            raise DomainError(f"n must be at least 100, got {self.n}")
        if self.estimator not in ESTIMATORS + ("both",):
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if self.format not in FORMATS:
            raise DomainError(f"unknown format {self.format!r}")
        if self.workers < 1 or self.shard_size < 1:
            raise DomainError("workers and shard_size must be positive")

    @property
    def params(self) -> GbmParams:
        return GbmParams(r=self.r, sigma=self.sigma, strike=self.strike, x0=self.x0)

    @property
    def estimators(self):
        return ESTIMATORS if self.estimator == "both" else (self.estimator,)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ExperimentReport:
    estimator: str
    n: int
    price: float
    std: float
    work_total: float
    work_ci_halfwidth: float
    work_normalized_variance: float
    metadata: dict = field(default_factory=dict, compare=True)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class _Moments:
    # Count, mean and centered sum of squares; merged with Chan's update.
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, x):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        return cls(x.size, mu, float(np.sum((x - mu) ** 2)))

    def merge(self, other):
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n

    @property
    def var(self):
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0


def _report(label, values: _Moments, work: _Moments, metadata):
    n = values.n
    std = math.sqrt(values.var / n)
    work_total = work.mean * n
    half = _Z90 * math.sqrt(n * work.var)
    return ExperimentReport(
        estimator=label,
        n=n,
        price=values.mean,
        std=std,
        work_total=work_total,
        work_ci_halfwidth=half,
        work_normalized_variance=work_total * std * std,
        metadata=metadata,
    )


def run_estimator(kind, q, model, payoff, n, seed, *, workers=1, shard_size=100_000,
                  max_work=None, metadata=None) -> ExperimentReport:
    """``n`` independent copies of one estimator, summarized as a report."""
    q = as_level_distribution(q)
    stream_id = _STREAM_IDS[kind]
    if kind == "coupled":
        cls, gen = CoupledSumEstimator, bundle_generator(model, payoff)
    else:
        cls, gen = IndependentSumEstimator, delta_generator(model, payoff)
    bounds = list(range(0, n, shard_size)) + [n]
    n_shards = len(bounds) - 1

    def shard(k):
        est = cls(q, gen, streams.stream(seed, stream_id, k, streams.LEVELS),
                  streams.stream(seed, stream_id, k, streams.PATHS))
        batch = est.sample_batch(bounds[k + 1] - bounds[k])
        return _Moments.of(batch.values), _Moments.of(batch.work)

    values, work = _Moments(), _Moments()
    meta = dict(metadata or {})
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for first in range(0, n_shards, workers):
            ks = range(first, min(first + workers, n_shards))
            parts = list(pool.map(shard, ks)) if pool else [shard(k) for k in ks]
            for v, w in parts:
                values.merge(v)
                work.merge(w)
                if max_work is not None and work.mean * work.n > max_work:
                    partial = _report(LABELS[kind], values, work, {**meta, "partial": True})
                    raise ResourceCapError(
                        f"work {work.mean * work.n:.6g} exceeded cap {max_work:.6g} "
                        f"after {values.n} of {n} replications",
                        partial=partial,
                    )
    finally:
        if pool:
            pool.shutdown()
    return _report(LABELS[kind], values, work, meta)


def _schedule_metadata(config, q):
    m = q.size - 1
    return {
        "m": m,
        "seed": config.seed,
        "n_pilot": config.n_pilot,
        "q": [float(x) for x in q],
        "tail_rule": "q_i = 2**(-3*(i-m)/2) * q_m for i > m",
        "tail_q_m_plus_1": extend_tail(q, m, m + 1),
        "tail_sampled": False,
    }


def run_experiment(config: ExperimentConfig, *, pilot: PilotResult | None = None,
                   schedules: dict | None = None, model=None, payoff=None):
    """Pilot, schedule and replicate each selected estimator.

    ``schedules`` maps estimator name to a level distribution and bypasses the
    pilot for that estimator; ``pilot`` reuses an earlier pilot result.
    Returns one :class:`ExperimentReport` per estimator.
    """
    model = model or gbm_model(config.params, config.T)
    payoff = payoff or call_payoff(config.params, config.T)
    schedules = dict(schedules or {})
    missing = [k for k in config.estimators if k not in schedules]
    if missing:
        if pilot is None:
            pilot = run_pilot(model, payoff, PilotConfig(
                m=config.m, n_pilot=config.n_pilot, seed=config.seed, workers=config.workers))
        from_pilot = {"coupled": pilot.q_star_coupled, "independent": pilot.q_star_independent}
        for k in missing:
            schedules[k] = from_pilot[k]
    reports = []
    for kind in config.estimators:
        q = as_level_distribution(schedules[kind])
        reports.append(run_estimator(
            kind, q, model, payoff, config.n, config.seed,
            workers=config.workers, shard_size=config.shard_size, max_work=config.max_work,
            metadata=_schedule_metadata(config, q),
        ))
    return reports


# --- serialization ---------------------------------------------------------

_CSV_FIELDS = ["estimator", "n", "price", "std", "work_total", "work_ci_halfwidth",
               "work_normalized_variance", "metadata"]


def _table(reports):
    header = ["Estimator", "n", "price", "Std", "Work", "Work x Std^2"]
    rows = [
        [
            r.estimator,
            f"{r.n:.0e}",
            f"{r.price:.6f}",
            f"{r.std:.2e}",
            f"{r.work_total:.4e} +/- {r.work_ci_halfwidth:.1e}",
            f"{r.work_normalized_variance:.3f}",
        ]
        for r in reports
    ]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header] + rows]
    return "\n".join(lines) + "\n"


def emit_report(reports, fmt: str = "table") -> str:
    """Serialize reports as an aligned table, JSON, or CSV."""
    if isinstance(reports, ExperimentReport):
        reports = [reports]
    if not reports:
        raise ValueError("nothing to report")
    if fmt == "table":
        return _table(reports)
    if fmt == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            row = r.to_dict()
            row["metadata"] = json.dumps(row["metadata"], sort_keys=True)
            row.update({k: repr(row[k]) for k in _CSV_FIELDS[2:7]})
            writer.writerow(row)
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def parse_report(text: str, fmt: str):
    """Inverse of :func:`emit_report` for the ``json`` and ``csv`` formats."""
    if fmt == "json":
        return [ExperimentReport.from_dict(d) for d in json.loads(text)]
    if fmt == "csv":
        out = []
        for row in csv.DictReader(io.StringIO(text)):
            out.append(ExperimentReport(
                estimator=row["estimator"],
                n=int(row["n"]),
                metadata=json.loads(row["metadata"]),
                **{k: float(row[k]) for k in _CSV_FIELDS[2:7]},
            ))
        return out
    raise ValueError(f"cannot parse format {fmt!r}")
