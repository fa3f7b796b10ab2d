"""Command-line entry point: ``rmlmc {pilot,run,hull,price}``.

Exit codes: 0 success, 2 usage error, 3 degenerate pilot profile, 4 work cap hit.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import DegenerateProfileError, DomainError, ResourceCapError, ShapeError
from .experiment import ExperimentConfig, emit_report, run_experiment
from .pilot import PilotConfig, PilotResult, run_pilot
from .schedule_opt import optimal_distribution
from .sde import black_scholes_call, call_payoff, gbm_model

EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_RESOURCE = 4

_TYPES = {
    "model": str, "r": float, "sigma": float, "T": float, "strike": float, "x0": float,
    "m": int, "n_pilot": int, "n": int, "estimator": str, "seed": int, "workers": int,
    "shard_size": int, "max_work": float, "format": str,
}


def _read_config(path):
    with open(path) as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        raw = json.loads(stripped)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    out = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ValueError(f"unknown config key {key!r}")
        out[key] = None if value is None else _TYPES[key](value)
    return out


def _add_common(p):
    s = argparse.SUPPRESS
    p.add_argument("--config", help="key=value or JSON file; flags override it")
    p.add_argument("--model", choices=["gbm"], default=s)
    p.add_argument("--r", type=float, default=s)
    p.add_argument("--sigma", type=float, default=s)
    p.add_argument("--T", type=float, default=s)
    p.add_argument("--strike", type=float, default=s)
    p.add_argument("--x0", type=float, default=s)
    p.add_argument("--m", type=int, default=s)
    p.add_argument("--n-pilot", dest="n_pilot", type=int, default=s)
    p.add_argument("--n", type=int, default=s)
    p.add_argument("--estimator", choices=["coupled", "independent", "both"], default=s)
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--workers", type=int, default=s)
    p.add_argument("--shard-size", dest="shard_size", type=int, default=s)
    p.add_argument("--max-work", dest="max_work", type=float, default=s)
    p.add_argument("--format", choices=["table", "json", "csv"], default=s)
    p.add_argument("--out", help="write output here instead of stdout")


def _parser():
    parser = argparse.ArgumentParser(prog="rmlmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pilot", help="estimate moment profiles and optimal schedules")
    _add_common(p)

    p = sub.add_parser("run", help="pilot + replicated estimator runs")
    _add_common(p)
    p.add_argument("--pilot-file", help="reuse a pilot JSON written by 'rmlmc pilot'")

    p = sub.add_parser("hull", help="lower hull and optimal q for given profiles")
    p.add_argument("--t", required=True, help="comma-separated cost profile t_0..t_{m+1}")
    p.add_argument("--gamma", required=True, help="comma-separated moment profile")
    p.add_argument("--out")

    p = sub.add_parser("price", help="Black-Scholes reference price")
    _add_common(p)
    return parser


def _config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(_read_config(args.config))
    values.update({k: v for k, v in vars(args).items() if k in _TYPES})
    return ExperimentConfig(**values)


def _floats(text):
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def _write(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "hull":
            result = optimal_distribution(_floats(args.t), _floats(args.gamma))
            _write(json.dumps(result.to_dict(), indent=2) + "\n", args.out)
            return 0

        config = _config(args)
        if args.command == "price":
            _write(f"{black_scholes_call(config.params, config.T)!r}\n", args.out)
            return 0

        model = gbm_model(config.params, config.T)
        payoff = call_payoff(config.params, config.T)
        if args.command == "pilot":
            result = run_pilot(model, payoff, PilotConfig(
                m=config.m, n_pilot=config.n_pilot, seed=config.seed, workers=config.workers))
            _write(result.to_json() + "\n", args.out)
            return 0

        pilot = None
        if args.pilot_file:
            with open(args.pilot_file) as fh:
                pilot = PilotResult.from_json(fh.read())
        reports = run_experiment(config, pilot=pilot, model=model, payoff=payoff)
        _write(emit_report(reports, config.format), args.out)
        return 0
    except DegenerateProfileError as exc:
        print(f"rmlmc: degenerate profile: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ResourceCapError as exc:
        print(f"rmlmc: {exc}", file=sys.stderr)
        if exc.partial is not None:
            sys.stderr.write(emit_report([exc.partial], "table"))
        return EXIT_RESOURCE
    except (DomainError, ShapeError, ValueError, TypeError, OSError) as exc:
        print(f"rmlmc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
