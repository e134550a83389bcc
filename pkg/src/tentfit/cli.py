"""``tentfit`` command line: fit, eval, sample, loglik.

Exit codes: 0 success, 1 other errors, 2 unparseable input or model file,
3 degenerate data, 4 oracle budget exhausted, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import secrets
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    BudgetExceeded,
    DegenerateBody,
    DegenerateHull,
    ModelSchemaMismatch,
    NumericalFailure,
    ParseError,
    RetryExhausted,
    TentfitError,
)
from .geometry import Dataset
from .io import format_points, parse_points, read_points
from .model import NEGATIVE_INFINITY, load_model, pointwise_log_density, sample_model, save_model
from .optimizer import FitConfig, fit, theoretical_iterations

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_BUDGET = 4
EXIT_NUMERIC = 5

log = logging.getLogger("tentfit")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ParseError, ModelSchemaMismatch)):
        return EXIT_PARSE
    if isinstance(exc, (DegenerateHull, DegenerateBody)):
        return EXIT_DEGENERATE
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, (NumericalFailure, RetryExhausted)):
        return EXIT_NUMERIC
    return EXIT_OTHER


@dataclass
class RunReport:
    command: list
    dataset_digest: str
    K: int
    objective_estimate: float
    wall_time_s: float
    oracle_calls: dict
    seed: int
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def _configure_logging() -> None:
    level = os.environ.get("TENTFIT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def cmd_fit(args, argv) -> int:
    t0 = time.time()
    _set_threads(args.threads)
    pts = read_points(args.input)
    if pts.shape[0] == 0:
        raise ParseError(f"{args.input}: no points")
    ds = Dataset.from_points(pts)
    seed = _seed(args)
    cfg = FitConfig(
        epsilon=args.epsilon,
        tau=args.tau,
        seed=seed,
        max_iters_override=args.max_iters,
        step_size_override=args.step_size,
        sampler_delta=args.sampler_delta,
        normalizer_delta=args.normalizer_delta,
    )
    warnings = []
    K_theory = theoretical_iterations(ds.n, ds.d, cfg.epsilon, cfg.tau, cfg.c0)
    if args.max_iters is not None and args.max_iters < K_theory:
        warnings.append(f"max-iters {args.max_iters} is below the theoretical K = {K_theory}")
    if args.sampler_delta is not None:
        warnings.append(f"per-iteration sampler delta overridden to {args.sampler_delta}")
    if args.step_size is not None:
        warnings.append(f"step size overridden to {args.step_size}")
    stats: dict = {}
    model = fit(
        ds,
        cfg,
        reduce_degenerate=args.reduce_degenerate,
        checkpoint_path=args.checkpoint,
        resume=args.resume,
        stats=stats,
    )
    save_model(model, args.output)
    report = RunReport(
        command=list(argv),
        dataset_digest=ds.digest(),
        K=int(model.meta["K"]),
        objective_estimate=float(model.meta["objective_estimate"]),
        wall_time_s=time.time() - t0,
        oracle_calls=stats.get("oracle_calls", {}),
        seed=seed,
        warnings=warnings,
    )
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_json() + "\n")
    for w in warnings:
        log.warning(w)
    print(f"wrote {args.output} (K={report.K}, F~{report.objective_estimate:.6g}, seed={seed})")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    model = load_model(args.model)
    X = parse_points(args.point.replace(";", "\n"), d=model.d)
    vals = pointwise_log_density(model, X)
    for v in vals:
        if v is NEGATIVE_INFINITY:
            print(f"density=0 log_density={NEGATIVE_INFINITY}")
        else:
            print(f"density={math.exp(v)!r} log_density={v!r}")
    return EXIT_OK


def cmd_sample(args, argv) -> int:
    _set_threads(args.threads)
    model = load_model(args.model)
    if args.count < 0:
        raise ParseError("--count must be non-negative")
    seed = _seed(args)
    X = sample_model(model, args.count, args.delta, seed) if args.count else np.empty((0, model.d))
    text = format_points(X, header=True, d=model.d)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_loglik(args, argv) -> int:
    model = load_model(args.model)
    X = read_points(args.input, d=model.d)
    vals = pointwise_log_density(model, X)
    total = NEGATIVE_INFINITY if any(v is NEGATIVE_INFINITY for v in vals) else math.fsum(vals)
    print(f"total {total if total is NEGATIVE_INFINITY else repr(total)}")
    for i, v in enumerate(vals):
        print(f"{i} {v if v is NEGATIVE_INFINITY else repr(v)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tentfit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a log-concave density to CSV points")
    f.add_argument("--input", required=True)
    f.add_argument("--epsilon", type=float, required=True)
    f.add_argument("--tau", type=float, default=0.05)
    f.add_argument("--seed", type=int)
    f.add_argument("--output", required=True)
    f.add_argument("--reduce-degenerate", action="store_true")
    f.add_argument("--threads", type=int)
    f.add_argument("--max-iters", type=int)
    f.add_argument("--step-size", type=float)
    f.add_argument("--sampler-delta", type=float)
    f.add_argument("--normalizer-delta", type=float)
    f.add_argument("--checkpoint")
    f.add_argument("--resume", action="store_true")
    f.add_argument("--report", help="write the run report (JSON) here")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="density at one or more points")
    e.add_argument("--model", required=True)
    e.add_argument("--point", required=True, help='"x1,x2,..."; separate points with ";"')
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sample", help="draw from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--seed", type=int)
    s.add_argument("--output", default="-")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_sample)

    ll = sub.add_parser("loglik", help="log-likelihood of CSV points")
    ll.add_argument("--model", required=True)
    ll.add_argument("--input", required=True)
    ll.set_defaults(func=cmd_loglik)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (TentfitError, ValueError, OSError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"tentfit: {code}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
