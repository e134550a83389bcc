"""Projected stochastic subgradient descent for the log-concave MLE.

The objective F(y) = -mean(y) + ln int exp(h_y) is convex on the box
C = [-B, 0]^n, and its subgradient is -1/n + E[a(X)] with X drawn from the
normalized exp(h_y) and a(X) the optimal packing weights at X. One sampled
X per iteration gives an unbiased-up-to-sampler-error stochastic
subgradient of norm at most 2.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .body import WalkConfig
from .errors import NumericalFailure, TentfitError
from .geometry import Dataset
from .model import FittedModel
from .sampler import LevelSetSampler, build_sampler, estimate_normalizer, sample_density
from .tent import TentFunction, box_log_radius

log = logging.getLogger("tentfit")

M_BOUND = 2.0
NORM_SLACK = 1e-9
CHECKPOINT_FORMAT = "tentfit-checkpoint/1"
STEP_RULES = ("constant_avg",)


@dataclass(frozen=True)
class FitConfig:
    """Fit settings.

    The override knobs exist because the theoretical iteration count and
    per-iteration sampler accuracy are far beyond desk scale; left at None
    they take their theoretical values.
    """

    epsilon: float
    tau: float = 0.05
    seed: int = 0
    max_iters_override: Optional[int] = None
    step_rule: str = "constant_avg"
    c0: float = 16.0
    step_size_override: Optional[float] = None
    sampler_delta: Optional[float] = None
    normalizer_delta: Optional[float] = None
    walk: WalkConfig = field(default_factory=lambda: WalkConfig(chains=16))
    final_walk: WalkConfig = field(default_factory=lambda: WalkConfig(chains=256))
    checkpoint_every: int = 1000

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.max_iters_override is not None and self.max_iters_override < 1:
            raise ValueError("max_iters_override must be >= 1")
        if self.step_size_override is not None and not self.step_size_override > 0:
            raise ValueError("step_size_override must be positive")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        d["walk"] = WalkConfig(**d["walk"])
        d["final_walk"] = WalkConfig(**d["final_walk"])
        return cls(**d)


def theoretical_iterations(n: int, d: int, epsilon: float, tau: float, c0: float = 16.0) -> int:
    """K = ceil(c0 M diam(C) ln(3/tau) (n/epsilon)^2)."""
    diam = math.sqrt(n) * box_log_radius(n, d)
    return math.ceil(c0 * M_BOUND * diam * math.log(3.0 / tau) * (n / epsilon) ** 2)


@dataclass
class FitState:
    y_current: np.ndarray
    y_running_sum: np.ndarray
    iter: int
    K: int
    B: float
    diam: float
    M: float
    delta: float
    step: float
    trace: list = field(default_factory=list)
    rng_state: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, ds: Dataset, cfg: FitConfig) -> "FitState":
        n, d = ds.n, ds.d
        B = box_log_radius(n, d)
        diam = math.sqrt(n) * B
        K = cfg.max_iters_override or theoretical_iterations(n, d, cfg.epsilon, cfg.tau, cfg.c0)
        step = cfg.step_size_override or diam / (M_BOUND * math.sqrt(K))
        rng = np.random.default_rng(cfg.seed)
        return cls(
            y_current=np.zeros(n),
            y_running_sum=np.zeros(n),
            iter=0,
            K=int(K),
            B=B,
            diam=diam,
            M=M_BOUND,
            delta=cfg.epsilon / (2.0 * diam),
            step=step,
            rng_state=rng.bit_generator.state,
        )


def project_C(y, B: float) -> np.ndarray:
    """Clamp each coordinate to [-B, 0]."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return np.clip(y, -B, 0.0)


def stochastic_subgradient(t: TentFunction, s: LevelSetSampler, seed: int | None = None) -> np.ndarray:
    """-1/n + a(X) for one draw X of the level-set sampler."""
    X = sample_density(s, 1, seed=seed)
    _, W = t.values_and_weights(X)
    g = W[0] - 1.0 / t.ds.n
    norm = float(np.linalg.norm(g))
    if norm > M_BOUND + NORM_SLACK:
        raise NumericalFailure(f"stochastic subgradient norm {norm} exceeds {M_BOUND}")
    return g


def objective_estimate(t: TentFunction, s: LevelSetSampler, seed: int | None = None) -> float:
    """F(y) ~ -mean(y) + ln gamma', accurate to ln(1 + 8 delta)."""
    est = estimate_normalizer(s, s.delta, s.tau, seed=seed)
    return -float(np.mean(t.y)) + est.log_gamma


def _iteration_delta(cfg: FitConfig, state: FitState) -> float:
    # The sampler must be delta/2 close in TV; its own error is 12 x its
    # internal delta, hence the factor 24.
    if cfg.sampler_delta is not None:
        return cfg.sampler_delta
    return state.delta / 2.0 / 24.0


def _normalizer_delta(cfg: FitConfig) -> float:
    # 8 x delta stays within the epsilon/2 the final normalization may spend.
    return cfg.normalizer_delta if cfg.normalizer_delta is not None else cfg.epsilon / 16.0


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path, ds: Dataset, cfg: FitConfig, state: FitState) -> None:
    rec = {
        "format": CHECKPOINT_FORMAT,
        "dataset_digest": ds.digest(),
        "config": cfg.to_dict(),
        "iter": state.iter,
        "K": state.K,
        "step": state.step,
        "y_current": state.y_current.tolist(),
        "y_running_sum": state.y_running_sum.tolist(),
        "rng_state": state.rng_state,
        "trace": state.trace,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(rec, indent=1))
    os.replace(tmp, path)


def load_checkpoint(path, ds: Dataset, cfg: FitConfig) -> FitState:
    rec = json.loads(Path(path).read_text())
    if rec.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a tentfit checkpoint")
    if rec["dataset_digest"] != ds.digest():
        raise ValueError("checkpoint was written for a different dataset")
    if FitConfig.from_dict(rec["config"]) != cfg:
        raise ValueError("checkpoint was written with a different configuration")
    state = FitState.initial(ds, cfg)
    state.iter = int(rec["iter"])
    state.y_current = np.array(rec["y_current"], dtype=float)
    state.y_running_sum = np.array(rec["y_running_sum"], dtype=float)
    state.rng_state = rec["rng_state"]
    state.trace = [tuple(r) for r in rec["trace"]]
    return state


# ---------------------------------------------------------------- fit


def run_iterations(
    ds: Dataset,
    cfg: FitConfig,
    state: FitState,
    *,
    stop_at: int | None = None,
    checkpoint_path=None,
    on_iteration: Callable[[FitState, np.ndarray], None] | None = None,
    stats: dict | None = None,
) -> FitState:
    """Advance ``state`` until iteration ``stop_at`` (default K)."""
    stop = state.K if stop_at is None else min(stop_at, state.K)
    rng = np.random.default_rng()
    rng.bit_generator.state = state.rng_state
    delta_s = _iteration_delta(cfg, state)
    tau_s = cfg.tau / (3.0 * state.K)
    while state.iter < stop:
        k = state.iter
        seed = int(rng.integers(0, 2**63 - 1))
        t = TentFunction(ds, state.y_current)
        try:
            s = build_sampler(t, delta_s, tau_s, seed=seed, walk=cfg.walk)
            g = stochastic_subgradient(t, s)
            if stats is not None:
                stats["iterations"] = stats.get("iterations", 0) + s.oracle_calls
        except TentfitError as exc:
            exc.iteration = k
            exc.args = (f"iteration {k}: {exc}",)
            raise
        gnorm = float(np.linalg.norm(g))
        state.y_running_sum = state.y_running_sum + state.y_current
        y_next = project_C(state.y_current - state.step * g, state.B)
        if not (np.all(y_next <= 0.0) and np.all(y_next >= -state.B)):
            raise NumericalFailure(f"iteration {k}: iterate left the box")
        state.y_current = y_next
        state.iter = k + 1
        state.trace.append((k, state.step, gnorm))
        state.rng_state = rng.bit_generator.state
        if on_iteration is not None:
            on_iteration(state, g)
        if checkpoint_path is not None and state.iter % cfg.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, ds, cfg, state)
        if state.iter % max(1, state.K // 20) == 0:
            log.info("iteration %d/%d, |g| = %.3f", state.iter, state.K, gnorm)
    return state


def fit(
    ds: Dataset,
    cfg: FitConfig,
    *,
    reduce_degenerate: bool = False,
    checkpoint_path=None,
    resume: bool = False,
    on_iteration: Callable[[FitState, np.ndarray], None] | None = None,
    stats: dict | None = None,
) -> FittedModel:
    """Approximate log-concave MLE of the points in ``ds``.

    Runs K subgradient steps from y = 0, averages the iterates, and shifts the
    average by ln gamma' so that exp(h) integrates to 1 within epsilon/2.
    ``stats``, if given, receives volume-oracle call counts per phase.
    """
    stats = {} if stats is None else stats
    calls = stats.setdefault("oracle_calls", {"iterations": 0, "normalizer": 0})
    reduction = None
    if not ds.full_dimensional:
        if not reduce_degenerate:
            ds.require_full_dimensional()
        ds, reduction = ds.reduce()
    if resume and checkpoint_path is not None and Path(checkpoint_path).exists():
        state = load_checkpoint(checkpoint_path, ds, cfg)
        log.info("resuming from iteration %d", state.iter)
    else:
        state = FitState.initial(ds, cfg)
    log.info("fitting n=%d d=%d with K=%d, step %.4g", ds.n, ds.d, state.K, state.step)
    state = run_iterations(ds, cfg, state, checkpoint_path=checkpoint_path, on_iteration=on_iteration, stats=calls)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, ds, cfg, state)

    y_bar = state.y_running_sum / state.K
    t_bar = TentFunction(ds, y_bar)
    delta_n = _normalizer_delta(cfg)
    tau_n = cfg.tau / 3.0
    seeds = np.random.SeedSequence(cfg.seed).spawn(1)[0].generate_state(2, dtype=np.uint64)
    s = build_sampler(t_bar, delta_n, tau_n, seed=int(seeds[0]), walk=cfg.final_walk)
    est = estimate_normalizer(s, delta_n, tau_n, seed=int(seeds[1]))
    calls["normalizer"] += s.oracle_calls
    y_tilde = y_bar - est.log_gamma
    meta = {
        "version": __version__,
        "epsilon": cfg.epsilon,
        "tau": cfg.tau,
        "seed": cfg.seed,
        "K": state.K,
        "step": state.step,
        "sampler_delta": _iteration_delta(cfg, state),
        "normalizer_delta": delta_n,
        "objective_estimate": -float(np.mean(y_bar)) + est.log_gamma,
        "alpha_bar": est.alpha_bar,
        "c_tilde": est.c_tilde,
        "levels": s.m,
        "normalizer_trials": est.trials,
    }
    return FittedModel(ds=ds, y_tilde=y_tilde, log_gamma=est.log_gamma, reduction=reduction, meta=meta)


__all__ = [
    "FitConfig",
    "FitState",
    "theoretical_iterations",
    "project_C",
    "stochastic_subgradient",
    "objective_estimate",
    "run_iterations",
    "fit",
    "save_checkpoint",
    "load_checkpoint",
]
