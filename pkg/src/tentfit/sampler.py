"""Sampling from exp(h_y) and estimating its integral by level-set rejection.

The density H_y = exp(h_y) is sandwiched by a dyadic staircase G_y built on
the superlevel sets L_i = {H_y >= M 2^-i}. A draw picks a level i with
probability proportional to its share of the staircase mass, a near-uniform
point of L_i from hit-and-run, and accepts it with probability H_y / G_y,
which is always at least 1/2. The same machinery gives the normalizer as
gamma = M * c * alpha with alpha the acceptance probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .body import ConvexBodyOracle, HitAndRunChains, VolumeEstimate, WalkConfig, estimate_volume
from .errors import RetryExhausted
from .tent import LevelLadder, TentFunction, box_log_radius, build_ladder, log_envelope, superlevel_oracle

RETRY_CAP = 64
MAX_BATCH = 1 << 15
EB_FIRST_CHECK = 1024


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0 / 16.0:
        raise ValueError("delta must lie in (0, 1/16)")


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")


def _child_seeds(seed: int, k: int) -> list[int]:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1))
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(k)]


@dataclass(frozen=True, eq=False)
class LevelSetSampler:
    tent: TentFunction
    ladder: LevelLadder
    vols: np.ndarray
    c_tilde: float
    index_dist: np.ndarray
    delta: float
    tau: float
    bodies: tuple[ConvexBodyOracle, ...] = field(repr=False)
    walk: WalkConfig = field(repr=False, default_factory=WalkConfig)
    seed: int = 0
    volume_estimates: tuple[VolumeEstimate, ...] = field(repr=False, default=())

    @property
    def m(self) -> int:
        return self.ladder.m

    @property
    def oracle_calls(self) -> int:
        return sum(v.oracle_calls for v in self.volume_estimates)


@dataclass(frozen=True)
class NormalizerEstimate:
    gamma: float
    log_gamma: float
    alpha_bar: float
    M: float
    c_tilde: float
    trials: int = 0


def staircase_mass(vols) -> tuple[float, np.ndarray]:
    """c = sum_i 2^-i vol_i + 2^-m vol_m and the index masses it induces."""
    vols = np.asarray(vols, dtype=float)
    m = vols.size
    w = 2.0 ** -np.arange(1, m + 1)
    c = float(np.sum(w * vols) + w[-1] * vols[-1])
    masses = w * vols / c
    masses[-1] = 2.0 * w[-1] * vols[-1] / c
    return c, masses


def build_sampler(t: TentFunction, delta: float, tau: float, seed: int = 0, walk: WalkConfig | None = None) -> LevelSetSampler:
    """Estimate every level-set volume to relative error delta.

    Each level gets failure budget tau / (2m); the other half of tau is left
    for the acceptance-rate estimate. Levels at or below exp(y_min) are the
    hull itself and share one estimate.
    """
    _check_delta(delta)
    _check_tau(tau)
    walk = walk or WalkConfig()
    ladder = build_ladder(t, log_R=box_log_radius(t.ds.n, t.ds.d))
    m = ladder.m
    seeds = _child_seeds(seed, m + 1)
    tau_level = min(0.5, tau / (2 * m))
    bodies = []
    estimates: list[VolumeEstimate] = []
    hull_est = None
    for i, ll in enumerate(ladder.log_levels):
        whole = ll <= t.y_min
        body = superlevel_oracle(t, log_level=float(ll))
        bodies.append(body)
        if whole and hull_est is not None:
            estimates.append(hull_est)
            continue
        est = estimate_volume(body, delta, tau_level, walk.with_seed(seeds[i]))
        if whole:
            hull_est = est
        estimates.append(est)
    vols = np.array([e.value for e in estimates])
    c, masses = staircase_mass(vols)
    return LevelSetSampler(
        tent=t,
        ladder=ladder,
        vols=vols,
        c_tilde=c,
        index_dist=masses,
        delta=delta,
        tau=tau,
        bodies=tuple(bodies),
        walk=walk,
        seed=seeds[m],
        volume_estimates=tuple(estimates),
    )


# ---------------------------------------------------------------- proposals


class _Proposer:
    """Lazily created chain pools, one per level, fed in index order."""

    def __init__(self, s: LevelSetSampler, seed: int, expected: int):
        self.s = s
        self.rng = np.random.default_rng(seed)
        self.seeds = _child_seeds(seed, s.m)
        self.expected = max(1, expected)
        self.pools: dict[int, HitAndRunChains] = {}

    def _pool(self, i: int) -> HitAndRunChains:
        if i not in self.pools:
            want = math.ceil(self.expected * self.s.index_dist[i])
            chains = int(min(self.s.walk.chains, max(1, want)))
            cfg = self.s.walk.with_seed(self.seeds[i])
            self.pools[i] = HitAndRunChains(self.s.bodies[i], cfg, chains)
        return self.pools[i]

    def propose(self, k: int):
        """k proposals: level indices, points, ln H and ln G at each point."""
        s = self.s
        idx = self.rng.choice(s.m, size=k, p=s.index_dist)
        X = np.empty((k, s.tent.ds.d))
        for i in np.unique(idx):
            sel = idx == i
            X[sel] = self._pool(int(i)).draw(int(sel.sum()))
        h = s.tent.values(X)
        return idx, X, h, log_envelope(s.tent, h)

    @property
    def oracle_calls(self) -> int:
        return sum(p.oracle_calls for p in self.pools.values())


def acceptance_ratio(h, log_g) -> np.ndarray:
    """H/G per proposal; exp(-inf) = 0 for points that left the hull."""
    return np.minimum(np.exp(np.asarray(h) - np.asarray(log_g)), 1.0)


def draw_proposals(s: LevelSetSampler, count: int, seed: int | None = None):
    """Raw proposals (index, X, ln H, ln G) for diagnostics and tests."""
    p = _Proposer(s, s.seed if seed is None else seed, count)
    return p.propose(count)


def sample_density(s: LevelSetSampler, count: int, seed: int | None = None) -> np.ndarray:
    """``count`` draws whose law is within 12 delta in L1 of exp(h_y) / gamma.

    Proposals are made in batches and screened in order, so the result is the
    same as running the propose/accept loop one draw at a time.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    d = s.tent.ds.d
    if count == 0:
        return np.empty((0, d))
    seed = s.seed if seed is None else seed
    prop = _Proposer(s, seed, 2 * count)
    rng = np.random.default_rng(_child_seeds(seed, 1)[0])
    out = []
    have = 0
    run = 0  # consecutive rejections carried across batches
    while have < count:
        k = int(min(MAX_BATCH, max(8, 2 * (count - have) + 4)))
        _, X, h, lg = prop.propose(k)
        ok = rng.random(k) < acceptance_ratio(h, lg)
        acc = np.flatnonzero(ok)[: count - have]
        cut = acc[-1] + 1 if acc.size == count - have else k
        if acc.size:
            first = run + int(acc[0])
            inner = int(np.max(np.diff(acc))) - 1 if acc.size > 1 else 0
            run = cut - 1 - int(acc[-1])
        else:
            first = inner = run = run + k
        if max(first, inner, run) >= RETRY_CAP:
            raise RetryExhausted(f"{RETRY_CAP} consecutive rejections in the level-set sampler")
        out.append(X[acc])
        have += acc.size
    return np.concatenate(out)


def estimate_normalizer(s: LevelSetSampler, delta: float, tau: float, seed: int | None = None) -> NormalizerEstimate:
    """gamma' = M * c * alpha_bar.

    alpha_bar averages H/G over fresh proposals rather than 0/1 accept flags.
    Both have mean alpha, but H/G lies in [1/2, 1], so Hoeffding needs at most
    ceil(8 ln(4/tau) / delta^2) draws for |alpha_bar - alpha| <= delta/8 with
    probability 1 - tau/2. Sampling stops earlier once an empirical-Bernstein
    bound, checked on a doubling schedule with the failure budget split over
    the checks, already certifies delta/8.
    """
    _check_delta(delta)
    _check_tau(tau)
    target = delta / 8.0
    cap = math.ceil(8.0 * math.log(4.0 / tau) / delta**2)
    checks = [min(cap, EB_FIRST_CHECK << j) for j in range(64)]
    checks = sorted(set(checks))
    log_fail = math.log(4.0 * len(checks) / tau)
    seed = s.seed if seed is None else seed
    prop = _Proposer(s, _child_seeds(seed, 2)[1], cap)
    ratios = []
    done = 0
    for stop in checks:
        while done < stop:
            k = min(MAX_BATCH, stop - done)
            _, _, h, lg = prop.propose(k)
            ratios.append(acceptance_ratio(h, lg))
            done += k
        if stop == cap:
            break
        r = np.concatenate(ratios)
        var = float(np.var(r, ddof=1))
        bound = math.sqrt(2.0 * var * log_fail / done) + 7.0 * 0.5 * log_fail / (3.0 * (done - 1))
        if bound <= target:
            break
    alpha = float(np.mean(np.concatenate(ratios)))
    M = s.tent.M
    gamma = M * s.c_tilde * alpha
    log_gamma = s.tent.log_M + math.log(s.c_tilde) + math.log(alpha)
    return NormalizerEstimate(gamma=gamma, log_gamma=log_gamma, alpha_bar=alpha, M=M, c_tilde=s.c_tilde, trials=done)


__all__ = [
    "LevelSetSampler",
    "NormalizerEstimate",
    "RETRY_CAP",
    "staircase_mass",
    "build_sampler",
    "draw_proposals",
    "acceptance_ratio",
    "sample_density",
    "estimate_normalizer",
]
