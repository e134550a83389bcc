"""Uniform sampling and volume estimation for convex bodies.

Bodies are given by a membership predicate plus, optionally, an exact batched
chord routine. Sampling is hit-and-run over several independent chains that
are advanced together as numpy arrays. Volume estimation is the classical
multiphase scheme over concentric balls; each ratio is estimated from the
fraction of every hit-and-run chord that lies in the smaller ball, which has
the same expectation as counting landing points but a smaller variance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy.special import gammaln

from .errors import BudgetExceeded, DegenerateBody, NumericalFailure, OracleFailure

ChordFn = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

CHORD_REL_TOL = 1e-10
AXIS_MARGIN = 1e-9


@dataclass(frozen=True, eq=False)
class ConvexBodyOracle:
    """A convex body seen through its membership oracle.

    ``chords(X, U)`` (optional) returns, for each row, the parameter interval
    ``[lo, hi]`` with ``X + t U`` inside the body; without it chords are found
    by bisection against ``membership``. ``native_chord`` (optional) is a
    numba-compiled ``f(native_params, x, u) -> (status, lo, hi)`` for one row;
    when present the walks run entirely in compiled code.
    """

    membership: Callable[[np.ndarray], bool]
    interior_point: np.ndarray
    bbox: tuple[np.ndarray, np.ndarray]
    separation: Optional[Callable[[np.ndarray], object]] = None
    chords: Optional[ChordFn] = None
    native_chord: Optional[object] = field(default=None, repr=False)
    native_params: tuple = field(default=(), repr=False)

    @property
    def d(self) -> int:
        return int(np.asarray(self.interior_point).size)

    @property
    def diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))


@dataclass(frozen=True)
class WalkConfig:
    """Hit-and-run settings. ``None`` burn-in/thinning mean 100 d^2 and 10 d.

    ``rounding=None`` rounds for volume estimation and not for plain sampling.
    """

    burn_in: Optional[int] = None
    thinning: Optional[int] = None
    rng_seed: int = 0
    rounding: Optional[bool] = None
    chains: int = 64
    max_oracle_calls: int = 500_000_000

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 1:
            raise ValueError("burn_in must be >= 1")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    def burn_in_for(self, d: int) -> int:
        return self.burn_in if self.burn_in is not None else 100 * d * d

    def thinning_for(self, d: int) -> int:
        return self.thinning if self.thinning is not None else 10 * d

    def with_seed(self, seed: int) -> "WalkConfig":
        return replace(self, rng_seed=int(seed))


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    relative_error_target: float
    confidence_target: float
    phases: int
    samples_per_phase: int
    log_value: float = field(default=float("nan"))
    oracle_calls: int = 0


# ------------------------------------------------------------------ chords


class _Counter:
    def __init__(self, limit: int):
        self.calls = 0
        self.limit = limit

    def add(self, k: int) -> None:
        self.calls += k
        if self.calls > self.limit:
            raise BudgetExceeded(f"oracle budget of {self.limit} calls exhausted")


def _box_exit(x, u, lo, hi) -> float:
    t = np.inf
    for j in range(x.size):
        if u[j] > 0:
            t = min(t, (hi[j] - x[j]) / u[j])
        elif u[j] < 0:
            t = min(t, (lo[j] - x[j]) / u[j])
    return max(t, 0.0)


def _bisect_end(member, x, u, t_out, tol, counter: _Counter) -> float:
    counter.add(1)
    if member(x + t_out * u):
        return t_out
    t_in = 0.0
    while t_out - t_in > tol:
        mid = 0.5 * (t_in + t_out)
        counter.add(1)
        if member(x + mid * u):
            t_in = mid
        else:
            t_out = mid
    return t_in


def bisection_chords(body: ConvexBodyOracle, X, U, counter: Optional[_Counter] = None):
    """Chord endpoints by bisection against membership, to 1e-10 of the bbox diagonal."""
    counter = counter or _Counter(np.iinfo(np.int64).max)
    lo_box, hi_box = (np.asarray(v, dtype=float) for v in body.bbox)
    diam = max(body.diameter, 1e-300)
    X = np.atleast_2d(X)
    U = np.atleast_2d(U)
    lo = np.empty(X.shape[0])
    hi = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        x, u = X[r], U[r]
        scale = np.linalg.norm(u)
        tol = CHORD_REL_TOL * diam / max(scale, 1e-300)
        hi[r] = _bisect_end(body.membership, x, u, _box_exit(x, u, lo_box, hi_box), tol, counter)
        lo[r] = -_bisect_end(body.membership, x, -u, _box_exit(x, -u, lo_box, hi_box), tol, counter)
    return lo, hi


def _chords(body: ConvexBodyOracle, X, U, counter: _Counter):
    if body.chords is None:
        return bisection_chords(body, X, U, counter)
    counter.add(2 * X.shape[0])
    lo, hi = body.chords(X, U)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise OracleFailure("chord oracle returned non-finite endpoints")
    return lo, hi


# ------------------------------------------------------------------ compiled walks

NATIVE_OK, NATIVE_MISS = 0, 1  # MISS: start point fell outside (round-off); stay put


@njit(cache=True)
def _native_polytope_chord(params, x, u):
    A, b = params
    lo = -np.inf
    hi = np.inf
    for i in range(A.shape[0]):
        slack = b[i]
        rate = 0.0
        for j in range(x.size):
            slack -= A[i, j] * x[j]
            rate += A[i, j] * u[j]
        if rate > 0.0:
            hi = min(hi, slack / rate)
        elif rate < 0.0:
            lo = max(lo, slack / rate)
    return NATIVE_OK, lo, hi


@njit(cache=True)
def _nb_direction(d):
    w = np.empty(d)
    nrm = 0.0
    while nrm == 0.0:
        nrm = 0.0
        for j in range(d):
            w[j] = np.random.standard_normal()
            nrm += w[j] * w[j]
        nrm = np.sqrt(nrm)
    for j in range(d):
        w[j] /= nrm
    return w


@njit(cache=True)
def _nb_chord(chord, params, shift, L, z, w):
    d = z.size
    x = shift.copy()
    u = np.zeros(d)
    for i in range(d):
        for j in range(d):
            x[i] += L[i, j] * z[j]
            u[i] += L[i, j] * w[j]
    st, lo, hi = chord(params, x, u)
    if st == NATIVE_MISS:
        return NATIVE_OK, 0.0, 0.0
    return st, lo, hi


@njit(cache=True)
def _nb_walk(chord, params, shift, L, Z, steps, seed):
    """Advance every row of Z by ``steps`` hit-and-run steps; returns status."""
    np.random.seed(seed)
    p, d = Z.shape
    for _ in range(steps):
        for r in range(p):
            w = _nb_direction(d)
            st, lo, hi = _nb_chord(chord, params, shift, L, Z[r], w)
            if st != NATIVE_OK or not (np.isfinite(lo) and np.isfinite(hi)):
                return 1
            t = lo + (hi - lo) * np.random.random()
            for j in range(d):
                Z[r, j] += t * w[j]
    return 0


@njit(cache=True)
def _nb_ball(z, w, r):
    b = 0.0
    c = -r * r
    for j in range(z.size):
        b += z[j] * w[j]
        c += z[j] * z[j]
    disc = b * b - c
    if disc <= 0.0:
        return 0.0, 0.0
    root = np.sqrt(disc)
    return -b - root, -b + root


@njit(cache=True)
def _nb_phase(chord, params, shift, L, Z, steps, r_big, r_small, sums, accumulate, seed):
    """Walk on K & B(r_big); optionally add each chord's share inside B(r_small)."""
    np.random.seed(seed)
    p, d = Z.shape
    for _ in range(steps):
        for r in range(p):
            w = _nb_direction(d)
            st, klo, khi = _nb_chord(chord, params, shift, L, Z[r], w)
            if st != NATIVE_OK or not (np.isfinite(klo) and np.isfinite(khi)):
                return 1
            blo, bhi = _nb_ball(Z[r], w, r_big)
            clo = max(klo, blo)
            chi = min(khi, bhi)
            if accumulate:
                width = chi - clo
                if width > 0.0:
                    slo, shi = _nb_ball(Z[r], w, r_small)
                    inner = min(chi, shi) - max(clo, slo)
                    sums[r] += max(inner, 0.0) / width
                else:
                    sums[r] += 1.0
            t = clo + (chi - clo) * np.random.random()
            for j in range(d):
                Z[r, j] += t * w[j]
    return 0


def _native_seed(rng) -> int:
    return int(rng.integers(0, 2**32 - 1))


# ------------------------------------------------------------------ frames


@dataclass(frozen=True)
class _Frame:
    """Walk coordinates z with x = shift + L z."""

    shift: np.ndarray
    L: np.ndarray
    logdet: float

    @classmethod
    def identity(cls, shift):
        shift = np.asarray(shift, dtype=float)
        return cls(shift=shift, L=np.eye(shift.size), logdet=0.0)

    def to_x(self, Z):
        return self.shift + Z @ self.L.T

    def to_z(self, X):
        return np.linalg.solve(self.L, (np.asarray(X) - self.shift).T).T

    def chords(self, body, Z, W, counter):
        return _chords(body, self.to_x(Z), W @ self.L.T, counter)


def _unit_directions(rng: np.random.Generator, p: int, d: int) -> np.ndarray:
    U = rng.standard_normal((p, d))
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    while np.any(norms == 0.0):
        bad = norms[:, 0] == 0.0
        U[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(U, axis=1, keepdims=True)
    return U / norms


def _step(body, frame, Z, rng, counter):
    W = _unit_directions(rng, Z.shape[0], Z.shape[1])
    lo, hi = frame.chords(body, Z, W, counter)
    t = lo + (hi - lo) * rng.random(Z.shape[0])
    return Z + t[:, None] * W


def _walk(body, frame, Z, steps, rng, counter):
    if body.native_chord is not None:
        counter.add(2 * Z.shape[0] * steps)
        Z = np.ascontiguousarray(Z, dtype=float).copy()
        st = _nb_walk(body.native_chord, body.native_params, frame.shift, np.ascontiguousarray(frame.L), Z, steps, _native_seed(rng))
        if st:
            raise NumericalFailure("chord oracle failed during hit-and-run")
        return Z
    for _ in range(steps):
        Z = _step(body, frame, Z, rng, counter)
    return Z


def _check_interior(body: ConvexBodyOracle, counter: _Counter) -> None:
    x = np.asarray(body.interior_point, dtype=float)
    if not body.membership(x):
        raise DegenerateBody("interior_point is not a member of the body")
    d = x.size
    X = np.repeat(x[None, :], d, axis=0)
    lo, hi = _chords(body, X, np.eye(d), counter)
    margin = AXIS_MARGIN * max(body.diameter, 1e-300)
    if np.any(hi - lo <= margin):
        raise DegenerateBody("no chord of positive length through interior_point")


def _rounded_frame(body, cfg: WalkConfig, rng, counter) -> _Frame:
    d = body.d
    x0 = np.asarray(body.interior_point, dtype=float)
    ident = _Frame.identity(np.zeros(d))
    p = max(2, min(cfg.chains, 32))
    per_chain = max(2, math.ceil(20 * (d + 1) / p))
    Z = np.repeat(x0[None, :], p, axis=0)
    Z = _walk(body, ident, Z, cfg.burn_in_for(d), rng, counter)
    pilot = []
    for _ in range(per_chain):
        Z = _walk(body, ident, Z, cfg.thinning_for(d), rng, counter)
        pilot.append(Z)
    pilot = np.concatenate(pilot)
    mean = pilot.mean(axis=0)
    cov = np.atleast_2d(np.cov(pilot, rowvar=False))
    cov = cov + 1e-12 * max(np.trace(cov), 1e-300) * np.eye(d)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise DegenerateBody("pilot covariance is singular") from exc
    if not body.membership(mean):
        mean = x0
    return _Frame(shift=mean, L=L, logdet=float(np.sum(np.log(np.diag(L)))))


# ------------------------------------------------------------------ sampling


class HitAndRunChains:
    """A pool of hit-and-run chains that hands out points on demand.

    Chains start at the interior point and are burnt in on construction.
    ``draw(k)`` advances every chain by ``thinning`` steps per round and keeps
    surplus points for later calls, so no step is wasted.
    """

    def __init__(self, body: ConvexBodyOracle, cfg: WalkConfig, chains: int, rng=None, counter=None):
        self.body = body
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
        self.counter = counter or _Counter(cfg.max_oracle_calls)
        d = body.d
        _check_interior(body, self.counter)
        if cfg.rounding:
            self.frame = _rounded_frame(body, cfg, self.rng, self.counter)
            start = np.zeros(d)
        else:
            self.frame = _Frame.identity(np.zeros(d))
            start = np.asarray(body.interior_point, dtype=float)
        Z = np.repeat(start[None, :], max(1, int(chains)), axis=0)
        self.Z = _walk(body, self.frame, Z, cfg.burn_in_for(d), self.rng, self.counter)
        self._buf = np.empty((0, d))

    @property
    def oracle_calls(self) -> int:
        return self.counter.calls

    def draw(self, k: int) -> np.ndarray:
        d = self.body.d
        out = [self._buf]
        have = self._buf.shape[0]
        thin = self.cfg.thinning_for(d)
        while have < k:
            self.Z = _walk(self.body, self.frame, self.Z, thin, self.rng, self.counter)
            X = self.frame.to_x(self.Z)
            out.append(X)
            have += X.shape[0]
        pts = np.concatenate(out) if len(out) > 1 else out[0]
        self._buf = pts[k:]
        return pts[:k]


def hit_and_run_sample(body: ConvexBodyOracle, cfg: WalkConfig, count: int) -> np.ndarray:
    """``count`` approximately uniform points of ``body`` (rows of the result).

    Runs ``min(cfg.chains, count)`` chains from the interior point; each chain
    discards ``burn_in`` steps and then emits one point per ``thinning`` steps.
    Output order is round-robin across chains and fully determined by the seed.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty((0, body.d))
    pool = HitAndRunChains(body, cfg, min(cfg.chains, count))
    return pool.draw(count)


# ------------------------------------------------------------------ volume


def log_ball_volume(d: int, r: float) -> float:
    return 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d + 1.0)) + d * math.log(r)


def _ball_chord(Z, W, r):
    b = np.einsum("ij,ij->i", Z, W)
    c = np.einsum("ij,ij->i", Z, Z) - r * r
    disc = b * b - c
    root = np.sqrt(np.maximum(disc, 0.0))
    lo = np.where(disc > 0, -b - root, 0.0)
    hi = np.where(disc > 0, -b + root, 0.0)
    return lo, hi


def _outer_radius(body: ConvexBodyOracle, frame: _Frame) -> float:
    lo, hi = (np.asarray(v, dtype=float) for v in body.bbox)
    d = lo.size
    if d <= 12:
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        return float(np.max(np.linalg.norm(frame.to_z(corners), axis=1)))
    far = np.maximum(np.abs(lo - frame.shift), np.abs(hi - frame.shift))
    return float(np.linalg.norm(far) / np.min(np.linalg.svd(frame.L, compute_uv=False)))


def estimate_volume(body: ConvexBodyOracle, delta: float, tau: float, cfg: WalkConfig) -> VolumeEstimate:
    """Volume within relative error ``delta`` with probability about ``1 - tau``.

    Balls B_k = B(c, r0 2^{k/d}) grow from an inscribed ball to one covering
    the bounding box. Each ratio vol(K & B_{k-1}) / vol(K & B_k) is sampled
    until its share of a Bernstein bound on the summed log-errors is met:
    with t = log(1 + delta) and L = log(2 / tau), phase k stops once
    N_k >= max(4 q L s_k^2 / (rho_k t)^2, 4 L / (3 t rho_k)), s_k^2 being the
    between-chain estimate of the per-step variance.
    """
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    if not 0.0 < tau <= 0.5:
        raise ValueError("tau must lie in (0, 1/2]")
    d = body.d
    rng = np.random.default_rng(cfg.rng_seed)
    counter = _Counter(cfg.max_oracle_calls)
    _check_interior(body, counter)
    if cfg.rounding is False:
        frame = _Frame.identity(np.asarray(body.interior_point, dtype=float))
    else:
        frame = _rounded_frame(body, cfg, rng, counter)

    origin = np.zeros((d, d))
    lo, hi = frame.chords(body, origin, np.eye(d), counter)
    r_axis = float(np.min(np.minimum(-lo, hi)))
    r0 = r_axis / math.sqrt(d)
    if not r0 > 0.0:
        raise DegenerateBody("centre of the body has no inscribed ball")
    r_out = _outer_radius(body, frame)
    q = max(1, math.ceil(d * math.log2(max(r_out / r0, 1.0))))
    radii = r0 * 2.0 ** (np.arange(q + 1) / d)

    t_log = math.log1p(delta)
    log_fail = math.log(2.0 / tau)
    p = max(cfg.chains, 8)
    burn = cfg.burn_in_for(d)
    block = cfg.thinning_for(d)
    log_vol = log_ball_volume(d, r0) + frame.logdet
    Z = np.zeros((p, d))
    native = body.native_chord is not None
    L_c = np.ascontiguousarray(frame.L)
    dummy = np.zeros(p)
    max_n = 0
    for k in range(1, q + 1):
        r_big, r_small = radii[k], radii[k - 1]

        def advance(Z, nsteps, acc):
            if native:
                counter.add(2 * p * nsteps)
                st = _nb_phase(
                    body.native_chord, body.native_params, frame.shift, L_c, Z, nsteps,
                    r_big, r_small, acc if acc is not None else dummy, acc is not None, _native_seed(rng),
                )
                if st:
                    raise NumericalFailure("chord oracle failed during volume estimation")
                return Z
            for _ in range(nsteps):
                W = _unit_directions(rng, p, d)
                klo, khi = frame.chords(body, Z, W, counter)
                blo, bhi = _ball_chord(Z, W, r_big)
                clo, chi = np.maximum(klo, blo), np.minimum(khi, bhi)
                if acc is not None:
                    slo, shi = _ball_chord(Z, W, r_small)
                    inner = np.maximum(np.minimum(chi, shi) - np.maximum(clo, slo), 0.0)
                    width = chi - clo
                    acc += np.where(width > 0, inner / np.where(width > 0, width, 1.0), 1.0)
                t = clo + (chi - clo) * rng.random(p)
                Z = Z + t[:, None] * W
            return Z

        warm = burn if k == 1 else max(block, burn // 10)
        Z = advance(Z, warm, None)
        sums = np.zeros(p)
        steps = 0
        while True:
            Z = advance(Z, block, sums)
            steps += block
            means = sums / steps
            rho = float(means.mean())
            if rho <= 0.0:
                continue
            var_eff = steps * float(np.var(means, ddof=1))
            need = max(
                4.0 * q * log_fail * var_eff / (rho * t_log) ** 2,
                4.0 * log_fail / (3.0 * t_log * rho),
            )
            if p * steps >= need:
                break
        max_n = max(max_n, p * steps)
        log_vol -= math.log(rho)

    return VolumeEstimate(
        value=math.exp(log_vol),
        relative_error_target=delta,
        confidence_target=1.0 - tau,
        phases=q,
        samples_per_phase=max_n,
        log_value=log_vol,
        oracle_calls=counter.calls,
    )


# ------------------------------------------------------------------ simple bodies


def polytope_body(A, b, interior_point) -> ConvexBodyOracle:
    """{x : A x <= b} with exact chords; must be bounded."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(interior_point, dtype=float)
    d = A.shape[1]
    lo = np.empty(d)
    hi = np.empty(d)
    from .lp import solve_lp

    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        free = [(None, None)] * d
        lo[j] = solve_lp(e, A, ["<="] * len(b), b, bounds=free).value
        hi[j] = solve_lp(e, A, ["<="] * len(b), b, bounds=free, maximize=True).value

    def membership(x):
        return bool(np.all(A @ np.asarray(x, dtype=float) <= b + 1e-12))

    def chords(X, U):
        slack = b[None, :] - X @ A.T
        rate = U @ A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / rate
        upper = np.where(rate > 0, ratio, np.inf).min(axis=1)
        lower = np.where(rate < 0, ratio, -np.inf).max(axis=1)
        return lower, upper

    return ConvexBodyOracle(
        membership=membership,
        interior_point=x0,
        bbox=(lo, hi),
        chords=chords,
        native_chord=_native_polytope_chord,
        native_params=(np.ascontiguousarray(A), np.ascontiguousarray(b)),
    )


def box_body(lo, hi) -> ConvexBodyOracle:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    A = np.vstack([np.eye(d), -np.eye(d)])
    b = np.concatenate([hi, -lo])
    return polytope_body(A, b, 0.5 * (lo + hi))


def simplex_body(d: int) -> ConvexBodyOracle:
    """Standard simplex {x >= 0, sum x <= 1}."""
    A = np.vstack([-np.eye(d), np.ones((1, d))])
    b = np.concatenate([np.zeros(d), [1.0]])
    return polytope_body(A, b, np.full(d, 1.0 / (d + 1)))


def ball_body(center, radius: float) -> ConvexBodyOracle:
    """Euclidean ball, membership only (chords fall back to bisection)."""
    c = np.asarray(center, dtype=float)

    def membership(x):
        return bool(np.linalg.norm(np.asarray(x, dtype=float) - c) <= radius)

    return ConvexBodyOracle(membership=membership, interior_point=c, bbox=(c - radius, c + radius))
