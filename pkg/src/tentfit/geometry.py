"""Datasets and the two linear programs every tent computation reduces to.

The packing program ``max a.y  s.t.  a in simplex, sum_i a_i x_i = x`` gives
the tent value and a subgradient in ``y``; its dual (the covering program over
affine functions dominating the lifted points) gives separating hyperplanes
for superlevel sets.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateHull, NumericalFailure
from .lp import (
    FEAS_TOL,
    INFEASIBLE,
    OPTIMAL,
    _init_tableau,
    _phase1,
    _phase2,
    feasible_standard,
    solve_standard,
)

RANK_TOL = 1e-10
MEMBER_TOL = 1e-9


class Verdict(enum.Enum):
    OUTSIDE_HULL = "OUTSIDE_HULL"
    INSIDE = "INSIDE"

    def __repr__(self) -> str:
        return self.value


OUTSIDE_HULL = Verdict.OUTSIDE_HULL
INSIDE = Verdict.INSIDE


@dataclass(frozen=True, eq=False)
class Dataset:
    """n points in R^d plus hull metadata.

    Internally the points are centred and scaled by a single factor before
    they reach the LP kernels; every public quantity is in the caller's
    coordinates.
    """

    points: np.ndarray
    affine_rank: int
    bbox: tuple[np.ndarray, np.ndarray]
    _center: np.ndarray = field(repr=False)
    _scale: float = field(repr=False)
    _lifted: np.ndarray = field(repr=False)

    @classmethod
    def from_points(cls, points) -> "Dataset":
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        center = 0.5 * (lo + hi)
        scale = float(np.max(hi - lo)) / 2.0
        if scale <= 0.0:
            scale = 1.0
        lifted = np.vstack([((pts - center) / scale).T, np.ones(pts.shape[0])])
        pts.setflags(write=False)
        lifted.setflags(write=False)
        return cls(
            points=pts,
            affine_rank=_affine_rank(pts),
            bbox=(lo, hi),
            _center=center,
            _scale=scale,
            _lifted=np.ascontiguousarray(lifted),
        )

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def full_dimensional(self) -> bool:
        return self.affine_rank == self.d

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self._center) / self._scale

    def digest(self) -> str:
        """Order-sensitive SHA-256 of the coordinates (no canonicalisation)."""
        h = hashlib.sha256()
        h.update(np.asarray(self.points.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return h.hexdigest()

    def require_full_dimensional(self) -> None:
        if not self.full_dimensional:
            raise DegenerateHull(
                f"points span an affine subspace of dimension {self.affine_rank} < d = {self.d}"
            )

    def reduce(self) -> tuple["Dataset", "AffineReduction"]:
        """Project onto the affine hull of the points via an orthonormal basis."""
        origin = self.points[0].copy()
        diffs = self.points - origin
        _, s, vt = np.linalg.svd(diffs, full_matrices=False)
        r = self.affine_rank
        if r == 0:
            raise DegenerateHull("all points coincide; no affine hull to fit on")
        basis = vt[:r].T
        red = AffineReduction(basis=basis, origin=origin)
        return Dataset.from_points(red.forward(self.points)), red


@dataclass(frozen=True, eq=False)
class AffineReduction:
    """x -> basis^T (x - origin); columns of ``basis`` are orthonormal."""

    basis: np.ndarray
    origin: np.ndarray

    def forward(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self.basis

    def residual(self, x: np.ndarray) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.origin
        return np.linalg.norm(diff - (diff @ self.basis) @ self.basis.T, axis=-1)


def _affine_rank(pts: np.ndarray) -> int:
    if pts.shape[0] < 2:
        return 0
    s = np.linalg.svd(pts[1:] - pts[0], compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


@dataclass(frozen=True)
class PackingSolution:
    """Optimal packing-LP solution: tent value, weights a, and the dual hyperplane.

    ``beta`` = (beta_0, beta_1..beta_d) is an optimal covering-LP solution,
    i.e. the affine function beta_0 + beta.x' dominates every lifted point and
    touches the tent at the queried x.
    """

    value: float
    weights: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class SeparatingHyperplane:
    """beta_0 + beta.x <= threshold at the query; >= threshold on the level set."""

    beta: np.ndarray
    threshold: float

    def side(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.beta[0] + x @ self.beta[1:]


def _beta_from_duals(ds: Dataset, w: np.ndarray) -> np.ndarray:
    d = ds.d
    normal = w[:d] / ds._scale
    return np.concatenate([[w[d] - normal @ ds._center], normal])


def _rhs(ds: Dataset, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != ds.d:
        raise ValueError(f"query has {x.size} coordinates, expected {ds.d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query point must be finite")
    return np.concatenate([ds.normalize(x), [1.0]])


def _check_y(ds: Dataset, y) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=float).reshape(-1)
    if y.size != ds.n:
        raise ValueError(f"y has {y.size} entries, expected {ds.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    return y


def eval_tent(ds: Dataset, y, x) -> PackingSolution | Verdict:
    """Tent value h_y(x) with an optimal weight vector, or ``OUTSIDE_HULL``."""
    y = _check_y(ds, y)
    status, a, value, w = solve_standard(ds._lifted, _rhs(ds, x), y)
    if status == INFEASIBLE:
        return OUTSIDE_HULL
    if status != OPTIMAL:
        raise NumericalFailure(f"packing LP failed with status {status}")
    return PackingSolution(value=float(value), weights=a, beta=_beta_from_duals(ds, w))


def membership_hull(ds: Dataset, x) -> bool:
    status = feasible_standard(ds._lifted, _rhs(ds, x))
    if status == OPTIMAL:
        return True
    if status == INFEASIBLE:
        return False
    raise NumericalFailure(f"hull membership LP failed with status {status}")


def separate_superlevel(ds: Dataset, y, x, level: float) -> SeparatingHyperplane | Verdict:
    """``INSIDE`` when exp(h_y(x)) >= level, else a hyperplane cutting x off."""
    if not level > 0.0:
        raise ValueError("level must be positive")
    y = _check_y(ds, y)
    log_level = float(np.log(level))
    b = _rhs(ds, x)
    status, _, value, w = solve_standard(ds._lifted, b, y)
    if status == INFEASIBLE:
        # x is outside the hull: the Farkas ray is >= 0 on every data point
        # and negative at x; split the difference.
        return SeparatingHyperplane(beta=_beta_from_duals(ds, w), threshold=float(b @ w) / 2.0)
    if status != OPTIMAL:
        raise NumericalFailure(f"covering LP failed with status {status}")
    if value >= log_level - MEMBER_TOL:
        return INSIDE
    gap = log_level - value
    return SeparatingHyperplane(beta=_beta_from_duals(ds, w), threshold=log_level - gap / 2.0)


# ---------------------------------------------------------------- batched kernels


@njit(cache=True)
def _tent_batch(P, y, X):
    d1, n = P.shape
    d = d1 - 1
    B = X.shape[0]
    vals = np.empty(B)
    W = np.zeros((B, n))
    status = np.zeros(B, dtype=np.int64)
    b = np.empty(d1)
    for r in range(B):
        for j in range(d):
            b[j] = X[r, j]
        b[d] = 1.0
        st, a, v, _ = solve_standard(P, b, y)
        status[r] = st
        if st == OPTIMAL:
            vals[r] = v
            W[r] = a
        else:
            vals[r] = -np.inf
    return vals, W, status


@njit(cache=True)
def _chord_one(P, y, log_level, has_level, x0, u):
    d1, n = P.shape
    d = d1 - 1
    m = d1 + 1 if has_level else d1
    k = n + 3  # weights, level slack, t+, t-
    A = np.zeros((m, k))
    b = np.zeros(m)
    for i in range(d1):
        for j in range(n):
            A[i, j] = P[i, j]
    for i in range(d):
        A[i, n + 1] = -u[i]
        A[i, n + 2] = u[i]
        b[i] = x0[i]
    b[d] = 1.0
    if has_level:
        for j in range(n):
            A[d1, j] = y[j]
        A[d1, n] = -1.0
        b[d1] = log_level
    max_iter = 50 * (m + k) + 100
    T, basis, _ = _init_tableau(A, b)
    st = _phase1(T, basis, k, max_iter)
    if st != OPTIMAL:
        return st, 0.0, 0.0
    c = np.zeros(k)
    c[n + 1] = 1.0
    c[n + 2] = -1.0
    st = _phase2(T, basis, c, k, max_iter)
    if st != OPTIMAL:
        return st, 0.0, 0.0
    hi = T[m, T.shape[1] - 1]
    c[n + 1] = -1.0
    c[n + 2] = 1.0
    st = _phase2(T, basis, c, k, max_iter)
    if st != OPTIMAL:
        return st, 0.0, 0.0
    lo = -T[m, T.shape[1] - 1]
    return OPTIMAL, lo, hi


@njit(cache=True)
def _chord_batch(P, y, log_level, has_level, X, U):
    B = X.shape[0]
    lo = np.empty(B)
    hi = np.empty(B)
    status = np.zeros(B, dtype=np.int64)
    for r in range(B):
        st, a, bb = _chord_one(P, y, log_level, has_level, X[r], U[r])
        status[r] = st
        lo[r] = a
        hi[r] = bb
    return lo, hi, status


@njit(cache=True)
def native_level_chord(params, x, u):
    """Single-row chord of {h_y >= level} for the compiled walks.

    ``params`` = (lifted points, y, log level, has level, centre, scale); x and
    u are in the caller's coordinates. Status 1 flags a start point outside
    the set, which the walks treat as a zero-length chord.
    """
    P, y, log_level, has_level, center, scale = params
    d = x.size
    xn = np.empty(d)
    un = np.empty(d)
    for j in range(d):
        xn[j] = (x[j] - center[j]) / scale
        un[j] = u[j] / scale
    st, lo, hi = _chord_one(P, y, log_level, has_level, xn, un)
    if st == INFEASIBLE:
        return 1, 0.0, 0.0
    if st != OPTIMAL:
        return 2, 0.0, 0.0
    return 0, lo, hi


def level_chord_params(ds: Dataset, y, log_level: float | None) -> tuple:
    y = _check_y(ds, y)
    has_level = log_level is not None
    return (ds._lifted, y, float(log_level) if has_level else 0.0, has_level, ds._center, float(ds._scale))


def tent_values(ds: Dataset, y, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised h_y over the rows of X; -inf outside the hull."""
    y = _check_y(ds, y)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    vals, W, status = _tent_batch(ds._lifted, y, np.ascontiguousarray(ds.normalize(X)))
    bad = (status != OPTIMAL) & (status != INFEASIBLE)
    if np.any(bad):
        raise NumericalFailure("packing LP failed inside a batch evaluation")
    return vals, W


def level_chords(ds: Dataset, y, log_level: float | None, X: np.ndarray, U: np.ndarray):
    """Exact chord [lo, hi] of {h_y >= log_level} along x + t u for each row.

    ``log_level=None`` gives chords of the hull itself. Rows whose start point
    is not in the set come back with status INFEASIBLE and lo = hi = 0.
    """
    y = _check_y(ds, y)
    Xn = np.ascontiguousarray(ds.normalize(X))
    Un = np.ascontiguousarray(np.asarray(U, dtype=float) / ds._scale)
    has_level = log_level is not None
    lo, hi, status = _chord_batch(
        ds._lifted, y, float(log_level) if has_level else 0.0, has_level, Xn, Un
    )
    return lo, hi, status


__all__ = [
    "Dataset",
    "AffineReduction",
    "PackingSolution",
    "SeparatingHyperplane",
    "Verdict",
    "OUTSIDE_HULL",
    "INSIDE",
    "FEAS_TOL",
    "eval_tent",
    "membership_hull",
    "separate_superlevel",
    "tent_values",
    "level_chords",
]
