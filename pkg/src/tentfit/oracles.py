"""Slow, independent reference computations used to check the fast paths.

Nothing here calls the simplex code: tent values come from enumerating
Caratheodory supports, integrals from a trapezoidal grid, and Hellinger
distances from plain Monte Carlo.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ResolutionTooCoarse, SizeCap
from .geometry import OUTSIDE_HULL, Dataset, Verdict

BRUTE_MAX_N = 12
BRUTE_MAX_D = 3
QUAD_MAX_D = 3
SOLVE_TOL = 1e-10


# ---------------------------------------------------------------- tent by enumeration


def oracle_tent_bruteforce(ds: Dataset, y, x) -> float | Verdict:
    """max z with (x, z) in the hull of the lifted points, by enumeration.

    Any vertex of the packing polytope is supported on at most d + 1 points
    with affinely independent locations, so it suffices to solve every such
    square (or least-squares) barycentric system and keep the feasible ones.
    """
    n, d = ds.n, ds.d
    if n > BRUTE_MAX_N or d > BRUTE_MAX_D:
        raise SizeCap(f"brute force is limited to n <= {BRUTE_MAX_N}, d <= {BRUTE_MAX_D}")
    P = ds.points
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(-1)
    scale = max(1.0, float(np.max(np.abs(P))), float(np.max(np.abs(x))))
    target = np.concatenate([x, [1.0]])
    best = -np.inf
    for k in range(1, d + 2):
        for S in itertools.combinations(range(n), k):
            A = np.vstack([P[list(S)].T, np.ones(k)])  # (d+1) x k
            if np.linalg.matrix_rank(A, tol=1e-12 * scale) < k:
                continue
            lam, *_ = np.linalg.lstsq(A, target, rcond=None)
            if np.max(np.abs(A @ lam - target)) > SOLVE_TOL * scale:
                continue
            if np.min(lam) < -SOLVE_TOL:
                continue
            best = max(best, float(lam @ y[list(S)]))
    return OUTSIDE_HULL if best == -np.inf else best


# ---------------------------------------------------------------- quadrature


@dataclass(eq=False)
class QuadratureOracle:
    """Trapezoidal rule on a regular grid over the bounding box.

    The integrand exp(h_y) is zero outside the hull. The reported error is
    the sum over grid cells of cell volume times the spread of the integrand
    across the cell corners, which bounds the trapezoid error whenever the
    integrand's extremes on a cell sit at its corners.
    """

    ds: Dataset
    resolution: int
    lo: np.ndarray = field(init=False)
    hi: np.ndarray = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        d = self.ds.d
        if d > QUAD_MAX_D:
            raise SizeCap(f"quadrature is limited to d <= {QUAD_MAX_D}")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        self.lo, self.hi = (np.asarray(v, dtype=float) for v in self.ds.bbox)
        axes = [np.linspace(self.lo[j], self.hi[j], self.resolution) for j in range(d)]
        w1 = []
        for a in axes:
            h = a[1] - a[0] if a.size > 1 else 0.0
            w = np.full(a.size, h)
            w[0] = w[-1] = h / 2.0
            w1.append(w)
        grids = np.meshgrid(*axes, indexing="ij")
        self.nodes = np.stack([g.ravel() for g in grids], axis=1)
        W = w1[0]
        for w in w1[1:]:
            W = np.multiply.outer(W, w)
        self.weights = W.ravel()
        self._shape = (self.resolution,) * d
        self._cell = float(np.prod([(a[-1] - a[0]) / (a.size - 1) for a in axes]))

    def log_values(self, y) -> np.ndarray:
        # local import keeps the brute-force half of this module LP-free
        from .geometry import tent_values

        y = np.asarray(y, dtype=float)
        key = y.tobytes()
        if key not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = tent_values(self.ds, y, self.nodes)[0]
        return self._cache[key]

    def integrate_values(self, f) -> tuple[float, float]:
        """Trapezoid integral of node values ``f`` and its error estimate."""
        f = np.asarray(f, dtype=float)
        value = float(self.weights @ f)
        F = f.reshape(self._shape)
        d = F.ndim
        cmax = cmin = None
        for off in itertools.product((0, 1), repeat=d):
            sl = tuple(slice(o, o + self.resolution - 1) for o in off)
            c = F[sl]
            cmax = c if cmax is None else np.maximum(cmax, c)
            cmin = c if cmin is None else np.minimum(cmin, c)
        err = float(self._cell * np.sum(cmax - cmin))
        return value, err

    def integral(self, y) -> tuple[float, float]:
        """int exp(h_y) and its error estimate."""
        return self.integrate_values(np.exp(self.log_values(y)))

    def objective(self, y) -> tuple[float, float]:
        """F(y) = -mean(y) + ln int exp(h_y), with an error estimate."""
        I, err = self.integral(y)
        F = -float(np.mean(y)) + math.log(I)
        err_F = math.inf if err >= I else -math.log1p(-err / I)
        return F, err_F


def oracle_objective(ds: Dataset, y, resolution: int, tol: float | None = None) -> float:
    """F(y) by grid quadrature; raises ResolutionTooCoarse if its error estimate exceeds ``tol``."""
    F, err = QuadratureOracle(ds, resolution).objective(y)
    if tol is not None and err > tol:
        raise ResolutionTooCoarse(f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}")
    return F


# ---------------------------------------------------------------- Hellinger


@dataclass(frozen=True)
class HellingerEstimate:
    value: float
    mc_samples: int
    std_error: float


@dataclass(frozen=True)
class ClosedFormDensity:
    """A density with a vectorised ``pdf`` and an exact sampler ``draw(rng, k)``."""

    pdf: Callable[[np.ndarray], np.ndarray]
    draw: Callable[[np.random.Generator, int], np.ndarray]


def oracle_hellinger(f_model, g_closed_form: ClosedFormDensity, mc_samples: int, seed: int) -> HellingerEstimate:
    """Squared Hellinger distance 1 - int sqrt(f g), sampling from g.

    ``f_model`` is either a callable returning densities for the rows of its
    argument or anything with a ``density`` method (a fitted model).
    """
    if mc_samples < 2:
        raise ValueError("need at least two Monte Carlo samples")
    f = f_model.density if hasattr(f_model, "density") else f_model
    rng = np.random.default_rng(seed)
    X = np.asarray(g_closed_form.draw(rng, mc_samples), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    fx = np.asarray(f(X), dtype=float).reshape(-1)
    gx = np.asarray(g_closed_form.pdf(X), dtype=float).reshape(-1)
    ratio = np.sqrt(np.where(gx > 0, fx / np.where(gx > 0, gx, 1.0), 0.0))
    bc = float(ratio.mean())
    se = float(ratio.std(ddof=1) / math.sqrt(mc_samples))
    return HellingerEstimate(value=min(1.0, max(0.0, 1.0 - bc)), mc_samples=mc_samples, std_error=se)


__all__ = [
    "oracle_tent_bruteforce",
    "QuadratureOracle",
    "oracle_objective",
    "HellingerEstimate",
    "ClosedFormDensity",
    "oracle_hellinger",
]
