"""Tent functions: a dataset together with heights ``y`` at its points.

h_y is the least concave function on the hull that sits above every
(x_i, y_i); H_y = exp(h_y). Its superlevel sets are the convex bodies the
sampler walks on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .body import ConvexBodyOracle
from .errors import OutsideHull, RTooSmall
from .geometry import (
    MEMBER_TOL,
    OUTSIDE_HULL,
    Dataset,
    PackingSolution,
    Verdict,
    eval_tent,
    level_chords,
    level_chord_params,
    native_level_chord,
    separate_superlevel,
    tent_values,
)

LN2 = math.log(2.0)


def box_log_radius(n: int, d: int) -> float:
    """B = 2nd ln(2nd), the side of the parameter box [-B, 0]^n."""
    k = 2 * n * d
    return k * math.log(k)


@dataclass(frozen=True, eq=False)
class TentFunction:
    ds: Dataset
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.size != self.ds.n:
            raise ValueError(f"y has {y.size} entries, expected {self.ds.n}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def y_max(self) -> float:
        return float(self.y.max())

    @property
    def y_min(self) -> float:
        return float(self.y.min())

    @property
    def log_M(self) -> float:
        """ln M where M = max H_y, attained at a data point."""
        return self.y_max

    @property
    def M(self) -> float:
        return math.exp(self.y_max)

    @property
    def argmax_point(self) -> np.ndarray:
        return self.ds.points[int(np.argmax(self.y))]

    def shifted(self, c: float) -> "TentFunction":
        return TentFunction(self.ds, self.y + c)

    def values(self, X) -> np.ndarray:
        """h_y at each row of X (-inf outside the hull)."""
        return tent_values(self.ds, self.y, X)[0]

    def values_and_weights(self, X):
        return tent_values(self.ds, self.y, X)


def tent_value(t: TentFunction, x) -> float | Verdict:
    sol = eval_tent(t.ds, t.y, x)
    return sol if sol is OUTSIDE_HULL else sol.value


def tent_subgradient(t: TentFunction, x) -> np.ndarray:
    """An optimal packing weight vector, which is a subgradient of h_y(x) in y."""
    sol = eval_tent(t.ds, t.y, x)
    if sol is OUTSIDE_HULL:
        raise OutsideHull("subgradient requested outside the convex hull")
    assert isinstance(sol, PackingSolution)
    return sol.weights


def log_envelope(t: TentFunction, h):
    """ln G_y, where G_y = M 2^-floor(log2(M / H_y)) so that G/2 <= H <= G."""
    h = np.asarray(h, dtype=float)
    drop = np.maximum(t.log_M - h, 0.0)
    return t.log_M - LN2 * np.floor(drop / LN2)


# ---------------------------------------------------------------- ladder


@dataclass(frozen=True)
class LevelLadder:
    m: int
    log_M: float

    @property
    def log_levels(self) -> np.ndarray:
        return self.log_M - LN2 * np.arange(1, self.m + 1)

    @property
    def levels(self) -> np.ndarray:
        return np.exp(self.log_levels)


def build_ladder(t: TentFunction, R: float | None = None, *, log_R: float | None = None) -> LevelLadder:
    """Levels M 2^-i, i = 1..m, deep enough that the last one covers the hull.

    m = ceil(1 + log2 R) would be enormous for the theoretical R, so the depth
    is capped by the actual range of y: below exp(y_min) the superlevel sets
    stop growing and further levels add nothing.
    """
    if log_R is None:
        if R is None:
            raise ValueError("give R or log_R")
        if not R > 1.0:
            raise ValueError("R must exceed 1")
        log_R = math.log(R)
    spread = t.y_max - t.y_min
    if log_R < spread - 1e-12:
        raise RTooSmall(f"ln R = {log_R:.6g} is below the tent's range {spread:.6g}")
    effective = min(log_R, spread, box_log_radius(t.ds.n, t.ds.d))
    # the -1e-9 keeps exact powers of two from gaining a spurious level
    m = max(1, math.ceil(1.0 + effective / LN2 - 1e-9))
    return LevelLadder(m=m, log_M=t.log_M)


# ---------------------------------------------------------------- superlevel bodies


def level_vertices(t: TentFunction, log_level: float) -> np.ndarray:
    """Points whose hull is {h_y >= log_level}.

    The set is the image of {a in simplex : a.y >= c}, whose vertices are the
    unit vectors e_j with y_j >= c and the crossing points on edges (j, k)
    with y_j >= c > y_k.
    """
    X, y = t.ds.points, t.y
    up = y >= log_level
    hi_pts, hi_y = X[up], y[up]
    lo_pts, lo_y = X[~up], y[~up]
    if lo_pts.shape[0] == 0:
        return hi_pts
    lam = (log_level - lo_y[None, :]) / (hi_y[:, None] - lo_y[None, :])
    edge = lam[:, :, None] * hi_pts[:, None, :] + (1.0 - lam[:, :, None]) * lo_pts[None, :, :]
    return np.concatenate([hi_pts, edge.reshape(-1, X.shape[1])])


def superlevel_oracle(t: TentFunction, level: float | None = None, *, log_level: float | None = None) -> ConvexBodyOracle:
    """The convex body L = {x : H_y(x) >= level} with exact LP chords.

    The interior point is the mean of the vertex candidates and the box is
    their bounding box, which is tight; levels at or below exp(y_min) give
    the hull itself.
    """
    if log_level is None:
        if level is None or not level > 0.0:
            raise ValueError("level must be positive")
        log_level = math.log(level)
    if log_level > t.log_M + 1e-12:
        raise ValueError("level exceeds the maximum of H_y")
    ds, y = t.ds, t.y
    whole_hull = log_level <= t.y_min
    V = ds.points if whole_hull else level_vertices(t, log_level)
    interior = V.mean(axis=0)
    bbox = (V.min(axis=0), V.max(axis=0))
    chord_level = None if whole_hull else log_level
    level_value = math.exp(log_level)

    def membership(x) -> bool:
        v = tent_values(ds, y, np.atleast_2d(np.asarray(x, dtype=float)))[0][0]
        return bool(v >= log_level - MEMBER_TOL)

    def separation(x):
        return separate_superlevel(ds, y, x, level_value)

    def chords(X, U):
        lo, hi, _ = level_chords(ds, y, chord_level, X, U)
        return lo, hi

    return ConvexBodyOracle(
        membership=membership,
        interior_point=interior,
        bbox=bbox,
        separation=separation,
        chords=chords,
        native_chord=native_level_chord,
        native_params=level_chord_params(ds, y, chord_level),
    )


__all__ = [
    "TentFunction",
    "LevelLadder",
    "box_log_radius",
    "tent_value",
    "tent_subgradient",
    "log_envelope",
    "build_ladder",
    "level_vertices",
    "superlevel_oracle",
]
