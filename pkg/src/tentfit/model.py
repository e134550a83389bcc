"""The fitted density: evaluation, sampling, scoring and the model file."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .body import WalkConfig
from .errors import ModelSchemaMismatch
from .geometry import AffineReduction, Dataset
from .sampler import build_sampler, sample_density
from .tent import TentFunction

SCHEMA_VERSION = "tentfit-model/1"
# A point farther than this (relative to the data scale) from the affine hull
# of degenerate data is treated as off the support.
REDUCTION_TOL = 1e-9


class Score(enum.Enum):
    NEGATIVE_INFINITY = "NEGATIVE_INFINITY"

    def __repr__(self) -> str:
        return self.value

    def __str__(self) -> str:
        return self.value


NEGATIVE_INFINITY = Score.NEGATIVE_INFINITY


@dataclass(frozen=True, eq=False)
class FittedModel:
    ds: Dataset
    y_tilde: np.ndarray
    log_gamma: float
    reduction: AffineReduction | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.array(self.y_tilde, dtype=float).reshape(-1)
        y.setflags(write=False)
        object.__setattr__(self, "y_tilde", y)

    @property
    def tent(self) -> TentFunction:
        return TentFunction(self.ds, self.y_tilde)

    @property
    def d(self) -> int:
        """Dimension of the input space (before any reduction)."""
        return self.reduction.origin.size if self.reduction is not None else self.ds.d

    def _to_model_space(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"points have {X.shape[1]} coordinates, expected {self.d}")
        if not np.all(np.isfinite(X)):
            raise ValueError("points must be finite")
        if self.reduction is None:
            return X, np.ones(X.shape[0], dtype=bool)
        scale = max(1.0, float(np.max(np.abs(self.ds.points))))
        on_hull = self.reduction.residual(X) <= REDUCTION_TOL * scale
        return self.reduction.forward(X), on_hull

    def log_density(self, X) -> np.ndarray:
        """ln density at each row of X; -inf off the support."""
        Z, on_hull = self._to_model_space(X)
        vals = self.tent.values(Z)
        return np.where(on_hull, vals, -np.inf)

    def density(self, X) -> np.ndarray:
        return np.exp(self.log_density(X))


def eval_density(m: FittedModel, x) -> float:
    return float(m.density(np.asarray(x, dtype=float).reshape(1, -1))[0])


def sample_model(m: FittedModel, count: int, delta: float, seed: int, tau: float = 0.05, walk: WalkConfig | None = None) -> np.ndarray:
    """``count`` draws from the fitted density, within delta of it in TV.

    The level-set sampler's L1 error is 12 times its internal delta, so it is
    built with delta / 6.
    """
    if not 0.0 < delta < 1.0 / 16.0:
        raise ValueError("delta must lie in (0, 1/16)")
    s = build_sampler(m.tent, delta / 6.0, tau, seed=seed, walk=walk or WalkConfig(chains=256))
    Z = sample_density(s, count)
    if m.reduction is None:
        return Z
    return m.reduction.origin + Z @ m.reduction.basis.T


def pointwise_log_density(m: FittedModel, data) -> list:
    pts = data.points if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    vals = m.log_density(pts)
    return [float(v) if np.isfinite(v) else NEGATIVE_INFINITY for v in vals]


def log_likelihood(m: FittedModel, data) -> float | Score:
    """Sum of ln density over the points, or NEGATIVE_INFINITY if any is off the support."""
    vals = pointwise_log_density(m, data)
    if any(v is NEGATIVE_INFINITY for v in vals):
        return NEGATIVE_INFINITY
    return math.fsum(vals)


# ---------------------------------------------------------------- model file


def model_to_dict(m: FittedModel) -> dict:
    red = None
    if m.reduction is not None:
        red = {"basis": m.reduction.basis.tolist(), "origin": m.reduction.origin.tolist()}
    return {
        "schema_version": SCHEMA_VERSION,
        "n": m.ds.n,
        "d": m.ds.d,
        "points": m.ds.points.tolist(),
        "y_tilde": m.y_tilde.tolist(),
        "log_gamma": float(m.log_gamma),
        "reduction": red,
        "meta": m.meta,
    }


def model_from_dict(rec: dict) -> FittedModel:
    if not isinstance(rec, dict) or rec.get("schema_version") != SCHEMA_VERSION:
        found = rec.get("schema_version") if isinstance(rec, dict) else None
        raise ModelSchemaMismatch(f"expected schema {SCHEMA_VERSION!r}, found {found!r}")
    try:
        pts = np.array(rec["points"], dtype=float).reshape(int(rec["n"]), int(rec["d"]))
        y = np.array(rec["y_tilde"], dtype=float)
        red = rec["reduction"]
        reduction = None
        if red is not None:
            reduction = AffineReduction(
                basis=np.array(red["basis"], dtype=float).reshape(-1, int(rec["d"])),
                origin=np.array(red["origin"], dtype=float),
            )
        return FittedModel(
            ds=Dataset.from_points(pts),
            y_tilde=y,
            log_gamma=float(rec["log_gamma"]),
            reduction=reduction,
            meta=dict(rec.get("meta") or {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelSchemaMismatch(f"malformed model record: {exc}") from exc


def dumps_model(m: FittedModel) -> str:
    # json writes floats with repr, i.e. the shortest string that round-trips.
    return json.dumps(model_to_dict(m), indent=1, allow_nan=False) + "\n"


def save_model(m: FittedModel, path) -> None:
    Path(path).write_text(dumps_model(m))


def load_model(path) -> FittedModel:
    try:
        rec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelSchemaMismatch(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(rec)


__all__ = [
    "FittedModel",
    "Score",
    "NEGATIVE_INFINITY",
    "SCHEMA_VERSION",
    "eval_density",
    "sample_model",
    "pointwise_log_density",
    "log_likelihood",
    "model_to_dict",
    "model_from_dict",
    "dumps_model",
    "save_model",
    "load_model",
]
