import math

import numpy as np
import pytest

from tentfit.errors import DegenerateHull
from tentfit.geometry import Dataset
from tentfit.optimizer import (
    FitConfig,
    FitState,
    fit,
    load_checkpoint,
    objective_estimate,
    project_C,
    run_iterations,
    save_checkpoint,
    stochastic_subgradient,
    theoretical_iterations,
)
from tentfit.oracles import QuadratureOracle
from tentfit.sampler import build_sampler, sample_density
from tentfit.tent import TentFunction, box_log_radius


def test_project_C():
    assert np.array_equal(project_C([1.0, -0.5, -100.0], 10.0), [0.0, -0.5, -10.0])
    with pytest.raises(ValueError):
        project_C([np.nan], 1.0)


def test_theoretical_constants(two_point):
    B = box_log_radius(2, 1)
    state = FitState.initial(two_point, FitConfig(epsilon=0.05))
    assert state.B == pytest.approx(4 * math.log(4))
    assert state.diam == pytest.approx(math.sqrt(2) * B)
    assert state.K == theoretical_iterations(2, 1, 0.05, 0.05)
    assert state.step == pytest.approx(state.diam / (2 * math.sqrt(state.K)))
    assert state.delta == pytest.approx(0.05 / (2 * state.diam))


def test_config_validation_and_roundtrip():
    cfg = FitConfig(epsilon=0.1, max_iters_override=3)
    assert FitConfig.from_dict(cfg.to_dict()) == cfg
    for bad in (dict(epsilon=0.0), dict(epsilon=0.1, tau=1.0), dict(epsilon=0.1, step_rule="adagrad")):
        with pytest.raises(ValueError):
            FitConfig(**bad)


def test_subgradient_two_point(two_point):
    t = TentFunction(two_point, [0.0, 0.0])
    s = build_sampler(t, 0.05, 0.05, seed=1)
    g = stochastic_subgradient(t, s, seed=2)
    # a(X) = (1 - X, X), so g = (1/2 - X, X - 1/2)
    assert g.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(g) <= math.sqrt(0.5) + 1e-12


def test_mean_subgradient_matches_finite_difference(triangle):
    y = np.array([0.0, -1.0, -0.5])
    t = TentFunction(triangle, y)
    X = sample_density(build_sampler(t, 0.05, 0.05, seed=3), 20000, seed=4)
    g_mean = t.values_and_weights(X)[1].mean(axis=0) - 1.0 / 3.0
    q = QuadratureOracle(triangle, 401)
    h = 1e-4
    fd = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd.append((q.objective(y + e)[0] - q.objective(y - e)[0]) / (2 * h))
    assert np.allclose(g_mean, fd, atol=0.01)


def test_objective_estimate_ramp(two_point):
    # F(0, -1) = 1/2 + ln(1 - 1/e)
    t = TentFunction(two_point, [0.0, -1.0])
    s = build_sampler(t, 0.01, 0.05, seed=5)
    F = objective_estimate(t, s, seed=6)
    assert F == pytest.approx(0.5 + math.log(1 - math.exp(-1)), abs=math.log(1.08))


def test_objective_shift_invariance(triangle, rng):
    q = QuadratureOracle(triangle, 201)
    y = rng.uniform(-2, 0, size=3)
    assert q.objective(y)[0] == pytest.approx(q.objective(y - 1.3)[0], abs=1e-9)


def _cfg(**kw):
    base = dict(epsilon=0.1, seed=7, max_iters_override=10, sampler_delta=0.06, normalizer_delta=0.05, checkpoint_every=5)
    base.update(kw)
    return FitConfig(**base)


def test_fit_small(two_point):
    norms = []
    m = fit(two_point, _cfg(), on_iteration=lambda st, g: norms.append(np.linalg.norm(g)))
    assert len(norms) == 10 and max(norms) <= 2.0
    assert m.meta["K"] == 10
    assert np.all(np.isfinite(m.y_tilde))


def test_fit_deterministic(two_point):
    a = fit(two_point, _cfg())
    b = fit(two_point, _cfg())
    assert np.array_equal(a.y_tilde, b.y_tilde) and a.log_gamma == b.log_gamma


def test_checkpoint_resume_matches_uninterrupted(two_point, tmp_path):
    cfg = _cfg()
    full = fit(two_point, cfg)
    ck = tmp_path / "run.ckpt"
    state = run_iterations(two_point, cfg, FitState.initial(two_point, cfg), stop_at=4)
    save_checkpoint(ck, two_point, cfg, state)
    assert load_checkpoint(ck, two_point, cfg).iter == 4
    resumed = fit(two_point, cfg, checkpoint_path=ck, resume=True)
    assert np.array_equal(full.y_tilde, resumed.y_tilde)
    with pytest.raises(ValueError):
        load_checkpoint(ck, two_point, _cfg(seed=8))
    with pytest.raises(ValueError):
        load_checkpoint(ck, Dataset.from_points([[0.0], [2.0]]), cfg)


def test_degenerate_input():
    line = Dataset.from_points([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(DegenerateHull):
        fit(line, _cfg())
    m = fit(line, _cfg(), reduce_degenerate=True)
    assert m.d == 2 and m.ds.d == 1
    assert m.density([[0.5, 0.5]])[0] > 0
    assert m.density([[0.5, 0.6]])[0] == 0.0
