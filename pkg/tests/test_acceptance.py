"""End-to-end acceptance checks. Each test records one PASS/FAIL line that
is printed in the terminal summary (see conftest)."""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from tentfit.body import WalkConfig, box_body, estimate_volume, simplex_body
from tentfit.geometry import OUTSIDE_HULL, Dataset, eval_tent
from tentfit.model import log_likelihood
from tentfit.optimizer import FitConfig, fit
from tentfit.oracles import ClosedFormDensity, QuadratureOracle, oracle_hellinger, oracle_tent_bruteforce
from tentfit.sampler import acceptance_ratio, build_sampler, draw_proposals, estimate_normalizer, sample_density
from tentfit.tent import TentFunction, box_log_radius, superlevel_oracle

from conftest import record

# every stochastic subgradient and iterate seen by the fits below
SEEN = {"max_norm": 0.0, "count": 0, "box_violations": 0}


def _watch(ds):
    B = box_log_radius(ds.n, ds.d)

    def cb(state, g):
        SEEN["max_norm"] = max(SEEN["max_norm"], float(np.linalg.norm(g)))
        SEEN["count"] += 1
        y = state.y_current
        SEEN["box_violations"] += int(np.any(y > 0.0) or np.any(y < -B))

    return cb


def _random_instance(rng):
    d = int(rng.integers(1, 4))
    n = int(rng.integers(d + 1, 13))
    pts = rng.normal(size=(n, d))
    y = rng.normal(size=n)
    W = rng.dirichlet(np.ones(n))
    x = W @ pts if rng.random() < 0.8 else rng.normal(scale=1.5, size=d)
    return Dataset.from_points(pts), y, x


def test_criterion_01_tent_oracle_equivalence():
    rng = np.random.default_rng(1)
    t0 = time.time()
    worst, mismatched = 0.0, 0
    for _ in range(1000):
        ds, y, x = _random_instance(rng)
        a = eval_tent(ds, y, x)
        b = oracle_tent_bruteforce(ds, y, x)
        if (a is OUTSIDE_HULL) != (b is OUTSIDE_HULL):
            mismatched += 1
        elif a is not OUTSIDE_HULL:
            worst = max(worst, abs(a.value - b))
    elapsed = time.time() - t0
    ok = mismatched == 0 and worst <= 1e-8 and elapsed < 60
    record(1, ok, f"max |diff| {worst:.2e}, hull mismatches {mismatched}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_subgradient_inequality():
    rng = np.random.default_rng(2)
    t0 = time.time()
    worst = -np.inf
    for _ in range(1000):
        ds, y, x = _random_instance(rng)
        x = rng.dirichlet(np.ones(ds.n)) @ ds.points
        y2 = rng.normal(scale=2.0, size=ds.n)
        sol = eval_tent(ds, y, x)
        lhs = eval_tent(ds, y2, x).value
        worst = max(worst, sol.value + sol.weights @ (y2 - y) - lhs)
    elapsed = time.time() - t0
    ok = worst <= 1e-7 and elapsed < 60
    record(2, ok, f"max violation {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _convexity_lipschitz(ds, resolution, rng, pairs=100):
    q = QuadratureOracle(ds, resolution)
    conv = lip = 0
    for _ in range(pairs):
        y1 = rng.uniform(-3, 0, size=ds.n)
        y2 = rng.uniform(-3, 0, size=ds.n)
        (F1, e1), (F2, e2), (Fm, em) = q.objective(y1), q.objective(y2), q.objective(0.5 * (y1 + y2))
        if Fm > 0.5 * (F1 + F2) + em + 0.5 * (e1 + e2):
            conv += 1
        if abs(F1 - F2) > 2.0 * np.linalg.norm(y1 - y2) + e1 + e2:
            lip += 1
    return conv, lip


def test_criterion_04_convexity_and_lipschitz(two_point, triangle, unit_square):
    rng = np.random.default_rng(4)
    results = {
        "two-point": _convexity_lipschitz(two_point, 2001, rng),
        "triangle": _convexity_lipschitz(triangle, 101, rng),
        "square": _convexity_lipschitz(unit_square, 101, rng),
    }
    bad = sum(c + l for c, l in results.values())
    record(4, bad == 0, "violations (convexity, Lipschitz): " + ", ".join(f"{k} {v}" for k, v in results.items()))
    assert bad == 0


def test_criterion_05_volume():
    hits = {}
    t0 = time.time()
    for name, body, exact in (("cube", box_body(np.zeros(3), np.ones(3)), 1.0), ("simplex", simplex_body(3), 1 / 6)):
        good = 0
        for seed in range(40):
            est = estimate_volume(body, 0.05, 0.05, WalkConfig(rng_seed=seed))
            good += abs(est.value / exact - 1.0) <= 0.05
        hits[name] = good
    elapsed = time.time() - t0
    ok = all(v >= 38 for v in hits.values()) and elapsed < 600
    record(5, ok, f"within 5%: cube {hits['cube']}/40, simplex {hits['simplex']}/40, {elapsed:.0f}s")
    assert ok


def test_criterion_06_sampler_law(two_point, unit_square):
    s = build_sampler(TentFunction(two_point, [0.0, -1.0]), 0.01, 0.05, seed=1)
    X = sample_density(s, 100_000, seed=2).ravel()
    ks = stats.kstest(X, lambda x: (1 - np.exp(-x)) / (1 - np.exp(-1))).statistic
    _, _, h, lg = draw_proposals(s, 100_000, seed=3)
    acc = float(acceptance_ratio(h, lg).mean())
    flat = build_sampler(TentFunction(unit_square, np.zeros(4)), 0.01, 0.05, seed=4)
    means = sample_density(flat, 100_000, seed=5).mean(axis=0)
    ok = ks <= 0.01 and np.all(np.abs(means - 0.5) <= 0.01) and acc >= 0.48
    record(6, ok, f"KS {ks:.4f}, flat means {np.round(means, 4).tolist()}, acceptance {acc:.3f}")
    assert ok


def test_criterion_07_normalizer(two_point, unit_square):
    delta = 0.01
    cases = {
        "square": (TentFunction(unit_square, np.zeros(4)), 1.0),
        "ramp": (TentFunction(two_point, [0.0, -1.0]), 1 - math.exp(-1)),
    }
    hits = {}
    for name, (t, exact) in cases.items():
        good = 0
        for seed in range(40):
            s = build_sampler(t, delta, 0.05, seed=100 + seed)
            est = estimate_normalizer(s, delta, 0.05, seed=200 + seed)
            good += abs(est.gamma / exact - 1.0) <= 8 * delta
        hits[name] = good
    ok = all(v >= 38 for v in hits.values())
    record(7, ok, f"within 8 delta: square {hits['square']}/40, 1-d {hits['ramp']}/40")
    assert ok


@pytest.fixture(scope="module")
def two_point_fit(two_point):
    # K and the per-iteration sampler delta are desk-scale overrides; see README
    cfg = FitConfig(epsilon=0.05, seed=1, max_iters_override=1000, sampler_delta=0.06)
    return fit(two_point, cfg, on_iteration=_watch(two_point))


@pytest.fixture(scope="module")
def triangle_fit(triangle):
    cfg = FitConfig(epsilon=0.1, seed=1, max_iters_override=200, sampler_delta=0.06)
    return fit(triangle, cfg, on_iteration=_watch(triangle))


def test_criterion_08_two_point_fit(two_point_fit):
    xs = np.linspace(0, 1, 20001)
    tv = 0.5 * np.trapezoid(np.abs(two_point_fit.density(xs[:, None]) - 1.0), xs)
    record(8, tv <= 0.05, f"TV to Uniform[0,1] {tv:.4f} (K={two_point_fit.meta['K']})")
    assert tv <= 0.05


def test_criterion_09_triangle_fit(triangle_fit, triangle):
    ll = log_likelihood(triangle_fit, triangle)
    target = 3 * math.log(2) - 0.1
    record(9, ll >= target, f"log-likelihood {ll:.4f} vs {target:.4f} (K={triangle_fit.meta['K']})")
    assert ll >= target


def test_criterion_10_superlevel_volume(two_point_fit, triangle_fit):
    worst = 0.0
    for m in (two_point_fit, triangle_fit):
        t = m.tent
        for w in (1, 2, 4):
            body = superlevel_oracle(t, log_level=t.log_M - w)
            vol = estimate_volume(body, 0.02, 0.05, WalkConfig(rng_seed=w)).value
            worst = max(worst, vol / (w**m.d / t.M))
    record(10, worst <= 1.15, f"max vol / (w^d / M) = {worst:.3f}")
    assert worst <= 1.15


def _truncated_gaussian():
    a, b = -3.0, 3.0

    def pdf(X):
        return np.prod(stats.truncnorm.pdf(X, a, b), axis=1)

    def draw(rng, k):
        return stats.truncnorm.rvs(a, b, size=(k, 2), random_state=rng)

    return ClosedFormDensity(pdf=pdf, draw=draw)


@pytest.fixture(scope="module")
def gaussian_fit():
    truth = _truncated_gaussian()
    ds = Dataset.from_points(truth.draw(np.random.default_rng(7), 200))
    # the theoretical step (diam(C) ~ 7.6e4 here) would empty the box in one move
    cfg = FitConfig(
        epsilon=0.5, seed=3, max_iters_override=10, step_size_override=5.0, sampler_delta=0.06, normalizer_delta=0.06
    )
    return fit(ds, cfg, on_iteration=_watch(ds)), truth


def test_criterion_11_gaussian_smoke(gaussian_fit):
    model, truth = gaussian_fit
    est = oracle_hellinger(model, truth, 20000, seed=1)
    ok = est.value <= 0.25
    record(11, ok, f"squared Hellinger {est.value:.4f} +- {est.std_error:.4f} (n=200, K={model.meta['K']})")
    assert ok


def test_criterion_03_norm_bounds(two_point_fit, triangle_fit, gaussian_fit):
    ok = SEEN["count"] > 0 and SEEN["max_norm"] <= 2.0 and SEEN["box_violations"] == 0
    record(3, ok, f"{SEEN['count']} steps, max |g| {SEEN['max_norm']:.3f}, box violations {SEEN['box_violations']}")
    assert ok


def test_criterion_12_cli_determinism(tmp_path):
    (tmp_path / "tri.csv").write_text("0,0\n1,0\n0,1\n")
    exe = shutil.which("tentfit")
    base = [exe] if exe else [sys.executable, "-m", "tentfit.cli"]
    outs = []
    for name in ("a.json", "b.json"):
        args = ["fit", "--input", "tri.csv", "--epsilon", "0.1", "--seed", "42", "--max-iters", "20",
                "--sampler-delta", "0.06", "--normalizer-delta", "0.05", "--output", name]
        subprocess.run(base + args, cwd=tmp_path, check=True, capture_output=True)
        outs.append((tmp_path / name).read_bytes())
    ok = outs[0] == outs[1]
    record(12, ok, f"model files identical: {ok} ({len(outs[0])} bytes)")
    assert ok
