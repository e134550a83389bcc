import itertools

import numpy as np
import pytest

from tentfit.errors import InfeasibleLP, UnboundedLP
from tentfit.lp import INFEASIBLE, OPTIMAL, solve_lp, solve_standard


def test_single_bound():
    sol = solve_lp([1.0], [[1.0]], ["<="], [3.0], bounds=[(None, None)], maximize=True)
    assert sol.value == pytest.approx(3.0, abs=1e-12)


def test_two_point_interpolation():
    # max a.(0,-1) over the simplex with 0*a1 + 1*a2 = 0.5
    sol = solve_lp([0.0, -1.0], [[0.0, 1.0], [1.0, 1.0]], ["=", "="], [0.5, 1.0], maximize=True)
    assert sol.value == pytest.approx(-0.5, abs=1e-12)
    assert np.allclose(sol.x, [0.5, 0.5])


A3 = [[1, 1, 2], [2, 0, 1], [1, 3, 1], [1, 1, 1]]
S3 = ["<=", "<=", "<=", ">="]
B3 = [4, 5, 6, 1]
C3 = [3, 2, 4]


def _vertex_enumeration(A, senses, b, c):
    # all constraints as G x <= h, including x >= 0
    G, h = [], []
    for row, s, v in zip(A, senses, b):
        sign = 1.0 if s == "<=" else -1.0
        G.append(sign * np.asarray(row, float))
        h.append(sign * v)
    n = len(c)
    G += list(-np.eye(n))
    h += [0.0] * n
    G, h = np.array(G), np.array(h)
    best = -np.inf
    for S in itertools.combinations(range(len(h)), n):
        M = G[list(S)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(S)])
        if np.all(G @ x <= h + 1e-12):
            best = max(best, float(np.dot(c, x)))
    return best


def test_three_variable_instance_matches_vertex_enumeration():
    # frozen from the enumeration oracle: 83/8
    assert _vertex_enumeration(A3, S3, B3, C3) == pytest.approx(10.375, abs=1e-12)
    sol = solve_lp(C3, A3, S3, B3, maximize=True)
    assert sol.value == pytest.approx(10.375, abs=1e-9)
    assert np.all(np.array(A3[:3]) @ sol.x <= np.array(B3[:3]) + 1e-9)


def test_random_instances_match_enumeration(rng):
    for _ in range(50):
        A = rng.uniform(0.1, 2.0, size=(4, 3))
        b = rng.uniform(1.0, 5.0, size=4)
        c = rng.normal(size=3)
        sol = solve_lp(c, A, ["<="] * 4, b, maximize=True)
        assert sol.value == pytest.approx(_vertex_enumeration(A, ["<="] * 4, b, c), abs=1e-9)


def test_minimize_and_bounds():
    # min x + y with x in [1, 2], y in [-3, 5], x + y >= -1
    sol = solve_lp([1, 1], [[1, 1]], [">="], [-1], bounds=[(1, 2), (-3, 5)])
    assert sol.value == pytest.approx(-1.0)
    assert 1 - 1e-9 <= sol.x[0] <= 2 + 1e-9


def test_infeasible_and_unbounded():
    with pytest.raises(InfeasibleLP):
        solve_lp([1.0], [[1.0], [1.0]], ["<=", ">="], [1.0, 2.0])
    with pytest.raises(UnboundedLP):
        solve_lp([1.0], [[1.0]], [">="], [0.0], maximize=True)


def test_size_cap_and_bad_input():
    with pytest.raises(ValueError):
        solve_lp([1.0, 1.0], [[1.0, 1.0]], ["<="], [1.0], max_size=1)
    with pytest.raises(ValueError):
        solve_lp([np.nan], [[1.0]], ["<="], [1.0])
    with pytest.raises(ValueError):
        solve_lp([1.0], [[1.0]], ["<"], [1.0])


def test_deterministic():
    a = solve_lp(C3, A3, S3, B3, maximize=True)
    b = solve_lp(C3, A3, S3, B3, maximize=True)
    assert np.array_equal(a.x, b.x)


def test_farkas_certificate():
    A = np.array([[1.0, 1.0]])
    b = np.array([-1.0])  # x1 + x2 = -1 has no nonnegative solution
    st, _, _, w = solve_standard(A, b, np.zeros(2))
    assert st == INFEASIBLE
    assert np.all(A.T @ w >= -1e-12) and b @ w < 0


def test_degenerate_problem_terminates():
    # classic cycling example for the largest-coefficient rule (Beale)
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    sol = solve_lp(c, A, ["<="] * 3, [0, 0, 1], maximize=True)
    assert sol.value == pytest.approx(0.05, abs=1e-9)
    st, *_ = solve_standard(np.eye(2), np.ones(2), np.ones(2))
    assert st == OPTIMAL
