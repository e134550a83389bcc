"""Dense two-phase simplex with Bland's anti-cycling rule.

The instances tentfit needs are tiny (a handful of rows, at most a few
dozen columns) but are solved millions of times inside the MCMC walks, so
the tableau kernels are compiled with numba. :func:`solve_lp` is the general
entry point; :mod:`tentfit.geometry` calls the kernels directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .errors import InfeasibleLP, NumericalFailure, UnboundedLP

OPTIMAL, INFEASIBLE, UNBOUNDED, STALLED = 0, 1, 2, 3

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIV_TOL = 1e-11
MAX_SIZE = 10_000


@njit(cache=True)
def _pivot(T, r, c):
    nrow, ncol = T.shape
    piv = T[r, c]
    for j in range(ncol):
        T[r, j] /= piv
    T[r, c] = 1.0
    for i in range(nrow):
        if i != r:
            f = T[i, c]
            if f != 0.0:
                for j in range(ncol):
                    T[i, j] -= f * T[r, j]
                T[i, c] = 0.0


@njit(cache=True)
def _bland(T, basis, nallowed, opt_tol, max_iter):
    # Maximisation; row m holds z_j = c_B B^-1 A_j - c_j, optimal when all >= 0.
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(nallowed):
            if T[m, j] < -opt_tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = np.inf
        for i in range(m):
            a = T[i, enter]
            if a > PIV_TOL:
                r = max(T[i, rhs], 0.0) / a
                tie = 1e-12 * (1.0 + abs(best)) if leave >= 0 else 0.0
                if leave < 0 or r < best - tie:
                    leave = i
                    best = r
                elif r <= best + tie and basis[i] < basis[leave]:
                    leave = i
                    best = min(best, r)
        if leave < 0:
            return UNBOUNDED
        _pivot(T, leave, enter)
        basis[leave] = enter
    return STALLED


@njit(cache=True)
def _init_tableau(A, b):
    m, k = A.shape
    T = np.zeros((m + 1, k + m + 1))
    sign = np.ones(m)
    for i in range(m):
        s = 1.0 if b[i] >= 0.0 else -1.0
        sign[i] = s
        for j in range(k):
            T[i, j] = s * A[i, j]
        T[i, k + i] = 1.0
        T[i, k + m] = s * b[i]
    basis = np.arange(k, k + m)
    return T, basis, sign


@njit(cache=True)
def _phase1(T, basis, k, max_iter):
    m = T.shape[0] - 1
    ncol = T.shape[1]
    rhs = ncol - 1
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(T[i, rhs]))
    for j in range(ncol):
        T[m, j] = 0.0
    for j in range(k):
        s = 0.0
        for i in range(m):
            s += T[i, j]
        T[m, j] = -s
    s = 0.0
    for i in range(m):
        s += T[i, rhs]
    T[m, rhs] = -s
    status = _bland(T, basis, k, OPT_TOL, max_iter)
    if status != OPTIMAL:
        return status
    if T[m, rhs] < -FEAS_TOL * scale:
        return INFEASIBLE
    for i in range(m):
        if basis[i] >= k:
            best = -1
            bv = PIV_TOL
            for j in range(k):
                if abs(T[i, j]) > bv:
                    bv = abs(T[i, j])
                    best = j
            if best >= 0:
                _pivot(T, i, best)
                basis[i] = best
    return OPTIMAL


@njit(cache=True)
def _phase2(T, basis, c, k, max_iter):
    m = T.shape[0] - 1
    ncol = T.shape[1]
    for j in range(ncol):
        T[m, j] = 0.0
    for i in range(m):
        bi = basis[i]
        if bi < k:
            cb = c[bi]
            if cb != 0.0:
                for j in range(ncol):
                    T[m, j] += cb * T[i, j]
    cmax = 1.0
    for j in range(k):
        T[m, j] -= c[j]
        cmax = max(cmax, abs(c[j]))
    return _bland(T, basis, k, OPT_TOL * cmax, max_iter)


@njit(cache=True)
def _extract(T, basis, sign, k):
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    x = np.zeros(k)
    for i in range(m):
        if basis[i] < k:
            x[basis[i]] = T[i, rhs]
    duals = np.empty(m)
    for i in range(m):
        duals[i] = sign[i] * T[m, k + i]
    return x, T[m, rhs], duals


@njit(cache=True)
def solve_standard(A, b, c):
    """max c.x s.t. A x = b, x >= 0.  Returns (status, x, value, duals)."""
    m, k = A.shape
    max_iter = 50 * (m + k) + 100
    T, basis, sign = _init_tableau(A, b)
    status = _phase1(T, basis, k, max_iter)
    if status == INFEASIBLE:
        # Phase-one duals form a Farkas certificate: A^T w >= 0 and b.w < 0.
        cert = np.empty(m)
        for i in range(m):
            cert[i] = sign[i] * (T[m, k + i] - 1.0)
        return status, np.zeros(k), 0.0, cert
    if status != OPTIMAL:
        return status, np.zeros(k), 0.0, np.zeros(m)
    status = _phase2(T, basis, c, k, max_iter)
    x, value, duals = _extract(T, basis, sign, k)
    return status, x, value, duals


@njit(cache=True)
def feasible_standard(A, b):
    """Phase one only: is {A x = b, x >= 0} non-empty?"""
    m, k = A.shape
    T, basis, _ = _init_tableau(A, b)
    return _phase1(T, basis, k, 50 * (m + k) + 100)


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    value: float


def _raise_for(status: int) -> None:
    if status == INFEASIBLE:
        raise InfeasibleLP("linear program is infeasible")
    if status == UNBOUNDED:
        raise UnboundedLP("linear program is unbounded")
    if status == STALLED:
        raise NumericalFailure("simplex exceeded its pivot budget")


def solve_lp(
    c: Sequence[float],
    A: Sequence[Sequence[float]] | np.ndarray,
    senses: Sequence[str],
    b: Sequence[float],
    bounds: Sequence[tuple[float | None, float | None]] | None = None,
    maximize: bool = False,
    max_size: int = MAX_SIZE,
) -> LPSolution:
    """Optimise ``c.x`` subject to ``A[i].x (senses[i]) b[i]`` and variable bounds.

    ``senses`` entries are ``"<="``, ``">="`` or ``"="``. ``bounds`` defaults to
    ``(0, None)`` for every variable; ``None`` means unbounded on that side.
    Raises :class:`InfeasibleLP`, :class:`UnboundedLP` or
    :class:`NumericalFailure`.
    """
    c = np.asarray(c, dtype=float)
    nvar = c.size
    A = np.asarray(A, dtype=float).reshape(-1, nvar)
    b = np.asarray(b, dtype=float)
    if len(senses) != A.shape[0] or b.size != A.shape[0]:
        raise ValueError("A, senses and b must have matching row counts")
    if nvar > max_size or A.shape[0] > max_size:
        raise ValueError(f"problem exceeds the size cap of {max_size}")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("coefficients must be finite")
    if bounds is None:
        bounds = [(0.0, None)] * nvar
    if len(bounds) != nvar:
        raise ValueError("one bound pair per variable")

    # Column map: original variable j = offset_j + sum(coef * std column).
    cols: list[list[tuple[int, float]]] = []
    offset = np.zeros(nvar)
    extra_rows: list[tuple[int, float]] = []  # (std column, upper bound)
    nstd = 0
    for j, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi:
            raise InfeasibleLP(f"variable {j} has empty bounds")
        if np.isfinite(lo):
            offset[j] = lo
            cols.append([(nstd, 1.0)])
            if np.isfinite(hi):
                extra_rows.append((nstd, hi - lo))
            nstd += 1
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append([(nstd, -1.0)])
            nstd += 1
        else:
            cols.append([(nstd, 1.0), (nstd + 1, -1.0)])
            nstd += 2

    nrow = A.shape[0] + len(extra_rows)
    nslack = sum(1 for s in senses if s != "=") + len(extra_rows)
    M = np.zeros((nrow, nstd + nslack))
    rhs = np.zeros(nrow)
    cstd = np.zeros(nstd + nslack)
    for j in range(nvar):
        for col, coef in cols[j]:
            M[: A.shape[0], col] += A[:, j] * coef
            cstd[col] += c[j] * coef
    rhs[: A.shape[0]] = b - A @ offset
    slack = nstd
    for i, s in enumerate(senses):
        if s == "<=":
            M[i, slack] = 1.0
            slack += 1
        elif s == ">=":
            M[i, slack] = -1.0
            slack += 1
        elif s not in ("=", "=="):
            raise ValueError(f"unknown constraint sense {s!r}")
    for r, (col, ub) in enumerate(extra_rows, start=A.shape[0]):
        M[r, col] = 1.0
        M[r, slack] = 1.0
        rhs[r] = ub
        slack += 1
    if not maximize:
        cstd = -cstd

    status, xs, value, _ = solve_standard(M, rhs, cstd)
    _raise_for(status)
    x = offset.copy()
    for j in range(nvar):
        for col, coef in cols[j]:
            x[j] += coef * xs[col]
    return LPSolution(x=x, value=float(c @ x))
