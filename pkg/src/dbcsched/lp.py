"""Dense two-phase tableau simplex for the small LPs behind region queries.

Problems here have at most a few hundred variables and a handful of rows, so
a dense tableau with Bland's anti-cycling rule is plenty and keeps results
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-12


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None = None
    value: float | None = None


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], ncols: int) -> bool:
    """Minimize over the tableau in place; False when unbounded."""
    m = T.shape[0] - 1
    while True:
        z = T[-1, :ncols]
        entering = next((j for j in range(ncols) if z[j] < -TOL), None)
        if entering is None:
            return True
        col = T[:m, entering]
        best, leave = None, None
        for i in range(m):
            if col[i] > TOL:
                ratio = T[i, -1] / col[i]
                if (
                    best is None
                    or ratio < best - TOL
                    or (abs(ratio - best) <= TOL and basis[i] < basis[leave])
                ):
                    best, leave = ratio, i
        if leave is None:
            return False
        _pivot(T, leave, entering)
        basis[leave] = entering


def maximize(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    """max c.x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: original | slacks | artificials | rhs
    nstd = n + m_ub
    A = np.zeros((m, nstd))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    T = np.zeros((m + 1, nstd + m + 1))
    T[:m, :nstd] = A
    T[:m, nstd : nstd + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :nstd] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(nstd, nstd + m))

    _run(T, basis, nstd + m)
    if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult("infeasible")

    # drive artificials out of the basis, dropping redundant rows
    i = 0
    while i < len(basis):
        if basis[i] >= nstd:
            row = T[i, :nstd]
            j = next((j for j in range(nstd) if abs(row[j]) > 1e-9), None)
            if j is None:
                T = np.delete(T, i, axis=0)
                del basis[i]
                continue
            _pivot(T, i, j)
            basis[i] = j
        i += 1

    T = np.delete(T, np.s_[nstd : nstd + m], axis=1)
    cost = np.zeros(nstd)
    cost[:n] = -c
    T[-1, :] = 0.0
    T[-1, :nstd] = cost
    for i, bi in enumerate(basis):
        T[-1] -= cost[bi] * T[i]
    if not _run(T, basis, nstd):
        return LPResult("unbounded")

    x = np.zeros(nstd)
    for i, bi in enumerate(basis):
        x[bi] = T[i, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult("optimal", x=x, value=float(c @ x))
