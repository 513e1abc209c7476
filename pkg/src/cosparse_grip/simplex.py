"""Dense two-phase simplex with Bland's rule.

Solves min c x subject to A x = b, x >= 0 to optimality on a full tableau.
Sized for the certification LPs this package builds (a few hundred
variables); nothing here is sparse or revised. Bland's rule (always the
smallest eligible index, both entering and leaving) guarantees finite
termination at the cost of speed, which is the right trade for a
certificate generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LpInfeasibleError",
    "LpUnboundedError",
    "LpSolution",
    "solve_standard_lp",
]

_COST_TOL = 1e-9    # reduced cost must beat this to enter
_PIVOT_TOL = 1e-11  # column entry must exceed this to be a pivot
_FEAS_TOL = 1e-8    # phase-1 objective above this means infeasible
_MAX_PIVOTS = 200000


class LpInfeasibleError(RuntimeError):
    """The constraint system has no nonnegative solution."""


class LpUnboundedError(RuntimeError):
    """The objective is unbounded below on the feasible set."""


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    pivots: int


def _pivot(t: np.ndarray, basis: list[int], row: int, col: int) -> None:
    t[row] /= t[row, col]
    piv = t[row]
    for i in range(t.shape[0]):
        if i != row and t[i, col] != 0.0:
            t[i] -= t[i, col] * piv
    basis[row] = col


def _bland_iterate(
    t: np.ndarray, basis: list[int], ncols: int, pivots: int
) -> int:
    """Run Bland pivots on tableau t until optimal. The cost row is t[-1]
    (reduced costs negated convention: we minimize, entering needs
    t[-1, j] < -_COST_TOL). Returns the updated pivot count."""
    m = t.shape[0] - 1
    while True:
        enter = -1
        for j in range(ncols):
            if t[-1, j] < -_COST_TOL:
                enter = j
                break
        if enter < 0:
            return pivots
        leave = -1
        best_ratio = np.inf
        for i in range(m):
            a = t[i, enter]
            if a > _PIVOT_TOL:
                ratio = t[i, -1] / a
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise LpUnboundedError("objective unbounded along entering column")
        _pivot(t, basis, leave, enter)
        pivots += 1
        if pivots > _MAX_PIVOTS:
            raise RuntimeError(f"simplex exceeded {_MAX_PIVOTS} pivots")


def solve_standard_lp(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> LpSolution:
    """min c x s.t. a x = b, x >= 0, by two-phase tableau simplex.

    Raises LpInfeasibleError / LpUnboundedError; returns an optimal basic
    solution otherwise. Rows found dependent in phase 1 are dropped.
    """
    c = np.asarray(c, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).ravel().copy()
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")

    a = a.copy()
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: [A I | b] with artificial basis, cost = sum of artificials
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, :n] = -a.sum(axis=0)
    t[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    pivots = _bland_iterate(t, basis, n + m, 0)
    if -t[-1, -1] > _FEAS_TOL * max(1.0, float(np.abs(b).sum())):
        raise LpInfeasibleError(
            f"phase-1 objective {-t[-1, -1]:.3e} is nonzero"
        )

    # drive remaining artificials out of the basis or drop their rows
    keep_rows = []
    for i in range(m):
        if basis[i] < n:
            keep_rows.append(i)
            continue
        col = -1
        for j in range(n):
            if abs(t[i, j]) > _PIVOT_TOL:
                col = j
                break
        if col >= 0:
            _pivot(t, basis, i, col)
            pivots += 1
            keep_rows.append(i)
        # else: dependent row, drop silently

    rows = keep_rows
    t2 = np.zeros((len(rows) + 1, n + 1))
    t2[: len(rows), :n] = t[rows, :n]
    t2[: len(rows), -1] = t[rows, -1]
    basis2 = [basis[i] for i in rows]

    # phase 2 cost row: c reduced against the current basis
    t2[-1, :n] = c
    for i, bi in enumerate(basis2):
        if t2[-1, bi] != 0.0:
            t2[-1] -= t2[-1, bi] * t2[i]

    pivots = _bland_iterate(t2, basis2, n, pivots)

    x = np.zeros(n)
    for i, bi in enumerate(basis2):
        x[bi] = t2[i, -1]
    return LpSolution(x=x, objective=float(c @ x), pivots=pivots)
