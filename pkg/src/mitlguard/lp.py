"""Zero-sum matrix games solved by a dense simplex with Bland's rule.

The row player maximizes. After shifting the payoffs to be at least one,
the column player's LP ``max 1'y  s.t.  M y <= 1, y >= 0`` is solved from
the slack basis; the row strategy is read from the dual prices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

PIVOT_TOL = 1e-12
TIE_TOL = 1e-10


@dataclass
class MatrixGameSolution:
    value: float
    row: np.ndarray
    col: np.ndarray


def _simplex(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Maximize 1'y subject to M y <= 1, y >= 0 for M > 0.

    Returns (y, dual prices x, objective).
    """
    R, C = M.shape
    T = np.zeros((R + 1, C + R + 1))
    T[:R, :C] = M
    T[:R, C:C + R] = np.eye(R)
    T[:R, -1] = 1.0
    T[R, :C] = -1.0
    basis = list(range(C, C + R))
    max_pivots = 50 * (R + C) + 1000
    for _ in range(max_pivots):
        obj = T[R, :-1]
        entering = next((j for j in range(C + R) if obj[j] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = T[:R, entering]
        best, leave = None, None
        for i in range(R):
            if col[i] > PIVOT_TOL:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            raise SolverError("matrix-game LP is unbounded; payoffs must be finite")
        T[leave] /= T[leave, entering]
        for i in range(R + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
    else:
        raise SolverError("simplex did not terminate")
    y = np.zeros(C)
    for i, b in enumerate(basis):
        if b < C:
            y[b] = T[i, -1]
    x = T[R, C:C + R].copy()
    return y, x, float(T[R, -1])


def solve_matrix_game(M) -> MatrixGameSolution:
    """Value and optimal mixed strategies of the zero-sum game ``M`` (rows maximize).

    Ties among optimal row strategies go to the first pure row that attains
    the value; otherwise the simplex row is returned.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise SolverError("payoff matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(M)):
        raise SolverError("payoff matrix has non-finite entries")
    R, C = M.shape
    rowmin = M.min(axis=1)
    colmax = M.max(axis=0)
    lower, upper = rowmin.max(), colmax.min()
    if upper - lower <= TIE_TOL:
        r = int(np.argmax(rowmin >= lower - TIE_TOL))
        c = int(np.argmax(colmax <= upper + TIE_TOL))
        return MatrixGameSolution(float(lower), np.eye(R)[r], np.eye(C)[c])
    shift = 1.0 - M.min()
    y, x, obj = _simplex(M + shift)
    if obj <= 0:
        raise SolverError("degenerate matrix-game LP")
    value = 1.0 / obj - shift
    value = min(max(value, lower), upper)
    col = y / y.sum()
    pure = np.nonzero(rowmin >= value - TIE_TOL)[0]
    if len(pure):
        row = np.eye(R)[int(pure[0])]
    else:
        x = np.maximum(x, 0.0)
        row = x / x.sum()
    return MatrixGameSolution(float(value), row, col)


def column_value(M) -> float:
    """Value computed from the column player's side (the dual LP)."""
    M = np.asarray(M, dtype=float)
    return -solve_matrix_game(-M.T).value
