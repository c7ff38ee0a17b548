"""Dense two-phase simplex for the package's small coupling LPs.

Solves   min c.x  subject to  A x = b, x >= 0   at desk scale (up to a few
hundred variables). Phase 1 minimizes the sum of artificial variables from an
identity basis; phase 2 runs from the feasible basis found. Bland's rule
guarantees termination; tolerances are sized for the ~1e-12 arithmetic noise
of problems this small, two orders below the 1e-9/1e-10 thresholds the
callers assert against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# status codes
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2

_PIVOT_TOL = 1e-11
_FEAS_TOL = 1e-9


@dataclass
class LPResult:
    status: int
    x: np.ndarray | None
    value: float | None


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    piv = T[row]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * piv
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: np.ndarray, n_vars: int) -> int:
    """Minimize the objective stored in the last tableau row over columns < n_vars."""
    m = T.shape[0] - 1
    while True:
        # Bland: entering column = lowest index with negative reduced cost
        col = -1
        for j in range(n_vars):
            if T[m, j] < -_PIVOT_TOL:
                col = j
                break
        if col < 0:
            return OPTIMAL
        # ratio test, Bland tie-break on basis index
        row, best = -1, np.inf
        for r in range(m):
            a = T[r, col]
            if a > _PIVOT_TOL:
                ratio = T[r, -1] / a
                if ratio < best - 1e-12 or (
                    abs(ratio - best) <= 1e-12 and (row < 0 or basis[r] < basis[row])
                ):
                    best = ratio
                    row = r
        if row < 0:
            return UNBOUNDED
        _pivot(T, basis, row, col)


def solve_lp(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> LPResult:
    """Minimize c.x subject to A x = b, x >= 0.

    Parameters
    ----------
    c : (n,) costs.
    A : (m, n) equality constraint matrix.
    b : (m,) right-hand side.

    Returns
    -------
    LPResult with status OPTIMAL (x, value set), INFEASIBLE, or UNBOUNDED.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape

    # normalize rows to b >= 0 for the identity artificial basis
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)

    # phase 1 tableau: [A | I | b] with objective sum of artificials
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, n : n + m] = 1.0
    T[m] -= T[:m].sum(axis=0)  # price out the artificial basis
    basis = np.arange(n, n + m)

    status = _run_simplex(T, basis, n + m)
    if status == UNBOUNDED or T[m, -1] < -_FEAS_TOL * scale:
        return LPResult(INFEASIBLE, None, None)
    if -T[m, -1] > _FEAS_TOL * scale:
        return LPResult(INFEASIBLE, None, None)

    # drive leftover artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            col = -1
            for j in range(n):
                if abs(T[r, j]) > 1e-9:
                    col = j
                    break
            if col >= 0:
                _pivot(T, basis, r, col)
                keep.append(r)
            # else: redundant constraint row, drop it
        else:
            keep.append(r)
    rows = keep + [m]
    T = T[rows][:, list(range(n)) + [n + m]]
    basis = basis[keep]
    mm = len(keep)

    # phase 2: rebuild reduced costs for c
    T[mm, :n] = c
    T[mm, -1] = 0.0
    for r in range(mm):
        T[mm] -= c[basis[r]] * T[r]

    status = _run_simplex(T, basis, n)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, None)
    x = np.zeros(n)
    x[basis] = T[:mm, -1]
    np.clip(x, 0.0, None, out=x)
    return LPResult(OPTIMAL, x, float(c @ x))
