"""Phase-1 primal simplex (dense tableau, Bland's rule)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError


@dataclass
class Phase1Result:
    """
    Outcome of minimizing the total artificial mass for ``A x = b, x >= 0``.

    ``y`` satisfies ``A.T @ y <= eps`` and ``b @ y == infeasibility``; when
    the infeasibility is positive it is a Farkas certificate.
    """

    x: np.ndarray
    infeasibility: float
    y: np.ndarray
    iterations: int


def phase1(A, b, pivot_tol=1e-11, max_iter=None) -> Phase1Result:
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    # columns: n structural, m artificial, then rhs
    T = np.zeros((m, n + m + 1))
    T[:, :n] = A
    T[:, n : n + m] = np.eye(m)
    T[:, -1] = b
    basis = list(range(n, n + m))
    cost = np.zeros(n + m)
    cost[n:] = 1.0

    if max_iter is None:
        max_iter = 200 * (n + m)
    for it in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ T[:, :-1]
        entering = next((j for j in range(n + m) if reduced[j] < -pivot_tol), None)
        if entering is None:
            break
        col = T[:, entering]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            # cannot happen: the phase-1 objective is bounded below by zero
            raise NumericalError("unbounded phase-1 direction", residual=float("nan"))
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: basis[r])
        T[leave] /= T[leave, entering]
        others = np.arange(m) != leave
        T[others] -= np.outer(T[others, entering], T[leave])
        basis[leave] = entering
    else:
        raise NumericalError(
            f"simplex did not terminate within {max_iter} pivots",
            residual=float(cost[basis] @ T[:, -1]),
        )

    x = np.zeros(n + m)
    x[basis] = T[:, -1]
    x = np.clip(x, 0, None)
    # simplex multipliers: artificial columns of the tableau hold B^{-1}
    binv = T[:, n : n + m]
    y = cost[basis] @ binv
    return Phase1Result(
        x=x[:n],
        infeasibility=float(x[n:].sum()),
        y=y * sign,
        iterations=it,
    )
