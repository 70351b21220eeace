"""Dense tableau simplex for small linear programs.

Solves  max c.x  subject to  A x <= b,  x >= 0  with b >= 0, so the slack
basis is immediately feasible and no phase-1 is needed.  Pivoting follows
Bland's rule (smallest eligible index), which terminates on the heavily
degenerate programs the metric module produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnboundedProgramError(RuntimeError):
    """The objective is unbounded above on the feasible set."""


class PivotLimitError(RuntimeError):
    """The pivot budget was exhausted before reaching optimality."""


@dataclass
class SimplexSolution:
    objective: float
    x: np.ndarray
    iterations: int


def simplex_max(
    c,
    A,
    b,
    tolerance: float = 1e-9,
    max_iterations: int | None = None,
) -> SimplexSolution:
    """Maximize c.x over A x <= b, x >= 0 (requires b >= 0)."""
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    m, n = A.shape
    if c.size != n or b.size != m:
        raise ValueError("inconsistent program dimensions")
    if np.any(b < 0.0):
        raise ValueError("this solver needs b >= 0 (slack basis must be feasible)")
    if max_iterations is None:
        max_iterations = 2000 + 40 * (m + n)

    # tableau: [A | I | b] with the negated objective in the last row
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    iterations = 0
    while True:
        reduced = T[m, :-1]
        eligible = np.nonzero(reduced < -tolerance)[0]
        if eligible.size == 0:
            break
        col = int(eligible[0])  # Bland: smallest entering index
        column = T[:m, col]
        rows = np.nonzero(column > tolerance)[0]
        if rows.size == 0:
            raise UnboundedProgramError("objective unbounded along an improving ray")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-15]
        row = int(min(ties, key=lambda r: basis[r]))  # Bland: smallest leaving variable

        pivot = T[row, col]
        T[row] /= pivot
        others = [k for k in range(m + 1) if k != row]
        T[others] -= np.outer(T[others, col], T[row])
        basis[row] = col
        iterations += 1
        if iterations > max_iterations:
            raise PivotLimitError(f"no optimum after {iterations} pivots")

    x = np.zeros(n + m)
    for r, var in enumerate(basis):
        x[var] = T[r, -1]
    return SimplexSolution(objective=float(T[m, -1]), x=x[:n].copy(), iterations=iterations)
