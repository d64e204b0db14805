"""Minimum-cost bipartite assignment with forbidden pairs.

Thin contract layer over scipy's linear_sum_assignment. Entries equal to the
sentinel ``forbid_value`` (infinity by default) can never be matched; among
the remaining pairs the solver returns a maximum-size matching of minimum
total cost. Rectangular matrices are supported directly. Output order is
deterministic for identical input (pairs sorted by row index).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

FORBIDDEN = float("inf")


def solve(
    costs: np.ndarray, forbid_value: float = FORBIDDEN
) -> list[tuple[int, int]]:
    """Solve the assignment problem for a rows x cols cost matrix.

    Returns (row, col) pairs sorted by row. Pairs whose cost equals
    ``forbid_value`` are excluded; if that leaves a row or column with no
    usable partner it simply stays unmatched.
    """
    matrix = np.asarray(costs, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {matrix.shape}")
    if matrix.size == 0:
        return []

    if np.isnan(forbid_value):
        allowed = ~np.isnan(matrix)
    else:
        allowed = matrix != forbid_value
    if not np.isfinite(matrix[allowed]).all():
        raise ValueError("cost matrix has non-finite entries besides the sentinel")
    if not allowed.any():
        return []

    # Replace forbidden entries with a cost so large that the solver uses as
    # few of them as possible; those pairs are dropped from the result.
    side = min(matrix.shape)
    max_abs = float(np.abs(matrix[allowed]).max())
    big = 2.0 * side * max(max_abs, 1.0) + 1.0
    work = np.where(allowed, matrix, big)

    rows, cols = linear_sum_assignment(work)
    pairs = [
        (int(r), int(c)) for r, c in zip(rows, cols) if allowed[r, c]
    ]
    pairs.sort()
    return pairs
