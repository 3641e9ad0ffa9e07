"""e-Fallback on a chain ``1 -> 2 -> ... -> n`` with per-node budgets.

All three algorithms return ``m`` with ``m_i = alpha * e*_i``. They differ
only in how they find the optimal split point for each ``i``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import AdjustedResult, AlphaBudget, ValidationError, as_evalues, weighted


class StackCounts(NamedTuple):
    pushes: int
    pops: int


def _inputs(e, budgets):
    e = as_evalues(e)
    a = np.asarray(budgets, dtype=float).reshape(-1)
    if a.shape != e.shape:
        raise ValidationError(f"{a.size} budgets given for {e.size} e-values")
    if np.isnan(a).any() or (a < 0).any():
        raise ValidationError("budgets must be nonnegative")
    return e, a


def fallback_naive(e, budgets) -> np.ndarray:
    """O(n^2) dynamic program ``m_i = min_{j<i} m_j + e_i * sum_{k=j+1..i} alpha_k``.

    Each row is vectorized: budget sums are accumulated backward from ``i``
    so that every candidate is a sum of nonnegative terms.
    """
    e, a = _inputs(e, budgets)
    n = e.size
    m = np.zeros(n + 1)
    for i in range(1, n + 1):
        mass = np.cumsum(a[i - 1 :: -1])
        prev = m[i - 1 :: -1]
        ei = e[i - 1]
        if np.isinf(ei):
            cost = np.where(mass > 0, np.inf, prev)
        else:
            cost = prev + ei * mass
        m[i] = cost.min()
    return m[1:]


def fallback_reverse(e, budgets, *, return_counts: bool = False):
    """Reverse search: walk back to the latest ``j < i`` with ``e_j <= e_i``.

    Then ``m_i = e_i * sum_{k=j+1..i} alpha_k + m_j``. With
    ``return_counts=True`` also returns the per-index number of back-step
    comparisons.
    """
    e, a = _inputs(e, budgets)
    ev, av = e.tolist(), a.tolist()
    n = len(ev)
    m = [0.0] * (n + 1)
    steps = [0] * n
    for i in range(1, n + 1):
        ei = ev[i - 1]
        mass = av[i - 1]
        j = i - 1
        count = 0
        while j >= 1:
            count += 1
            if ev[j - 1] <= ei:
                break
            mass += av[j - 1]
            j -= 1
        steps[i - 1] = count
        m[i] = weighted(mass, ei) + m[j]
    m = np.array(m[1:])
    if return_counts:
        return m, np.array(steps)
    return m


def fallback_stack(e, budgets, *, return_counts: bool = False):
    """Amortized O(n) stack search over the backward cumulative minima.

    The stack holds ``(j, merged budget)`` with nondecreasing e-values. Each
    new ``i`` pops every entry with ``e_j > e_i``, absorbing its budget; the
    surviving top (if any) supplies ``m_j``. Ties stop the popping. The top
    is inspected in place rather than popped and pushed back, so a run costs
    at most ``n`` pushes and ``n`` pops.
    """
    e, a = _inputs(e, budgets)
    ev, av = e.tolist(), a.tolist()
    n = len(ev)
    m = [0.0] * n
    stack: list[tuple[int, float]] = []
    pushes = pops = 0
    for i in range(n):
        ei = ev[i]
        mass = av[i]
        while stack and ev[stack[-1][0]] > ei:
            mass += stack.pop()[1]
            pops += 1
        m[i] = weighted(mass, ei) + (m[stack[-1][0]] if stack else 0.0)
        stack.append((i, mass))
        pushes += 1
    m = np.array(m)
    if return_counts:
        return m, StackCounts(pushes, pops)
    return m


METHODS = {
    "naive": fallback_naive,
    "reverse": fallback_reverse,
    "stack": fallback_stack,
}


def fallback_adjusted(e, budget: AlphaBudget, method: str = "stack") -> AdjustedResult:
    """Adjusted e-values for e-Fallback in the given chain order."""
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(METHODS)}") from None
    return AdjustedResult.from_m(fn(e, budget.budgets), budget.alpha, stats={"method": method})
