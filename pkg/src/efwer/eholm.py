"""e-Holm: closure of unweighted e-Bonferroni tests, ``w_i(I) = 1/|I|``."""

from __future__ import annotations

import numpy as np

from .core import AdjustedResult, as_evalues

RECOMPUTE_EVERY = 4096


def holm_threshold(e, alpha: float) -> tuple[float, float]:
    """Return ``(C, 1/alpha + C)`` with ``C = sum_j max(1/alpha - e_j, 0)``."""
    e = as_evalues(e)
    c = float(np.maximum(1.0 / alpha - e, 0.0).sum())
    return c, 1.0 / alpha + c


def holm_reject(e, alpha: float) -> set[int]:
    """Indices rejected by e-Holm at level ``alpha``, in O(n)."""
    e = as_evalues(e)
    _, threshold = holm_threshold(e, alpha)
    return set(np.flatnonzero(e >= threshold).tolist())


def holm_reject_any(panel, alpha: float) -> np.ndarray:
    """Row-wise "does e-Holm reject anything" for a ``(T, n)`` array of e-values."""
    panel = np.asarray(panel, dtype=float)
    c = np.maximum(1.0 / alpha - panel, 0.0).sum(axis=1)
    return panel.max(axis=1) >= 1.0 / alpha + c


def holm_adjusted(e, alpha: float = 0.05, *, return_k: bool = False):
    """Adjusted e-values for e-Holm in O(n log n).

    Sort descending; with ``E_k`` the sum of the ``k`` smallest values, the
    adjusted value of the ``i``-th largest is ``min_k (e_(i) + E_k)/(k+1)``
    over ``k <= n - i``. The minimizing ``k`` can only grow as ``i``
    decreases, so a single sweep from the smallest value upward updates a
    running average incrementally. The average is recomputed from ``E_k``
    every :data:`RECOMPUTE_EVERY` updates to bound rounding drift.

    With ``return_k=True`` also returns the ``k_i`` sequence in sorted order
    (``k_i`` for the ``i``-th largest value; non-increasing in ``i``).
    """
    e = as_evalues(e)
    n = e.size
    adjusted = np.empty(n)
    finite = np.isfinite(e)
    adjusted[~finite] = np.inf
    idx = np.flatnonzero(finite)
    # Descending, ties by original index; only values matter for the result.
    idx = idx[np.lexsort((idx, -e[idx]))]
    vals = e[idx]
    nf = vals.size
    ks = np.zeros(nf, dtype=int)
    if nf:
        # suffix[k] = E_k, the sum of the k smallest finite values.
        suffix = np.concatenate(([0.0], np.cumsum(vals[::-1]))).tolist()
        vals = vals.tolist()
        out = np.empty(nf)
        out[-1] = vals[-1]
        est = vals[-1]
        k = 1
        updates = 0
        for i in range(nf - 2, -1, -1):
            est = est + (vals[i] - vals[i + 1]) / (1 + k)
            updates += 1
            while k < nf - 1 - i and est > vals[nf - 1 - k]:
                est = (1 + k) / (2 + k) * est + vals[nf - 1 - k] / (2 + k)
                k += 1
                updates += 1
                if updates >= RECOMPUTE_EVERY:
                    est = (vals[i] + suffix[k]) / (k + 1)
                    updates = 0
            if updates >= RECOMPUTE_EVERY:
                est = (vals[i] + suffix[k]) / (k + 1)
                updates = 0
            out[i] = est
            ks[i] = k
        adjusted[idx] = out
    result = AdjustedResult.from_adjusted(adjusted, alpha)
    if return_k:
        return result, ks
    return result
