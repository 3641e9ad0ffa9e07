"""Baseline p-value graphical procedure and the inverse-e calibrator."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import GraphSpec, as_evalues
from .oracle import hitting_weights

logger = logging.getLogger(__name__)


def e_to_p(e) -> np.ndarray:
    """Inverse e-value truncated at one: ``min(1/e, 1)``; ``e = 0`` gives 1, ``e = inf`` gives 0."""
    e = as_evalues(e)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0 / e, 1.0)


def as_pvalues(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise ValueError("p-values must lie in [0, 1]")
    return p


@dataclass(frozen=True)
class Round:
    rejected: int
    ratio: float
    weights: dict[int, float]


def sequential_rejection(p, g: GraphSpec, alpha: float | None = None, *, return_rounds: bool = False):
    """Rejection set of the p-graphical closed test via sequential rejection.

    Each round recomputes the hitting weights of the not-yet-rejected set and
    rejects the single hypothesis with the smallest ``p_i / w_i`` among those
    with ``p_i <= alpha * w_i``. Consonance of these weights makes the fixed
    point equal to the full closure.
    """
    p = as_pvalues(p)
    if p.size != g.n:
        raise ValueError(f"{p.size} p-values given for a graph with {g.n} nodes")
    alpha = g.alpha if alpha is None else alpha
    remaining = set(range(g.n))
    rounds: list[Round] = []
    while remaining:
        w = hitting_weights(g, remaining)
        best, best_ratio = None, np.inf
        for i in sorted(remaining):
            if w[i] > 0 and p[i] <= alpha * w[i]:
                ratio = p[i] / w[i]
                if ratio < best_ratio or best is None:
                    best, best_ratio = i, ratio
        if best is None:
            break
        remaining.discard(best)
        rounds.append(Round(best, best_ratio, w))
        logger.debug("round %d: reject H%d (p/w = %.6g)", len(rounds), best + 1, best_ratio)
    rejected = set(range(g.n)) - remaining
    if return_rounds:
        return rejected, rounds
    return rejected
