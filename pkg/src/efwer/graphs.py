"""Constructors for the graph shapes used by the procedures and their checks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import AlphaBudget, GraphSpec


def holm_graph(n: int, alpha: float) -> GraphSpec:
    """Complete graph with uniform weights and equal budgets (Holm)."""
    edges = [(j, k, 1.0 / (n - 1)) for j in range(n) for k in range(n) if j != k]
    return GraphSpec.from_edges(n, edges, AlphaBudget.equal(n, alpha))


def chain_graph(budgets: Sequence[float], alpha: float | None = None, q=None) -> GraphSpec:
    """Fallback chain ``1 -> 2 -> ... -> n``; ``q`` defaults to all ones."""
    n = len(budgets)
    q = np.ones(max(n - 1, 0)) if q is None else q
    edges = [(j, j + 1, q[j]) for j in range(n - 1)]
    return GraphSpec.from_edges(n, edges, budgets, alpha)


def cyclic_fallback_graph(budgets: Sequence[float], alpha: float | None = None, q=None) -> GraphSpec:
    """Fallback chain closed by an extra edge ``n -> 1``."""
    n = len(budgets)
    if n == 1:
        return GraphSpec.from_edges(1, [], budgets, alpha)
    q = np.ones(n) if q is None else q
    edges = [(j, (j + 1) % n, q[j]) for j in range(n)]
    if n == 2:
        edges = [(0, 1, q[0]), (1, 0, q[1])]
    return GraphSpec.from_edges(n, edges, budgets, alpha)


def gatekeeper_graph(
    budgets: Sequence[float] | None = None,
    alpha: float = 0.05,
    *,
    k: int = 2,
    gamma: float = 0.5,
    cycle_weight: float = 1.0,
) -> GraphSpec:
    """Gatekeeper graph: ``k`` primaries feeding ``k`` secondaries that form a cycle.

    Nodes ``0..k-1`` are primaries, ``k..2k-1`` secondaries. Primary ``r``
    passes ``1 - gamma`` to its own secondary and splits ``gamma`` evenly over
    the other secondaries; secondary ``r`` passes ``cycle_weight`` to the
    next secondary. With ``k = 2`` this is the two-endpoint graph whose only
    cycle runs through the secondaries, so it is an index-local DAG.
    By default the whole budget sits on the primaries.
    """
    n = 2 * k
    if budgets is None:
        budgets = [alpha / k] * k + [0.0] * k
    edges = []
    for r in range(k):
        own = k + r
        if k == 1:
            edges.append((r, own, 1.0))
            continue
        edges.append((r, own, 1.0 - gamma))
        for s in range(k):
            if s != r:
                edges.append((r, k + s, gamma / (k - 1)))
        nxt = k + (r + 1) % k
        edges.append((own, nxt, cycle_weight))
    return GraphSpec.from_edges(n, edges, budgets, alpha)


FACTORIAL_NODES = ((1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3))


def factorial_graph(alpha: float, scheme: str = "primary") -> GraphSpec:
    """Three-factor factorial design graph over seven coefficient hypotheses.

    Node order follows :data:`FACTORIAL_NODES`. Each primary passes half its
    budget to each secondary containing it; each secondary passes everything
    to the tertiary. ``scheme`` is ``"primary"`` (alpha/3 on each primary) or
    ``"equal"`` (alpha/7 everywhere).
    """
    index = {t: i for i, t in enumerate(FACTORIAL_NODES)}
    edges = []
    for t in FACTORIAL_NODES:
        supersets = [u for u in FACTORIAL_NODES if len(u) == len(t) + 1 and set(t) <= set(u)]
        for u in supersets:
            edges.append((index[t], index[u], 1.0 / len(supersets)))
    if scheme == "primary":
        budgets = [alpha / 3] * 3 + [0.0] * 4
    elif scheme == "equal":
        budgets = [alpha / 7] * 7
    else:
        raise ValueError(f"unknown budget scheme {scheme!r}")
    return GraphSpec.from_edges(7, edges, budgets, alpha)


def random_budgets(rng: np.random.Generator, n: int, alpha: float) -> list[float]:
    """Random allocation, sometimes with zero entries or unspent slack."""
    b = rng.dirichlet(np.ones(n))
    if n > 1 and rng.random() < 0.3:
        b[rng.random(n) < 0.3] = 0.0
        if b.sum() == 0:
            b[rng.integers(n)] = 1.0
        b = b / b.sum()
    if rng.random() < 0.2:
        b = b * rng.uniform(0.5, 1.0)
    return list(b * alpha * (1 - 1e-15))


def _random_rows(rng, n_out: int) -> np.ndarray:
    w = rng.dirichlet(np.ones(n_out))
    if rng.random() < 0.3:
        w = w * rng.uniform(0.3, 1.0)
    return w * (1 - 1e-15)


def random_dag(rng: np.random.Generator, n: int, alpha: float = 0.05, p_edge: float | None = None) -> GraphSpec:
    """Random DAG over a random hidden node order, with random sub/stochastic rows."""
    order = rng.permutation(n)
    p_edge = rng.uniform(0.2, 0.8) if p_edge is None else p_edge
    edges = []
    for a in range(n):
        targets = [order[b] for b in range(a + 1, n) if rng.random() < p_edge]
        if targets:
            for k, q in zip(targets, _random_rows(rng, len(targets))):
                edges.append((int(order[a]), int(k), float(q)))
    return GraphSpec.from_edges(n, edges, random_budgets(rng, n, alpha), alpha)


def random_graph(rng: np.random.Generator, n: int, alpha: float = 0.05, p_edge: float | None = None) -> GraphSpec:
    """Random directed graph, cycles allowed."""
    p_edge = rng.uniform(0.2, 0.8) if p_edge is None else p_edge
    edges = []
    for j in range(n):
        targets = [k for k in range(n) if k != j and rng.random() < p_edge]
        if targets:
            for k, q in zip(targets, _random_rows(rng, len(targets))):
                edges.append((j, k, float(q)))
    return GraphSpec.from_edges(n, edges, random_budgets(rng, n, alpha), alpha)


def random_cyclic_fallback(rng: np.random.Generator, n: int, alpha: float = 0.05) -> GraphSpec:
    q = rng.uniform(0.3, 1.0, size=n)
    q[rng.random(n) < 0.5] = 1.0
    return cyclic_fallback_graph(random_budgets(rng, n, alpha), alpha, q=q)


def random_gatekeeper(rng: np.random.Generator, k: int = 2, alpha: float = 0.05) -> GraphSpec:
    return gatekeeper_graph(
        random_budgets(rng, 2 * k, alpha),
        alpha,
        k=k,
        gamma=float(rng.uniform(0.0, 0.9)),
        cycle_weight=float(rng.choice([1.0, rng.uniform(0.3, 1.0)])),
    )


def random_evalues(rng: np.random.Generator, n: int, scale: float = 20.0) -> np.ndarray:
    """Log-uniform e-values spread around ``scale`` with occasional ties and zeros."""
    e = scale * np.exp(rng.uniform(-3.0, 3.0, size=n))
    if n > 1 and rng.random() < 0.2:
        e[rng.integers(n)] = e[rng.integers(n)]
    if rng.random() < 0.1:
        e[rng.integers(n)] = 0.0
    return e
