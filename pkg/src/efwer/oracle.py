"""Exact closed testing by enumeration.

Local-test weights come from hitting probabilities of the budget-initialized
random walk, so any graph (cyclic or not) is supported. Everything here is
exponential in ``n`` and exists to check the fast algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .core import AdjustedResult, GraphSpec, TooLarge, as_evalues, topological_order, weighted

MAX_ORACLE_N = 25
TIE_RTOL = 1e-12


class SingularSystem(ArithmeticError):
    pass


@dataclass(frozen=True)
class LocalTest:
    subset: tuple[int, ...]
    weights: dict[int, float]
    e_value: float
    p_reject_stat: float

    def rejects(self, alpha: float) -> bool:
        return self.e_value >= 1.0 / alpha


def _reaching(g: GraphSpec, targets: frozenset[int]) -> list[int]:
    """Transient nodes (outside ``targets``) with a path into ``targets``."""
    seen = set(targets)
    stack = list(targets)
    while stack:
        v = stack.pop()
        for p in g.parents[v]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return sorted(seen - targets)


@lru_cache(maxsize=1 << 16)
def _weights_cached(g: GraphSpec, subset: frozenset[int]) -> tuple[float, ...]:
    members = sorted(subset)
    budgets = g.budgets
    w = budgets[members].copy()
    transient = _reaching(g, subset)
    if transient:
        q = g.q
        # Row vector of expected visits: x (I - Q_TT) = alpha_T.
        a = np.eye(len(transient)) - q[np.ix_(transient, transient)]
        try:
            visits = np.linalg.solve(a.T, budgets[transient])
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"singular hitting system for subset {members}") from exc
        w += visits @ q[np.ix_(transient, members)]
    return tuple(w / g.alpha)


def hitting_weights(g: GraphSpec, subset: Iterable[int]) -> dict[int, float]:
    """Local-test weights ``w_i(I)`` for ``i`` in ``subset``.

    ``w_i(I)`` is the probability that the walk started from ``budgets/alpha``
    first enters ``subset`` at ``i``. Transient nodes that cannot reach the
    subset are dropped before solving, which keeps the system nonsingular
    even when the complement contains closed cycles.
    """
    subset = frozenset(int(i) for i in subset)
    if not subset:
        raise ValueError("subset must be nonempty")
    if min(subset) < 0 or max(subset) >= g.n:
        raise ValueError(f"subset {sorted(subset)} outside 0..{g.n - 1}")
    return dict(zip(sorted(subset), _weights_cached(g, subset)))


def dag_path_weights(g: GraphSpec, subset: Iterable[int]) -> dict[int, float]:
    """Weights by explicit enumeration of paths through the complement (DAGs only)."""
    subset = frozenset(subset)
    topological_order(g)
    budgets = g.budgets

    def paths_mass(j: int, target: int) -> float:
        total = 0.0
        for k, q in g.children[j]:
            if k == target:
                total += q
            elif k not in subset:
                total += q * paths_mass(k, target)
        return total

    out = {}
    for i in sorted(subset):
        s = budgets[i]
        for j in range(g.n):
            if j not in subset and budgets[j] > 0:
                s += budgets[j] * paths_mass(j, i)
        out[i] = s / g.alpha
    return out


def path_assignment(e, g: GraphSpec, subset: Iterable[int]) -> np.ndarray:
    """Per-node values ``e_j^(I)``: ``e_j`` on the subset, path-weighted sums elsewhere."""
    e = as_evalues(e)
    subset = frozenset(subset)
    topological_order(g)

    def paths_mass(j: int, target: int) -> float:
        total = 0.0
        for k, q in g.children[j]:
            if k == target:
                total += q
            elif k not in subset:
                total += q * paths_mass(k, target)
        return total

    out = np.zeros(g.n)
    for j in range(g.n):
        if j in subset:
            out[j] = e[j]
        else:
            out[j] = sum(weighted(paths_mass(j, i), e[i]) for i in subset)
    return out


def e_local(e, weights: dict[int, float]) -> float:
    """Weighted e-Bonferroni combination ``sum_i w_i(I) e_i``."""
    return math.fsum(weighted(w, e[i]) for i, w in weights.items())


def p_local_stat(p, weights: dict[int, float]) -> float:
    """``min_i p_i / w_i(I)``; zero-weight members never reject."""
    return min((p[i] / w for i, w in weights.items() if w > 0), default=math.inf)


def local_test(e, g: GraphSpec, subset: Iterable[int]) -> LocalTest:
    e = as_evalues(e)
    w = hitting_weights(g, subset)
    with np.errstate(divide="ignore"):
        p = np.minimum(1.0 / e, 1.0)
    return LocalTest(tuple(sorted(w)), w, e_local(e, w), p_local_stat(p, w))


def gray_code_subsets(n: int) -> Iterator[frozenset[int]]:
    """All nonempty subsets of ``range(n)``, one element flipped per step."""
    current: set[int] = set()
    for step in range(1, 1 << n):
        bit = (step & -step).bit_length() - 1
        current ^= {bit}
        yield frozenset(current)


def _guard(n: int, max_n: int):
    if n > max_n:
        raise TooLarge(f"brute-force closure over n={n} hypotheses exceeds the guard n <= {max_n}")


def brute_force_adjusted_e(
    e, g: GraphSpec, *, max_n: int = MAX_ORACLE_N, subsets=None
) -> AdjustedResult:
    """``e*_i = min_{I containing i} e_I`` by enumerating every subset.

    ``subsets`` optionally restricts the enumeration (an iterable of
    collections). Among near-ties (relative 1e-12) the lexicographically
    smallest subset is reported.
    """
    e = as_evalues(e)
    n = g.n
    _guard(n, max_n)
    best = np.full(n, math.inf)
    arg: list[tuple[int, ...] | None] = [None] * n
    source = gray_code_subsets(n) if subsets is None else (frozenset(s) for s in subsets)
    for subset in source:
        value = e_local(e, hitting_weights(g, subset))
        key = tuple(sorted(subset))
        for i in subset:
            b = best[i]
            if value < b and not _close(value, b):
                best[i], arg[i] = value, key
            elif _close(value, b):
                best[i] = min(b, value)
                if arg[i] is None or key < arg[i]:
                    arg[i] = key
    subsets_out = [frozenset(a) if a is not None else None for a in arg]
    return AdjustedResult.from_adjusted(best, g.alpha, argmin_subsets=subsets_out)


def _close(a: float, b: float) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= TIE_RTOL * max(abs(a), abs(b))


def brute_force_closure(e, g: GraphSpec, alpha: float | None = None, **kw) -> set[int]:
    """Rejection set of the closed e-Bonferroni test."""
    alpha = g.alpha if alpha is None else alpha
    return brute_force_adjusted_e(e, g, **kw).rejected(alpha)


def brute_force_p_closure(p, g: GraphSpec, alpha: float | None = None, *, max_n: int = MAX_ORACLE_N) -> set[int]:
    """Closure of weighted p-Bonferroni tests: reject ``H_i`` iff every ``H_I`` with ``i`` in ``I`` is rejected."""
    p = np.asarray(p, dtype=float)
    alpha = g.alpha if alpha is None else alpha
    if ((p < 0) | (p > 1) | np.isnan(p)).any():
        raise ValueError("p-values must lie in [0, 1]")
    n = g.n
    _guard(n, max_n)
    survivors = set(range(n))
    for subset in gray_code_subsets(n):
        if not survivors & subset:
            continue
        w = hitting_weights(g, subset)
        if not any(w_i > 0 and p[i] <= alpha * w_i for i, w_i in w.items()):
            survivors -= subset
    return survivors
