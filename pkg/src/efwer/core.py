"""Domain types, validation and graph utilities shared by the algorithm modules.

Node ids are 0-based throughout the Python API. The CLI and the file formats
use 1-based ids.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """Base class for malformed problem inputs."""


class NegativeEValue(ValidationError):
    pass


class BudgetOverflow(ValidationError):
    pass


class RowSumExceedsOne(ValidationError):
    pass


class BadNodeId(ValidationError):
    pass


class CycleError(ValueError):
    """Raised when an acyclic graph is required. ``cycle`` holds one witness."""

    def __init__(self, cycle: Sequence[int], message: str | None = None):
        self.cycle = tuple(cycle)
        if message is None:
            message = "graph has a cycle: " + " -> ".join(
                str(v + 1) for v in (*self.cycle, self.cycle[0])
            )
        super().__init__(message)


class TooLarge(ValueError):
    pass


def as_evalues(values: Iterable[float]) -> np.ndarray:
    """Return ``values`` as a 1-d float array, checking e-value constraints.

    Infinite e-values are allowed; NaN and negative values are not.
    """
    e = np.asarray(values, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValidationError("need at least one e-value")
    if np.isnan(e).any():
        raise NegativeEValue("e-values must not be NaN")
    if (e < 0).any():
        bad = int(np.flatnonzero(e < 0)[0])
        raise NegativeEValue(f"e-value for hypothesis {bad + 1} is negative ({e[bad]})")
    return e


def weighted(weight: float, value: float) -> float:
    """``weight * value`` with the convention that a zero weight kills infinity."""
    return weight * value if weight else 0.0


@dataclass(frozen=True)
class AlphaBudget:
    """Global level ``alpha`` and the initial per-hypothesis allocation."""

    alpha: float
    budgets: tuple[float, ...]
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        alpha = float(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if not 0.0 < alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
        if not self.budgets:
            raise ValidationError("need at least one hypothesis")
        for k, b in enumerate(self.budgets):
            if math.isnan(b) or b < 0:
                raise ValidationError(f"budget for hypothesis {k + 1} must be >= 0, got {b}")
        total = math.fsum(self.budgets)
        tol = 1e-12 * alpha
        if total > alpha + tol:
            raise BudgetOverflow(f"budgets sum to {total!r} which exceeds alpha={alpha!r}")
        if self.strict and abs(total - alpha) > tol:
            raise BudgetOverflow(f"strict mode: budgets sum to {total!r}, expected alpha={alpha!r}")

    @classmethod
    def equal(cls, n: int, alpha: float) -> "AlphaBudget":
        return cls(alpha, (alpha / n,) * n)

    @property
    def n(self) -> int:
        return len(self.budgets)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.budgets)


@dataclass(frozen=True)
class GraphSpec:
    """Weighted transition graph with an initial alpha budget.

    ``edges`` holds ``(from, to, q)`` triples with 0-based node ids and
    ``q > 0``. Row deficits ``1 - sum_k q_jk`` flow to an implicit absorbing
    sink. Instances are immutable and hashable; construct them through
    :meth:`from_edges` (or :func:`validate_graph`) to get normalized edges.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    budget: AlphaBudget

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence],
        budgets: Sequence[float] | AlphaBudget,
        alpha: float | None = None,
        *,
        strict: bool = False,
    ) -> "GraphSpec":
        if isinstance(budgets, AlphaBudget):
            budget = budgets
        else:
            if alpha is None:
                alpha = math.fsum(budgets)
            budget = AlphaBudget(alpha, tuple(budgets), strict=strict)
        return validate_graph(cls(int(n), tuple(tuple(x) for x in edges), budget))

    @property
    def alpha(self) -> float:
        return self.budget.alpha

    @cached_property
    def budgets(self) -> np.ndarray:
        b = self.budget.array
        b.flags.writeable = False
        return b

    @cached_property
    def budgets_list(self) -> list[float]:
        return list(self.budget.budgets)

    @cached_property
    def children(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        out: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for j, k, q in self.edges:
            out[j].append((k, q))
        return tuple(tuple(c) for c in out)

    @cached_property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for j, k, _ in self.edges:
            out[k].append(j)
        return tuple(tuple(p) for p in out)

    @cached_property
    def q(self) -> np.ndarray:
        """Read-only dense ``n x n`` transition matrix (sink column omitted)."""
        q = np.zeros((self.n, self.n))
        for j, k, w in self.edges:
            q[j, k] = w
        q.flags.writeable = False
        return q

    def matrix(self) -> np.ndarray:
        return self.q.copy()

    def __repr__(self):
        return f"GraphSpec(n={self.n}, edges={len(self.edges)}, alpha={self.alpha})"


def validate_graph(g: GraphSpec) -> GraphSpec:
    """Check ids, weights and row sums; return a graph with canonical edges.

    Zero-weight edges are dropped, exact duplicate edges are merged, and the
    edges are sorted. Conflicting duplicates raise :class:`ValidationError`.
    """
    n = g.n
    if n < 1:
        raise ValidationError("need at least one hypothesis")
    if g.budget.n != n:
        raise ValidationError(f"{g.budget.n} budgets given for {n} nodes")
    seen: dict[tuple[int, int], float] = {}
    for edge in g.edges:
        if len(edge) != 3:
            raise ValidationError(f"edge {edge!r} is not a (from, to, q) triple")
        j, k, q = edge
        if int(j) != j or int(k) != k or not (0 <= j < n and 0 <= k < n):
            raise BadNodeId(f"edge ({j}, {k}) references a node outside 0..{n - 1}")
        j, k, q = int(j), int(k), float(q)
        if j == k:
            raise BadNodeId(f"self-loop at node {j + 1}")
        if math.isnan(q) or q < 0:
            raise ValidationError(f"edge weight q[{j + 1},{k + 1}] must be >= 0, got {q}")
        if q == 0:
            continue
        if (j, k) in seen and seen[j, k] != q:
            raise ValidationError(f"conflicting weights for edge {j + 1} -> {k + 1}")
        seen[j, k] = q
    row = [0.0] * n
    for (j, _), q in seen.items():
        row[j] += q
    for j, s in enumerate(row):
        if s > 1.0 + ROW_SUM_TOL:
            raise RowSumExceedsOne(f"outgoing weights of node {j + 1} sum to {s!r} > 1")
    edges = tuple(sorted((j, k, q) for (j, k), q in seen.items()))
    if edges == g.edges:
        return g
    return GraphSpec(n, edges, g.budget)


@dataclass(frozen=True)
class ValidatedProblem:
    e: tuple[float, ...]
    graph: GraphSpec

    @property
    def evalues(self) -> np.ndarray:
        return np.array(self.e)

    @property
    def n(self) -> int:
        return self.graph.n


def validate_problem(e, g: GraphSpec) -> ValidatedProblem:
    """Validate an e-value vector against a graph. Idempotent."""
    ev = as_evalues(e)
    g = validate_graph(g)
    if ev.size != g.n:
        raise ValidationError(f"{ev.size} e-values given for a graph with {g.n} nodes")
    return ValidatedProblem(tuple(float(x) for x in ev), g)


@dataclass
class AdjustedResult:
    """Adjusted e-values ``e*`` together with the alpha-scaled ``m = alpha * e*``."""

    adjusted: np.ndarray
    m: np.ndarray
    alpha: float
    argmin_subsets: list[frozenset[int]] | None = None
    stats: dict = field(default_factory=dict)

    @classmethod
    def from_m(cls, m, alpha: float, **kw) -> "AdjustedResult":
        m = np.asarray(m, dtype=float)
        return cls(m / alpha, m, alpha, **kw)

    @classmethod
    def from_adjusted(cls, adjusted, alpha: float, **kw) -> "AdjustedResult":
        adjusted = np.asarray(adjusted, dtype=float)
        return cls(adjusted, adjusted * alpha, alpha, **kw)

    def rejected(self, alpha: float | None = None) -> set[int]:
        alpha = self.alpha if alpha is None else alpha
        return set(np.flatnonzero(self.adjusted >= 1.0 / alpha).tolist())


def _find_cycle(n: int, succ: Sequence[Iterable[int]], nodes: Iterable[int]) -> list[int] | None:
    """Iterative DFS returning one directed cycle among ``nodes``, or None."""
    allowed = set(nodes)
    color = dict.fromkeys(allowed, 0)
    for root in sorted(allowed):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        path = [root]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            for w in it:
                if w not in allowed:
                    continue
                if color[w] == 1:
                    return path[path.index(w):]
                if color[w] == 0:
                    color[w] = 1
                    stack.append((w, iter(succ[w])))
                    path.append(w)
                    break
            else:
                color[v] = 2
                stack.pop()
                path.pop()
    return None


def _kahn(nodes: Sequence[int], succ, indeg: dict[int, int]) -> list[int]:
    frontier = [v for v in nodes if indeg[v] == 0]
    heapq.heapify(frontier)
    order = []
    while frontier:
        v = heapq.heappop(frontier)
        order.append(v)
        for w in succ(v):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(frontier, w)
    return order


def topological_order(g: GraphSpec) -> list[int]:
    """Lexicographically smallest topological order (Kahn with a min-heap).

    Raises :class:`CycleError` with a witness cycle if ``g`` is cyclic.
    """
    indeg = {v: 0 for v in range(g.n)}
    for _, k, _ in g.edges:
        indeg[k] += 1
    order = _kahn(range(g.n), lambda v: (k for k, _ in g.children[v]), indeg)
    if len(order) < g.n:
        succ = [[k for k, _ in c] for c in g.children]
        raise CycleError(_find_cycle(g.n, succ, range(g.n)))
    return order


def is_acyclic(g: GraphSpec) -> bool:
    try:
        topological_order(g)
    except CycleError:
        return False
    return True


def ancestor_set(g: GraphSpec, i: int) -> set[int]:
    """Nodes with a directed path to ``i``, including ``i`` itself."""
    if not 0 <= i < g.n:
        raise BadNodeId(f"node {i} outside 0..{g.n - 1}")
    seen = {i}
    queue = deque([i])
    while queue:
        v = queue.popleft()
        for p in g.parents[v]:
            if p not in seen:
                seen.add(p)
                queue.append(p)
    return seen
