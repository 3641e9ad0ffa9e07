"""Adjusted e-values for e-graphical procedures on DAGs and index-local DAGs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (
    AdjustedResult,
    CycleError,
    GraphSpec,
    _find_cycle,
    _kahn,
    ancestor_set,
    topological_order,
    validate_problem,
)


class NotILDAG(ValueError):
    def __init__(self, node: int, cycle: Sequence[int]):
        self.node = node
        self.cycle = tuple(cycle)
        path = " -> ".join(str(v + 1) for v in (*self.cycle, self.cycle[0]))
        super().__init__(f"not an index-local DAG: reduced graph of node {node + 1} keeps cycle {path}")


@dataclass(frozen=True)
class ILDAGCheck:
    ok: bool
    node: int | None = None
    cycle: tuple[int, ...] = ()

    def __bool__(self):
        return self.ok


class _Scratch:
    """Per-node assignment storage reset by epoch stamps instead of clearing."""

    def __init__(self, n: int):
        self.value = [0.0] * n
        self.stamp = [-1] * n
        self.epoch = -1

    def next(self):
        self.epoch += 1

    def set(self, j: int, v: float):
        self.value[j] = v
        self.stamp[j] = self.epoch

    def get(self, j: int) -> float:
        return self.value[j] if self.stamp[j] == self.epoch else 0.0

    def live(self, j: int) -> bool:
        return self.stamp[j] == self.epoch


def _assign(e: list[float], g: GraphSpec, target: int, order: Iterable[int], scratch: _Scratch):
    """Backward min-recursion over one target's reduced graph.

    ``order`` lists the reduced graph's nodes in reverse topological order.
    Only nodes stamped in this pass count as children, so edges leaving the
    reduced graph contribute nothing and the target's own out-edges are never
    read. Returns ``(m, node_visits, edge_visits)``.
    """
    budgets = g.budgets_list
    scratch.next()
    scratch.set(target, e[target])
    m = budgets[target] * e[target] if budgets[target] else 0.0
    visits = 1
    edge_visits = 0
    for j in order:
        if j == target:
            continue
        acc = 0.0
        for k, q in g.children[j]:
            edge_visits += 1
            if scratch.live(k):
                v = scratch.value[k]
                if v:
                    acc += q * v
        v = e[j] if e[j] < acc else acc
        scratch.set(j, v)
        visits += 1
        if budgets[j]:
            m += budgets[j] * v
    return m, visits, edge_visits


def _argmin_subset(e: list[float], scratch: _Scratch, nodes: Iterable[int], target: int) -> frozenset[int]:
    return frozenset({target} | {j for j in nodes if j != target and scratch.get(j) == e[j]})


def dag_adjusted(e, g: GraphSpec, *, targets: Iterable[int] | None = None, argmin: bool = False) -> AdjustedResult:
    """Adjusted e-values on a DAG by backward search over each ancestor set.

    For target ``i`` the ancestors ``A_i`` are visited in reverse topological
    order and assigned ``e_j^(i) = min(e_j, sum_k q_jk e_k^(i))`` over
    children inside ``A_i``; then ``m_i = sum_j alpha_j e_j^(i)``.
    ``targets`` restricts the computation (others are left as NaN).
    Raises :class:`CycleError` if ``g`` has a cycle.
    """
    prob = validate_problem(e, g)
    g = prob.graph
    ev = list(prob.e)
    order = topological_order(g)
    position = {v: p for p, v in enumerate(order)}
    n = g.n
    scratch = _Scratch(n)
    m = np.full(n, np.nan)
    subsets: list[frozenset[int] | None] | None = [None] * n if argmin else None
    visits = edges = 0
    for i in range(n) if targets is None else targets:
        anc = sorted(ancestor_set(g, i), key=position.__getitem__, reverse=True)
        m[i], v, k = _assign(ev, g, i, anc, scratch)
        visits += v
        edges += k
        if argmin:
            subsets[i] = _argmin_subset(ev, scratch, anc, i)
    stats = {"node_visits": visits, "edge_visits": edges}
    return AdjustedResult.from_m(m, g.alpha, argmin_subsets=subsets, stats=stats)


def _reduced(g: GraphSpec, i: int) -> tuple[list[int], list[int] | None]:
    """Reverse topological order of ``G^(i)``, or ``(nodes, cycle)`` if it is cyclic."""
    nodes = ancestor_set(g, i)

    def succ(v):
        if v == i:
            return ()
        return (k for k, _ in g.children[v] if k in nodes)

    indeg = dict.fromkeys(nodes, 0)
    for v in nodes:
        for k in succ(v):
            indeg[k] += 1
    order = _kahn(sorted(nodes), succ, indeg)
    if len(order) < len(nodes):
        adj = {v: list(succ(v)) for v in nodes}
        return sorted(nodes), _find_cycle(g.n, adj, nodes)
    return order[::-1], None


def is_ildag(g: GraphSpec) -> ILDAGCheck:
    """Whether every reduced graph ``G^(i)`` is acyclic.

    ``G^(i)`` keeps the nodes with a path to ``i`` and drops the out-edges of
    ``i``. On failure the first offending ``i`` and a witness cycle are given.
    """
    for i in range(g.n):
        _, cycle = _reduced(g, i)
        if cycle is not None:
            return ILDAGCheck(False, i, tuple(cycle))
    return ILDAGCheck(True)


def ildag_adjusted(e, g: GraphSpec, *, argmin: bool = False) -> AdjustedResult:
    """Adjusted e-values on an index-local DAG.

    Runs the DAG recursion for each target on its reduced graph ``G^(i)``
    (ancestors only, target out-edges ignored). The whole graph is rejected
    with :class:`NotILDAG` if any reduced graph is cyclic.
    """
    prob = validate_problem(e, g)
    g = prob.graph
    ev = list(prob.e)
    n = g.n
    orders = {}
    for i in range(n):
        order, cycle = _reduced(g, i)
        if cycle is not None:
            raise NotILDAG(i, cycle)
        orders[i] = order
    scratch = _Scratch(n)
    m = np.empty(n)
    subsets: list[frozenset[int] | None] | None = [None] * n if argmin else None
    visits = edges = 0
    for i in range(n):
        m[i], v, k = _assign(ev, g, i, orders[i], scratch)
        visits += v
        edges += k
        if argmin:
            subsets[i] = _argmin_subset(ev, scratch, orders[i], i)
    stats = {"node_visits": visits, "edge_visits": edges}
    return AdjustedResult.from_m(m, g.alpha, argmin_subsets=subsets, stats=stats)


class TargetEvaluator:
    """Repeated evaluation of one target's adjusted e-value on a fixed graph.

    The reduced graph and its order are computed once; each call only runs
    the backward recursion. Inputs are not revalidated.
    """

    def __init__(self, g: GraphSpec, target: int):
        order, cycle = _reduced(g, target)
        if cycle is not None:
            raise NotILDAG(target, cycle)
        self.graph = g
        self.target = target
        self.order = order
        self._scratch = _Scratch(g.n)

    def m(self, e) -> float:
        return _assign([float(x) for x in e], self.graph, self.target, self.order, self._scratch)[0]

    def __call__(self, e) -> float:
        return self.m(e) / self.graph.alpha


def graph_adjusted(e, g: GraphSpec, **kw) -> AdjustedResult:
    """Dispatch to :func:`dag_adjusted` or :func:`ildag_adjusted` by graph shape."""
    try:
        topological_order(g)
    except CycleError:
        return ildag_adjusted(e, g, **kw)
    return dag_adjusted(e, g, **kw)
