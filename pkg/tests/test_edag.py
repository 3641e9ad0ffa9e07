import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from efwer import graphs
from efwer.core import CycleError, GraphSpec
from efwer.edag import NotILDAG, TargetEvaluator, dag_adjusted, graph_adjusted, ildag_adjusted, is_ildag
from efwer.efallback import fallback_stack
from efwer.oracle import brute_force_adjusted_e, e_local, hitting_weights, path_assignment

from conftest import ALPHA, assert_rel_close, seeds


def _diamond():
    return GraphSpec.from_edges(4, [(0, 1, 0.5), (0, 2, 0.5), (1, 3, 1.0), (2, 3, 1.0)], [0.0125] * 4, ALPHA)


def test_chain_reduces_to_fallback():
    g = graphs.chain_graph([0.02, 0.02, 0.01], ALPHA)
    res = dag_adjusted([10.0, 30.0, 5.0], g)
    assert_rel_close(res.adjusted, [4.0, 16.0, 5.0], 1e-15)
    assert_rel_close(res.m, fallback_stack([10.0, 30.0, 5.0], [0.02, 0.02, 0.01]), 1e-15)


def test_diamond():
    res = dag_adjusted([8.0, 2.0, 6.0, 4.0], _diamond(), argmin=True)
    assert_rel_close(res.adjusted, [2.0, 0.75, 2.25, 3.25], 1e-15)
    assert res.stats["node_visits"] == 1 + 2 + 2 + 4


def test_cyclic_graph_is_refused():
    g = graphs.cyclic_fallback_graph([0.02, 0.02, 0.01], ALPHA)
    with pytest.raises(CycleError):
        dag_adjusted([1.0, 2.0, 3.0], g)


def test_targets_subset():
    res = dag_adjusted([8.0, 2.0, 6.0, 4.0], _diamond(), targets=[3])
    assert np.isnan(res.adjusted[:3]).all()
    assert_rel_close(res.adjusted[3], 3.25)


def test_ildag_recognition():
    assert is_ildag(graphs.cyclic_fallback_graph([0.02, 0.02, 0.01], ALPHA))
    assert is_ildag(graphs.gatekeeper_graph(alpha=ALPHA))
    assert is_ildag(_diamond())
    bad = GraphSpec.from_edges(3, [(0, 1, 0.5), (1, 0, 0.5), (1, 2, 0.5)], [0.02, 0.02, 0.01], ALPHA)
    check = is_ildag(bad)
    assert not check
    assert check.node == 2 and sorted(check.cycle) == [0, 1]
    with pytest.raises(NotILDAG):
        ildag_adjusted([1.0, 1.0, 1.0], bad)


def test_cyclic_fallback_example():
    g = graphs.cyclic_fallback_graph([0.02, 0.02, 0.01], ALPHA)
    res = ildag_adjusted([10.0, 30.0, 5.0], g)
    assert res.adjusted[2] == 5.0
    assert_rel_close(res.adjusted, brute_force_adjusted_e([10.0, 30.0, 5.0], g).adjusted)


def test_target_evaluator_matches_batch(rng):
    g = graphs.gatekeeper_graph(alpha=ALPHA)
    e = graphs.random_evalues(rng, 4)
    batch = ildag_adjusted(e, g).adjusted
    for i in range(4):
        assert_rel_close(TargetEvaluator(g, i)(e), batch[i], 1e-15)


def test_dispatch(rng):
    e = graphs.random_evalues(rng, 5)
    dag = graphs.random_dag(rng, 5)
    cyc = graphs.random_cyclic_fallback(rng, 5)
    assert_rel_close(graph_adjusted(e, dag).adjusted, dag_adjusted(e, dag).adjusted, 0)
    assert_rel_close(graph_adjusted(e, cyc).adjusted, ildag_adjusted(e, cyc).adjusted, 0)


@given(seed=seeds, n=st.integers(1, 8))
def test_dag_matches_oracle(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_dag(rng, n)
    e = graphs.random_evalues(rng, n)
    assert_rel_close(dag_adjusted(e, g).adjusted, brute_force_adjusted_e(e, g).adjusted)


@given(seed=seeds, n=st.integers(1, 8), gate=st.booleans())
def test_ildag_matches_oracle(seed, n, gate):
    rng = np.random.default_rng(seed)
    g = graphs.random_gatekeeper(rng, k=max(1, n // 2)) if gate else graphs.random_cyclic_fallback(rng, n)
    e = graphs.random_evalues(rng, g.n)
    assert_rel_close(ildag_adjusted(e, g).adjusted, brute_force_adjusted_e(e, g).adjusted)


@given(seed=seeds, n=st.integers(1, 7))
def test_argmin_subset_attains_minimum(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_dag(rng, n)
    e = graphs.random_evalues(rng, n)
    res = dag_adjusted(e, g, argmin=True)
    for i, subset in enumerate(res.argmin_subsets):
        assert i in subset
        assert_rel_close(e_local(e, hitting_weights(g, subset)), res.adjusted[i])


@given(seed=seeds, n=st.integers(1, 7))
def test_local_value_equals_path_assignment(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_dag(rng, n)
    e = graphs.random_evalues(rng, n)
    subset = {i for i in range(n) if rng.random() < 0.5} or {n - 1}
    assigned = path_assignment(e, g, subset)
    lhs = e_local(e, hitting_weights(g, subset)) * ALPHA
    assert_rel_close(lhs, float(np.dot(g.budgets, assigned)))


@given(seed=seeds, n=st.integers(1, 30))
def test_scratch_reuse_does_not_leak(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_dag(rng, n)
    e = graphs.random_evalues(rng, n)
    once = dag_adjusted(e, g).adjusted
    each = [dag_adjusted(e, g, targets=[i]).adjusted[i] for i in range(n)]
    assert_rel_close(once, each, 0)
