import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from efwer import graphs
from efwer.core import GraphSpec, TooLarge
from efwer.oracle import (
    brute_force_adjusted_e,
    brute_force_closure,
    brute_force_p_closure,
    dag_path_weights,
    e_local,
    gray_code_subsets,
    hitting_weights,
    local_test,
)
from efwer.pgraph import e_to_p

from conftest import ALPHA, assert_rel_close, seeds


def test_two_node_path_weight():
    g = GraphSpec.from_edges(2, [(0, 1, 1.0)], [0.025, 0.025], 0.05)
    assert hitting_weights(g, {1}) == pytest.approx({1: 1.0})


def test_complete_graph_weights_are_uniform():
    g = graphs.holm_graph(3, 0.05)
    assert hitting_weights(g, {0, 1}) == pytest.approx({0: 0.5, 1: 0.5})


def test_full_set_weights_are_budget_shares(rng):
    g = graphs.random_graph(rng, 6)
    w = hitting_weights(g, range(6))
    assert [w[i] for i in range(6)] == pytest.approx((g.budgets / g.alpha).tolist())


def test_closed_cycle_outside_subset_is_not_singular():
    # 1 <-> 2 traps mass forever; weights of {3} must still be finite.
    g = GraphSpec.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)], [0.02, 0.02, 0.01], 0.05)
    assert hitting_weights(g, {2}) == pytest.approx({2: 0.2})


def test_local_e_values_on_holm_graph():
    e = [25.0, 25.0, 10.0]
    g = graphs.holm_graph(3, ALPHA)
    assert e_local(e, hitting_weights(g, {0, 1, 2})) == pytest.approx(20.0)
    assert e_local(e, hitting_weights(g, {0, 2})) == pytest.approx(17.5)
    assert e_local(e, hitting_weights(g, {1})) == 25.0


def test_oracle_examples():
    g = graphs.holm_graph(3, ALPHA)
    res = brute_force_adjusted_e([25.0, 25.0, 10.0], g)
    assert_rel_close(res.adjusted, [17.5, 17.5, 10.0], 1e-12)
    assert res.argmin_subsets == [frozenset({0, 2}), frozenset({1, 2}), frozenset({2})]
    assert brute_force_adjusted_e([7.0], graphs.holm_graph(1, ALPHA)).adjusted.tolist() == [7.0]
    chain = graphs.chain_graph([0.02, 0.02, 0.01], ALPHA)
    assert_rel_close(brute_force_adjusted_e([10.0, 30.0, 5.0], chain).adjusted, [4.0, 16.0, 5.0], 1e-12)


def test_p_closure_examples():
    g = graphs.holm_graph(3, ALPHA)
    assert brute_force_p_closure(e_to_p([25.0, 25.0, 10.0]), g) == set()
    assert brute_force_p_closure([0.001], graphs.holm_graph(1, ALPHA)) == {0}
    assert brute_force_p_closure([1.0, 1.0, 1.0], g) == set()


def test_size_guard():
    with pytest.raises(TooLarge):
        brute_force_adjusted_e(np.ones(4), graphs.holm_graph(4, ALPHA), max_n=3)


def test_gray_code_covers_every_subset_once():
    subsets = list(gray_code_subsets(5))
    assert len(subsets) == 31 == len(set(subsets))
    assert all(len(a ^ b) == 1 for a, b in zip(subsets, subsets[1:]))


def test_local_test_rejects_at_level():
    lt = local_test([26.0, 25.0, 10.0], graphs.holm_graph(3, ALPHA), {0, 1, 2})
    assert lt.e_value == pytest.approx(61 / 3)
    assert lt.rejects(ALPHA)
    assert not lt.rejects(0.045)


@given(seed=seeds, n=st.integers(1, 7))
def test_weights_are_subprobabilities(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_graph(rng, n)
    subset = {i for i in range(n) if rng.random() < 0.5} or {0}
    w = hitting_weights(g, subset)
    assert set(w) == subset
    assert all(v >= -1e-15 for v in w.values())
    assert sum(w.values()) <= 1 + 1e-9


@given(seed=seeds, n=st.integers(2, 6))
def test_weights_are_monotone_in_the_subset(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_graph(rng, n)
    big = {i for i in range(n) if rng.random() < 0.7} | {0}
    small = {i for i in big if rng.random() < 0.5} | {0}
    wb, ws = hitting_weights(g, big), hitting_weights(g, small)
    assert all(wb[i] <= ws[i] + 1e-9 for i in small)


@given(seed=seeds, n=st.integers(1, 7))
def test_linear_solve_matches_path_sums_on_dags(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_dag(rng, n)
    for r in range(1, n + 1):
        for subset in itertools.combinations(range(n), r):
            a, b = hitting_weights(g, subset), dag_path_weights(g, subset)
            assert_rel_close([a[i] for i in subset], [b[i] for i in subset], 1e-9)


@given(seed=seeds, n=st.integers(1, 7))
def test_adjusted_is_the_minimum_over_subsets(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_graph(rng, n)
    e = graphs.random_evalues(rng, n)
    res = brute_force_adjusted_e(e, g)
    for i, subset in enumerate(res.argmin_subsets):
        assert i in subset
        assert_rel_close(e_local(e, hitting_weights(g, subset)), res.adjusted[i], 1e-12)
    for subset in gray_code_subsets(n):
        val = e_local(e, hitting_weights(g, subset))
        assert all(res.adjusted[i] <= val * (1 + 1e-12) for i in subset)


@given(seed=seeds, n=st.integers(1, 7))
def test_e_closure_dominates_p_closure(seed, n):
    rng = np.random.default_rng(seed)
    g = graphs.random_graph(rng, n)
    e = graphs.random_evalues(rng, n)
    assert brute_force_p_closure(e_to_p(e), g) <= brute_force_closure(e, g)
