import json
import math

import numpy as np
import pytest

from efwer import graphs
from efwer.core import GraphSpec
from efwer.seqsim import (
    ExperimentConfig,
    FactorialDesign,
    IncompleteBlock,
    MartingalePanel,
    cell_means,
    contrast_coefficients,
    dag_replication,
    factorial_contrast,
    holm_replication,
    manifest,
    metrics_csv,
    metrics_rows,
    rng_stream,
    run_dag_experiment,
    run_holm_experiment,
    sprt_update,
)


def test_sprt_examples():
    assert sprt_update(1.0, 0.5, 1.0) == 1.0
    assert sprt_update(3.0, -7.0, 0.0) == 3.0
    assert sprt_update(1.0, 2.0, 2.0) == pytest.approx(math.exp(2))


def test_panel_tracks_maxima():
    panel = MartingalePanel(2)
    assert panel.values.tolist() == [1.0, 1.0]
    panel.update([2.0, -2.0], [1.0, 1.0])
    panel.update([-2.0, 2.0], [1.0, 1.0])
    assert np.all(panel.maxima >= panel.values)
    assert np.all(panel.values > 0)
    assert panel.t == 2
    assert panel.values == pytest.approx([math.exp(-1), math.exp(-1)])


@pytest.mark.parametrize("target, var", [((1,), 2), ((1, 3), 4), ((1, 2, 3), 8), ((2,), 2)])
def test_contrast_variances(target, var):
    coef, v = contrast_coefficients(target)
    assert v == var
    assert np.count_nonzero(coef) == var
    assert coef.sum() == 0


def test_contrast_examples():
    block = {format(c, "03b"): float(c * c) for c in range(8)}
    y = np.array([c * c for c in range(8)], dtype=float)
    assert factorial_contrast(block, (1,)) == (y[0b100] - y[0b000], 2.0)
    val, _ = factorial_contrast(block, "13")
    assert val == y[0b101] - y[0b100] - y[0b001] + y[0b000]
    val, _ = factorial_contrast(y, (1, 2, 3))
    signs = [(-1) ** (3 - bin(c).count("1")) for c in range(8)]
    assert val == pytest.approx(float(np.dot(signs, y)))


def test_contrast_isolates_coefficient():
    betas = {(1,): 0.3, (2,): -0.2, (3,): 0.7, (1, 2): 0.1, (1, 3): 0.9, (2, 3): -0.4, (1, 2, 3): 0.25}
    means = cell_means(betas)
    for t, b in betas.items():
        assert factorial_contrast(means, t)[0] == pytest.approx(b)


def test_incomplete_block():
    with pytest.raises(IncompleteBlock):
        factorial_contrast({"000": 1.0, "100": 2.0}, (1,))
    with pytest.raises(IncompleteBlock):
        factorial_contrast(np.ones(7), (1,))


def test_rng_streams():
    a = rng_stream(9, 1, 0, 3).standard_normal(5)
    b = rng_stream(9, 1, 0, 3).standard_normal(5)
    c = rng_stream(9, 1, 0, 4).standard_normal(5)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(seed=0, m=0)
    with pytest.raises(ValueError):
        ExperimentConfig(seed=0, mu_alts=(0.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(seed=0, budget="lopsided")


def test_null_martingale_has_unit_mean():
    rng = np.random.default_rng(4)
    y = rng.standard_normal((20_000, 10))
    s = np.exp((1.0 * y - 0.5).sum(axis=1))
    sd = s.std() / math.sqrt(s.size)
    assert abs(s.mean() - 1.0) <= 3 * sd


def test_holm_invariants_small():
    res = run_holm_experiment(ExperimentConfig(seed=11, m=40))
    for v in res.values():
        assert v["checks"]["T_e<=T_p"] and v["checks"]["T_p==T_ep"]
        st = v["times"]
        assert np.all(st.t_e >= 1)


def test_holm_replication_is_deterministic():
    mu = np.r_[np.full(5, 1.0), np.zeros(15)]
    a = holm_replication(rng_stream(1, 1, 0, 0), mu, 1.0, 0.05, 2000)
    b = holm_replication(rng_stream(1, 1, 0, 0), mu, 1.0, 0.05, 2000)
    assert a == b


def test_holm_cap_is_recorded():
    t = holm_replication(rng_stream(1, 9), np.zeros(20), 1.0, 0.05, 3)
    assert t == (None, None, None)


def test_dag_invariants_small():
    res = run_dag_experiment(ExperimentConfig(seed=5, m=15, budget="equal"))
    for v in res.values():
        assert v["checks"]["T_e<=T_ep"]
        assert len([k for k in v["metrics"] if k.startswith(("P(", "E["))]) == 5


def test_single_hypothesis_design_ties_e_and_ep():
    g = GraphSpec.from_edges(1, [], [0.05], 0.05)
    design = FactorialDesign(g, nodes=((1, 3),), target=(1, 3))
    means = cell_means({(1, 3): 1.0})
    for r in range(10):
        t_e, _, t_ep = dag_replication(rng_stream(2, r), design, means, np.array([np.nan]), 0.05, 2000)
        assert t_e == t_ep


def test_primary_budget_gates_through_primaries():
    g = graphs.factorial_graph(0.05, "primary")
    assert g.budgets[:3] == pytest.approx([0.05 / 3] * 3)
    assert g.budgets[3:].tolist() == [0.0] * 4
    assert graphs.factorial_graph(0.05, "equal").budgets == pytest.approx([0.05 / 7] * 7)


def test_replication_order_does_not_matter():
    mu = np.r_[np.full(5, 2.0), np.zeros(15)]
    fwd = [holm_replication(rng_stream(3, 1, 0, r), mu, 2.0, 0.05, 2000) for r in range(10)]
    rev = [holm_replication(rng_stream(3, 1, 0, r), mu, 2.0, 0.05, 2000) for r in reversed(range(10))]
    assert fwd == rev[::-1]


def test_outputs():
    cfg = ExperimentConfig(seed=3, m=5, mu_alts=(2.0,))
    rows = metrics_rows("holm", None, run_holm_experiment(cfg))
    text = metrics_csv(rows)
    assert text.splitlines()[0] == "experiment,budget,mu_alt,metric,value"
    assert text == metrics_csv(metrics_rows("holm", None, run_holm_experiment(cfg)))
    doc = json.loads(manifest(cfg, "holm"))
    assert doc["seed"] == 3 and doc["config"]["m"] == 5
    assert "numpy" in doc["versions"]


def test_grid_point_results_do_not_depend_on_the_grid():
    alone = run_holm_experiment(ExperimentConfig(seed=2, m=20, mu_alts=(1.5,)))[1.5]["metrics"]
    grid = run_holm_experiment(ExperimentConfig(seed=2, m=20, mu_alts=(0.5, 1.5)))[1.5]["metrics"]
    assert alone == grid
