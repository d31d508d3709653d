import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forests import as_model, random_forest
from oracles import auc_by_pairs, brute_shapley, node_tally
from tagscope.errors import MissingCover
from tagscope.explain import (
    SUBSETS,
    ablation,
    booster_base_value,
    permutation_importance,
    shap_matrix,
    shap_summary,
    shap_values,
    weight_importance,
)
from tagscope.gbdt import Booster, Params, Tree, forest_margin, train


def stump_model(feature=3, n_features=8, base=0.0):
    return as_model([Booster("y", base, [Tree.stump(feature, 0.5, -1.0, 1.0, 3.0, 1.0, gain=2.5)])], n_features)


# weight and gain


def test_weight_of_one_stump():
    rep = weight_importance(stump_model())
    assert rep.scores["f3"] == 1
    assert sum(rep.scores.values()) == 1
    assert weight_importance(stump_model(), kind="gain").scores["f3"] == 2.5


def test_empty_forest_has_zero_importance():
    rep = weight_importance(as_model([Booster("y", 0.0, [])], 5))
    assert rep.scores == {f"f{i}": 0 for i in range(5)}


def test_tally_matches_oracle():
    booster, _ = random_forest(21, n_features=30, n_trees=5)
    model = as_model([booster], 30)
    for kind in ("weight", "gain"):
        ours = weight_importance(model, kind=kind).scores
        ref = node_tally(booster.trees, 30, kind)
        assert [ours[f"f{i}"] for i in range(30)] == pytest.approx(ref)
    internal = sum(int(np.sum(t.feature >= 0)) for t in booster.trees)
    assert sum(weight_importance(model).scores.values()) == internal


def test_weight_for_one_label():
    m = as_model([Booster("a", 0.0, [Tree.stump(0, 0.0, 0, 1)]), Booster("b", 0.0, [Tree.stump(1, 0.0, 0, 1)])], 2)
    assert weight_importance(m, label="b").scores == {"f0": 0, "f1": 1}
    with pytest.raises(KeyError):
        weight_importance(m, label="c")


# permutation


def test_permutation_of_unused_feature_is_exactly_zero():
    rng = np.random.default_rng(0)
    X = rng.random((50, 8))
    Y = (X[:, 3] > 0.5).astype(int)[:, None]
    rep = permutation_importance(stump_model(), X, Y, repeats=3)
    for i in range(8):
        if i != 3:
            assert rep.scores[f"f{i}"] == 0.0 and rep.dispersion[f"f{i}"] == 0.0
    assert rep.scores["f3"] > 0


def test_permutation_hand_run_on_ten_rows():
    X = np.zeros((10, 8))
    X[:, 3] = np.arange(10) / 10.0
    y = (X[:, 3] > 0.45).astype(int)
    model = stump_model()
    rep = permutation_importance(model, X, y[:, None], repeats=3, seed=7)
    drops = []
    for r in range(3):
        perm = np.random.default_rng(7 + 3 * 1000003 + r).permutation(10)
        shuffled = X[perm, 3]
        scores = [1.0 if v >= 0.5 else -1.0 for v in shuffled]
        drops.append(1.0 - auc_by_pairs(scores, y))
    assert rep.extra["baseline"] == 1.0
    assert rep.scores["f3"] == pytest.approx(np.mean(drops), abs=1e-12)
    assert rep.dispersion["f3"] == pytest.approx(np.std(drops), abs=1e-12)


# SHAP


def test_shap_of_empty_forest():
    b = Booster("y", 0.3, [])
    phi, base = shap_matrix(b, np.ones((2, 4)))
    assert np.all(phi == 0) and base == 0.3


def test_shap_of_stump_closed_form():
    model = stump_model(base=0.2)
    e = shap_values(model, np.r_[np.zeros(3), 0.9, np.zeros(4)], "y")
    expected = (3.0 * -1.0 + 1.0 * 1.0) / 4.0
    assert e.base_value == pytest.approx(0.2 + expected)
    assert e.phi[3] == pytest.approx(1.0 - expected)
    assert np.count_nonzero(e.phi) == 1
    assert e.base_value + e.phi.sum() == pytest.approx(e.margin)


@pytest.mark.parametrize("seed", range(8))
def test_shap_matches_brute_force_enumeration(seed):
    booster, _ = random_forest(seed, n_features=12, max_distinct=6)
    x = np.random.default_rng(seed).normal(size=12)
    phi, base = shap_matrix(booster, x[None, :])
    ref, v_empty = brute_shapley(booster.trees, x, 12)
    np.testing.assert_allclose(phi[0], ref, atol=1e-9)
    assert base == pytest.approx(booster.base_score + v_empty, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_local_accuracy_and_dummy(seed):
    booster, pool = random_forest(seed, n_features=20, max_distinct=8)
    X = np.random.default_rng(seed).normal(size=(5, 20))
    phi, base = shap_matrix(booster, X)
    np.testing.assert_allclose(base + phi.sum(axis=1), forest_margin(booster.trees, booster.base_score, X), atol=1e-9)
    unused = np.setdiff1d(np.arange(20), pool)
    assert np.all(phi[:, unused] == 0)


def test_symmetric_features_get_equal_credit():
    a = Tree.stump(0, 0.0, -1.0, 2.0, 2.0, 3.0)
    b = Tree.stump(1, 0.0, -1.0, 2.0, 2.0, 3.0)
    phi, _ = shap_matrix(Booster("y", 0.0, [a, b]), np.array([[0.7, 0.7, 5.0]]))
    assert phi[0, 0] == phi[0, 1] and phi[0, 2] == 0


def test_shap_needs_cover():
    t = Tree.stump(0, 0.0, -1.0, 1.0)
    t.cover = np.zeros(3)
    with pytest.raises(MissingCover):
        shap_matrix(Booster("y", 0.0, [t]), np.zeros((1, 2)))


def test_base_value_is_cover_weighted():
    t = Tree.stump(0, 0.0, -2.0, 4.0, 1.0, 2.0)
    assert booster_base_value(Booster("y", 1.0, [t])) == pytest.approx(1.0 + (-2.0 + 8.0) / 3.0)


def test_shap_summary_samples_rows():
    booster, _ = random_forest(2, n_features=6, max_distinct=4)
    model = as_model([booster], 6)
    X = np.random.default_rng(0).normal(size=(50, 6))
    s = shap_summary(model, X, max_instances=20)
    assert s["n_instances"] == 20 and set(s["overall"]) == set(model.feature_names)
    assert s == shap_summary(model, X, max_instances=20)


def test_shap_on_trained_model():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 4))
    y = (X[:, 0] - X[:, 2] > 0).astype(int)
    m = train(X, y, Params(n_trees=10, max_depth=3))
    e = shap_values(m, X[0], 0)
    assert e.base_value + e.phi.sum() == pytest.approx(e.margin, abs=1e-9)


# ablation


def test_ablation_rows(planted):
    store, labels, _ = planted
    rep = ablation(store, labels, Params(n_trees=3, max_depth=2))
    assert [r["name"] for r in rep.rows] == ["harmonic", "midlevel", "signal", "harmonic+midlevel",
                                             "harmonic+signal", "midlevel+signal", "all"]
    assert [r["n_features"] for r in rep.rows] == [32, 7, 23, 39, 55, 30, 62]
    assert len(rep.rows) == len(SUBSETS)
    assert all(r["error"] is None and 0 <= r["metric"] <= 1 for r in rep.rows)
    assert len({r["params_hash"] for r in rep.rows}) == 7
    assert rep.metric_name == "macro_auc"
