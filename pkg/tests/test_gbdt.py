import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forests import random_forest
from oracles import auc_by_pairs, forest_margin as oracle_margin, naive_boost
from tagscope import _accel
from tagscope.errors import DimensionMismatch, MissingCover, NumericFailure
from tagscope.gbdt import (
    BoostedModel,
    Booster,
    Params,
    Tree,
    evaluate,
    forest_margin,
    macro_auc,
    roc_auc,
    sigmoid,
    split_gain,
    train,
    training_loss_curve,
)
from tagscope.gbdt import _kernels
from tagscope.gbdt.metrics import classification_metrics, confusion_matrix, f1_scores
from tagscope.gbdt.model import _presort

FULL = dict(subsample=1.0, colsample=1.0)


def two_gaussians(seed, n=400, d=2):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(size=(n, d)) + np.where(y[:, None] == 1, 1.0, -1.0) * np.array([1.0] + [0.0] * (d - 1))
    return X, y


# split gain


def test_split_gain_value():
    assert split_gain(-2.0, 2.0, 2.0, 2.0, 1.0, 0.0) == pytest.approx(4 / 3, abs=1e-12)


def test_split_gain_of_zero_gradients_is_minus_gamma():
    assert split_gain(0.0, 3.0, 0.0, 5.0, 1.0, 0.7) == pytest.approx(-0.7)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 50), st.floats(-50, 50), st.floats(0, 50),
       st.floats(0.01, 10), st.floats(0, 5))
def test_split_gain_symmetric_and_bounded(GL, HL, GR, HR, lam, gamma):
    a = split_gain(GL, HL, GR, HR, lam, gamma)
    b = split_gain(GR, HR, GL, HL, lam, gamma)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 50), st.floats(-50, 50), st.floats(0.01, 50))
def test_unregularised_gain_is_non_negative(GL, HL, GR, HR):
    # Cauchy-Schwarz: with lambda = 0 a split never scores below no split
    assert split_gain(GL, HL, GR, HR, 0.0, 0.0) >= -1e-9 * (1 + abs(GL) + abs(GR)) ** 2


# training


def test_separable_data_single_stump():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = train(X, y, Params(n_trees=1, max_depth=1, min_child_weight=0.0, **FULL))
    t = m.boosters[0].trees[0]
    assert t.feature[0] == 0 and t.threshold[0] == 1.5
    assert t.leaf_value[t.left[0]] < 0 < t.leaf_value[t.right[0]]


def test_zero_trees_predict_positive_rate():
    y = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    m = train(np.random.default_rng(0).normal(size=(10, 3)), y, Params(n_trees=0))
    np.testing.assert_allclose(m.predict_proba(np.zeros((2, 3)))[:, 0], 0.2, atol=1e-12)


def test_matches_naive_newton_boosting():
    X, y = two_gaussians(0)
    params = Params(n_trees=10, max_depth=3, learning_rate=0.3, **FULL)
    ours = train(X, y, params).predict_margin(X)[:, 0]
    ref = naive_boost(X, y, 10, 3, lr=0.3)(X)
    assert abs(roc_auc(ours, y) - auc_by_pairs(ref, y)) < 0.02
    np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_loss_non_increasing_without_sampling():
    X, y = two_gaussians(1, n=300, d=4)
    m = train(X, y, Params(n_trees=40, max_depth=3, **FULL))
    curve = training_loss_curve(m, X, y)[0]
    assert len(curve) == 41
    assert np.all(np.diff(curve) <= 1e-12)


def test_deterministic_and_independent_of_jobs():
    X, _ = two_gaussians(2, n=300, d=6)
    Y = np.column_stack([X[:, 0] > 0, X[:, 1] + X[:, 2] > 0.5])
    a = train(X, Y, Params(n_trees=15, max_depth=4), jobs=1).dumps()
    b = train(X, Y, Params(n_trees=15, max_depth=4), jobs=1).dumps()
    c = train(X, Y, Params(n_trees=15, max_depth=4), jobs=3).dumps()
    assert a == b == c


def test_cover_of_children_sums_to_parent():
    X, y = two_gaussians(3, n=200, d=3)
    m = train(X, y, Params(n_trees=5, max_depth=4))
    for t in m.boosters[0].trees:
        for i in range(t.n_nodes):
            if not t.is_leaf(i):
                assert t.cover[i] == pytest.approx(t.cover[t.left[i]] + t.cover[t.right[i]], rel=1e-12)
                assert t.gain[i] > 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_probabilities_strictly_inside_unit_interval(seed):
    X, y = two_gaussians(seed, n=60, d=2)
    p = train(X, y, Params(n_trees=5, max_depth=2)).predict_proba(X * 100)
    assert np.all((p > 0) & (p < 1))


def test_noise_column_barely_changes_auc():
    rng = np.random.default_rng(4)
    X, y = two_gaussians(4, n=1000, d=3)
    Xn = np.column_stack([X, rng.normal(size=1000)])
    params = Params(n_trees=30, max_depth=3)
    a = roc_auc(train(X[:800], y[:800], params).predict_margin(X[800:])[:, 0], y[800:])
    b = roc_auc(train(Xn[:800], y[:800], params).predict_margin(Xn[800:])[:, 0], y[800:])
    assert abs(a - b) < 0.03


def test_single_class_label_warns_and_keeps_base():
    X = np.random.default_rng(0).normal(size=(20, 2))
    with pytest.warns(UserWarning, match="single class"):
        m = train(X, np.zeros(20), Params(n_trees=3))
    assert m.boosters[0].trees == [] and m.boosters[0].base_score == -10.0


def test_non_finite_loss_raises(monkeypatch):
    X, y = two_gaussians(5, n=40)
    monkeypatch.setattr("tagscope.gbdt.model.logloss", lambda *_: float("nan"))
    with pytest.raises(NumericFailure):
        train(X, y, Params(n_trees=2))


# prediction


def test_empty_forest_margin_is_base():
    X = np.random.default_rng(0).normal(size=(5, 3))
    np.testing.assert_array_equal(forest_margin([], -0.4, X), np.full(5, -0.4))


def test_stump_trace():
    t = Tree.stump(1, 0.5, -1.0, 2.0)
    X = np.array([[9.0, 0.4], [9.0, 0.5], [9.0, 0.6]])
    np.testing.assert_array_equal(forest_margin([t], 0.25, X), [-0.75, 2.25, 2.25])


def test_forest_agrees_with_recursive_walk():
    booster, pool = random_forest(11, n_features=8, n_trees=3, max_depth=4)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 8))
    ours = forest_margin(booster.trees, booster.base_score, X)
    for x, v in zip(X, ours):
        assert abs(v - oracle_margin(booster.base_score, booster.trees, x)) <= 1e-12


def test_dimension_mismatch():
    m = BoostedModel([Booster("a", 0.0, [])], Params(), ["x", "y"])
    with pytest.raises(DimensionMismatch):
        m.predict_margin(np.zeros((3, 5)))


def test_model_round_trip_and_missing_cover(tmp_path):
    X, y = two_gaussians(6, n=80)
    m = train(X, y, Params(n_trees=4, max_depth=2))
    m.save(tmp_path / "m.json")
    back = BoostedModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict_margin(X), m.predict_margin(X))
    d = json.loads((tmp_path / "m.json").read_text())
    del d["labels"][0]["trees"][0]["cover"]
    with pytest.raises(MissingCover):
        BoostedModel.from_dict(d)


def test_sigmoid_is_stable():
    z = np.array([-1000.0, 0.0, 1000.0])
    np.testing.assert_array_equal(sigmoid(z), [0.0, 0.5, 1.0])


# kernels


@pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba disabled")
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_numba_and_numpy_scans_agree(seed):
    rng = np.random.default_rng(seed)
    n, d, k = 120, 5, 3
    X = np.round(rng.normal(size=(n, d)), 1)
    order, sx = _presort(X)
    node = rng.integers(-1, k, n).astype(np.int64)
    g, h = rng.normal(size=n), rng.uniform(0.05, 0.25, n)
    G = np.array([g[node == i].sum() for i in range(k)])
    H = np.array([h[node == i].sum() for i in range(k)])
    feats = np.arange(d, dtype=np.int64)
    a = _kernels.split_scan_numba(sx, order, node, g, h, G, H, feats, 1.0, 0.0, 0.5)
    b = _kernels.split_scan_numpy(sx, order, node, g, h, G, H, feats, 1.0, 0.0, 0.5)
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[2], b[2])
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)


@pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba disabled")
def test_numba_and_numpy_predict_agree():
    booster, pool = random_forest(3, n_features=10, n_trees=20)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 10))
    from tagscope.gbdt.model import _flatten
    arrays = _flatten(booster.trees)
    a = _kernels.predict_forest_numba(X, *arrays, booster.base_score)
    b = _kernels.predict_forest_numpy(X, *arrays, booster.base_score)
    np.testing.assert_array_equal(a, b)


def test_pure_numpy_path_trains_identical_model():
    script = textwrap.dedent("""
        import hashlib, numpy as np
        from tagscope import _accel
        from tagscope.gbdt import Params, train
        rng = np.random.default_rng(0)
        X = rng.normal(size=(150, 4))
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
        m = train(X, y, Params(n_trees=5, max_depth=3))
        print(_accel.USE_NUMBA, hashlib.sha256(m.dumps().encode()).hexdigest())
    """)
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, TAGSCOPE_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        out[flag] = res.stdout.split()
    assert out["1"][0] == "False"
    assert out["0"][1] == out["1"][1]


# metrics


def test_auc_examples():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_auc_matches_pair_count(pairs):
    scores = [s for s, _ in pairs]
    labels = [y for _, y in pairs]
    if all(labels) or not any(labels):
        return
    assert roc_auc(scores, labels) == pytest.approx(auc_by_pairs(scores, labels), abs=1e-12)


def test_macro_auc_excludes_single_class_labels():
    S = np.array([[0.1, 0.2, 0.3], [0.9, 0.4, 0.1], [0.8, 0.6, 0.2], [0.2, 0.8, 0.9]])
    Y = np.array([[0, 0, 1], [1, 1, 1], [1, 0, 1], [0, 1, 1]])
    macro, per, excluded = macro_auc(S, Y, ["a", "b", "c"])
    assert per == {"a": 1.0, "b": 0.75} and excluded == ["c"]
    assert macro == pytest.approx(0.875)


def test_confusion_and_f1():
    true = [0, 0, 0, 1, 1, 1]
    pred = [0, 0, 1, 1, 1, 1]
    cm = confusion_matrix(true, pred, 2)
    np.testing.assert_array_equal(cm, [[2, 1], [0, 3]])
    np.testing.assert_allclose(f1_scores(cm), [0.8, 6 / 7])
    Y = np.eye(2)[true]
    margins = np.eye(2)[pred]
    m = classification_metrics(margins, Y, ["a", "b"], "multiclass")
    assert m.accuracy == pytest.approx(5 / 6) and m.per_class_f1["a"] == pytest.approx(0.8)


def test_evaluate_model():
    X, y = two_gaussians(7, n=200)
    m = train(X, y, Params(n_trees=10, max_depth=2))
    met = evaluate(m, X, y[:, None])
    assert 0.5 < met.macro_auc <= 1.0 and met.n_rows == 200
