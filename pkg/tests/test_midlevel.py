import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagscope.errors import DegenerateDesign
from tagscope.midlevel import (
    MIDLEVEL_NAMES,
    POOLED_DIM,
    MidLevelModel,
    neutral_model,
    pool_mfcc,
    predict_midlevel,
    train_from_files,
    train_midlevel,
)

P = len(MIDLEVEL_NAMES)


def random_rows(seed, n=200, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, POOLED_DIM)) * rng.uniform(0.5, 3, POOLED_DIM) + rng.normal(size=POOLED_DIM)
    A = rng.normal(size=(POOLED_DIM, P)) * 0.01
    Y = X @ A + 0.5 + noise * rng.normal(size=(n, P))
    return X, Y


def augmented_ridge(X, Y, lam):
    """Ridge by least squares on [Z; sqrt(lam) I], intercept unpenalised via centring."""
    mu, sd = X.mean(axis=0), X.std(axis=0)
    Z = (X - mu) / sd
    ybar = Y.mean(axis=0)
    A = np.vstack([Z, math.sqrt(lam) * np.eye(Z.shape[1])])
    B = np.vstack([Y - ybar, np.zeros((Z.shape[1], Y.shape[1]))])
    W = np.linalg.lstsq(A, B, rcond=None)[0]
    return lambda Xn: ((Xn - mu) / sd) @ W + ybar


def test_pool_of_three_frames():
    r = np.linspace(-1, 1, 40)
    v = pool_mfcc(np.stack([r, 2 * r, 3 * r]))
    assert v.shape == (80,)
    np.testing.assert_allclose(v[:40], 2 * r, atol=1e-15)
    np.testing.assert_allclose(v[40:], np.abs(r) * math.sqrt(2 / 3), atol=1e-15)


def test_pool_single_frame_has_zero_std():
    v = pool_mfcc(np.ones((1, 40)))
    assert np.all(v[:40] == 1) and np.all(v[40:] == 0)


def test_constant_targets_give_constant_predictions():
    X, _ = random_rows(0)
    Y = np.tile(np.linspace(0.1, 0.7, P), (len(X), 1))
    m = train_midlevel(list(zip(X, Y)))
    np.testing.assert_allclose(m.predict_raw(X), Y, atol=1e-12)


def test_huge_lambda_predicts_means():
    X, Y = random_rows(1, noise=0.1)
    m = train_midlevel(list(zip(X, Y)), ridge_lambda=1e9)
    np.testing.assert_allclose(m.predict_raw(X), np.tile(Y.mean(axis=0), (len(X), 1)), atol=1e-3)


def test_noiseless_linear_targets_fit():
    X, Y = random_rows(2)
    m = train_midlevel(list(zip(X, Y)), ridge_lambda=1e-6)
    assert np.mean((m.predict_raw(X) - Y) ** 2) < 1e-6
    assert m.train_mse < 1e-6


def test_zero_weight_bias_half():
    for K in (np.zeros((5, 40)), np.random.default_rng(3).normal(size=(9, 40)) * 50):
        np.testing.assert_array_equal(predict_midlevel(neutral_model(), K), np.full(P, 0.5))


@pytest.mark.parametrize("lam", [0.0, 0.3, 10.0])
def test_agrees_with_augmented_least_squares(lam):
    X, Y = random_rows(4, noise=0.05)
    m = train_midlevel(list(zip(X, Y)), ridge_lambda=lam)
    Xn = random_rows(5, n=30)[0]
    np.testing.assert_allclose(m.predict_raw(Xn), augmented_ridge(X, Y, lam)(Xn), atol=1e-9)


def test_outputs_clamped():
    X, Y = random_rows(6)
    m = train_midlevel(list(zip(X, Y * 40 - 20)), ridge_lambda=0.0)
    out = predict_midlevel(m, np.random.default_rng(0).normal(size=(20, 40)) * 30)
    assert np.all((out >= 0) & (out <= 1))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100.0))
def test_unpenalised_fit_has_lowest_training_loss(seed, lam):
    X, Y = random_rows(seed, n=120, noise=0.3)
    rows = list(zip(X, Y))
    assert train_midlevel(rows, 0.0).train_mse <= train_midlevel(rows, lam).train_mse + 1e-12


def test_constant_input_column_gets_zero_weight():
    X, Y = random_rows(7)
    X[:, 5] = 3.0
    m = train_midlevel(list(zip(X, Y)))
    assert m.constant[5] and np.all(m.weights[5] == 0)
    assert np.all(np.isfinite(m.predict_raw(X)))


def test_degenerate_design_raised_for_too_few_rows():
    with pytest.raises(DegenerateDesign):
        train_midlevel([(np.zeros(POOLED_DIM), np.zeros(P))])


def test_collinear_design_warns_and_retries():
    X, Y = random_rows(8, n=40)
    X[:, 1] = 2 * X[:, 0]
    with pytest.warns(UserWarning, match="degenerate"):
        m = train_midlevel(list(zip(X, Y)), ridge_lambda=0.0)
    assert m.ridge_lambda > 0


def test_save_load_round_trip(tmp_path):
    X, Y = random_rows(9, noise=0.1)
    m = train_midlevel(list(zip(X, Y)))
    m.save(tmp_path / "m.json")
    back = MidLevelModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict_raw(X), m.predict_raw(X))


def test_train_from_synthetic_files(corpus):
    m = train_from_files(corpus / "midlevel" / "annotations.csv", corpus / "midlevel" / "clips")
    assert m.weights.shape == (POOLED_DIM, P)
    assert np.all(m.target_max >= m.target_min)
