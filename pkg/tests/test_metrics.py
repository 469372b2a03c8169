import numpy as np
import pytest

from driftcal.metrics import regression_metrics

from oracles import oracle_regression_metrics


def test_perfect_predictions():
    rep = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert rep.mae == 0.0
    assert rep.rmse == 0.0
    assert rep.r2 == pytest.approx(1.0)
    assert rep.n == 3


def test_constant_mean_prediction_gives_r2_zero():
    y = np.array([1.0, 2.0, 3.0, 6.0])
    rep = regression_metrics(y, np.full(4, y.mean()))
    assert rep.r2 == pytest.approx(0.0)


def test_hand_computed_case():
    rep = regression_metrics([0.0, 2.0], [1.0, 1.0])
    assert rep.mae == pytest.approx(1.0)
    assert rep.rmse == pytest.approx(1.0)
    assert rep.r2 == pytest.approx(0.0)  # SS_res = 2, SS_tot = 2


def test_zero_label_variance_marks_r2_undefined():
    rep = regression_metrics([5.0, 5.0, 5.0], [4.0, 5.0, 6.0])
    assert rep.r2 is None
    assert rep.mae == pytest.approx(2.0 / 3.0)


def test_length_mismatch_and_empty_rejected():
    with pytest.raises(ValueError):
        regression_metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        regression_metrics([], [])


def test_rmse_at_least_mae_on_random_series():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 30))
        y = rng.normal(size=n)
        yhat = rng.normal(size=n)
        rep = regression_metrics(y, yhat)
        assert rep.rmse >= rep.mae - 1e-12


def test_r2_shift_invariance():
    rng = np.random.default_rng(1)
    y = rng.normal(size=50)
    yhat = rng.normal(size=50)
    base = regression_metrics(y, yhat)
    shifted = regression_metrics(y + 13.7, yhat + 13.7)
    assert shifted.r2 == pytest.approx(base.r2, abs=1e-10)


def test_agreement_with_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        y = rng.normal(scale=10, size=n)
        yhat = y + rng.normal(size=n)
        rep = regression_metrics(y, yhat)
        mae, rmse, r2 = oracle_regression_metrics(y, yhat)
        assert rep.mae == pytest.approx(mae, abs=1e-12)
        assert rep.rmse == pytest.approx(rmse, abs=1e-12)
        assert rep.r2 == pytest.approx(r2, abs=1e-12)
