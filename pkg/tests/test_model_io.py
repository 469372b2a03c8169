"""Model container, serialization guards, and explicit prediction clipping."""

import numpy as np
import pytest

from driftcal.labeling import Standardizer
from driftcal.models import ForecastModel, load_model, predict_ttd, save_model


def _constant_linear_model(intercept, w=2, d=3):
    """A linear model with zero coefficients: raw output == intercept."""
    return ForecastModel(
        kind="linear",
        params={"coef": np.zeros(w * d), "intercept": np.array([float(intercept)])},
        window=w,
        n_channels=d,
        meta={"ridge": 0.0},
    )


@pytest.mark.parametrize("raw,expected", [(-3.2, 0.0), (0.0, 0.0), (17.5, 17.5)])
def test_predict_clips_raw_output(raw, expected):
    model = _constant_linear_model(raw)
    assert predict_ttd(model, np.zeros((2, 3))) == expected


def test_perfect_pseudo_model_scores_mae_zero():
    # evaluation of an exact predictor: MAE 0, R^2 = 1
    from driftcal.labeling import LabeledWindow
    from driftcal.pipeline import evaluate_forecaster
    from driftcal.models import fit_linear

    rng = np.random.default_rng(0)
    windows = []
    for i in range(30):
        label = int(rng.integers(0, 50))
        feats = rng.normal(size=(2, 3))
        feats[0, 0] = float(label)
        windows.append(LabeledWindow(features=feats, label=label, engine_id=1,
                                     segment_id=0, end_cycle=i + 2))
    oracle_model = fit_linear(windows, ridge=1e-12)
    report, y, yhat = evaluate_forecaster(oracle_model, windows)
    assert report.mae == pytest.approx(0.0, abs=1e-7)
    assert report.r2 == pytest.approx(1.0, abs=1e-9)
    assert len(y) == len(windows)


def test_save_refuses_non_finite_parameters(tmp_path):
    model = _constant_linear_model(1.0)
    model.params["coef"][0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        save_model(model, tmp_path / "m.bin")


def test_roundtrip_preserves_standardizer(tmp_path):
    model = _constant_linear_model(4.0)
    model.standardizer = Standardizer(
        mean=np.array([1.0, 2.0, 3.0]), std=np.array([0.5, 1.5, 2.5])
    )
    save_model(model, tmp_path / "m.bin")
    loaded = load_model(tmp_path / "m.bin")
    assert np.array_equal(loaded.standardizer.mean, model.standardizer.mean)
    assert np.array_equal(loaded.standardizer.std, model.standardizer.std)
    assert loaded.kind == "linear"
    assert loaded.window == 2 and loaded.n_channels == 3
    window = np.array([[1.0, 2.0, 3.0], [1.5, 3.5, 5.5]])
    assert predict_ttd(loaded, window) == predict_ttd(model, window)


def test_windows_csv_dump(tmp_path):
    from driftcal.labeling import LabeledWindow, windows_to_csv
    from driftcal.util import read_csv

    rng = np.random.default_rng(1)
    windows = [
        LabeledWindow(features=rng.normal(size=(3, 2)), label=i, engine_id=4,
                      segment_id=0, end_cycle=i + 3)
        for i in range(5)
    ]
    path = tmp_path / "windows.csv"
    windows_to_csv(windows, path)
    header, rows = read_csv(path)
    assert header[:4] == ["engine_id", "segment_id", "end_cycle", "label"]
    assert len(header) == 4 + 6
    assert len(rows) == 5
    # feature cells round-trip exactly
    assert float(rows[0][4]) == windows[0].features[0, 0]
