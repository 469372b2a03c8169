import numpy as np
import pytest

from driftcal.adaptation import AdaptationConfig, AdaptedRun, Segment, adapt_dataset
from driftcal.cmapss_io import N_CHANNELS
from driftcal.labeling import (
    Standardizer,
    apply_standardizer,
    compute_ttd,
    fit_standardizer,
    make_windows,
    split_engines,
)
from driftcal.synthetic import synthetic_trajectories

from oracles import oracle_ttd_labels


def _run_with_segments(segments, length):
    return AdaptedRun(
        engine_id=1,
        drift_sensors=(1,),
        thresholds=(),
        segments=tuple(segments),
        channels=np.zeros((length, N_CHANNELS)),
        reset_events=(),
    )


# ---------------------------------------------------------------------------
# compute_ttd
# ---------------------------------------------------------------------------

def test_ttd_crossing_segment():
    run = _run_with_segments([Segment(1, 10, 7)], 10)
    values = compute_ttd(run).values
    assert values[2] == 4  # t=3 -> 7-3
    assert values[6] == 0  # t=7, at the crossing
    assert values[9] == 0  # after the crossing, still overdue


def test_ttd_crossing_free_final_segment():
    run = _run_with_segments([Segment(1, 10, None)], 10)
    values = compute_ttd(run).values
    assert values[3] == 6  # t=4 -> 10-4
    assert values[9] == 0


def test_ttd_countdown_is_exactly_one_per_cycle():
    run = _run_with_segments([Segment(1, 30, 18), Segment(31, 50, 44), Segment(51, 60, None)], 60)
    values = compute_ttd(run).values
    for seg in run.segments:
        stop = seg.crossing if seg.crossing is not None else seg.end
        for t in range(seg.start, stop):
            assert values[t - 1] - values[t] == 1


def test_ttd_matches_brute_force_oracle_on_adapted_runs():
    for seed in range(5):
        trajs = synthetic_trajectories(n_engines=5, seed=100 + seed, length_range=(80, 130))
        dataset = adapt_dataset(trajs, AdaptationConfig(), seed=seed)
        for run in dataset.runs:
            assert np.array_equal(compute_ttd(run).values, oracle_ttd_labels(run))


# ---------------------------------------------------------------------------
# make_windows
# ---------------------------------------------------------------------------

def _labelled_run(length):
    rng = np.random.default_rng(length)
    run = AdaptedRun(
        engine_id=2,
        drift_sensors=(1,),
        thresholds=(),
        segments=(Segment(1, length, None),),
        channels=rng.normal(size=(length, N_CHANNELS)),
        reset_events=(),
    )
    return run, compute_ttd(run)


def test_window_count_identity():
    run, ttd = _labelled_run(45)
    windows = make_windows(run, ttd, w=40, stride=1)
    assert len(windows) == 6
    assert [w.end_cycle for w in windows] == list(range(40, 46))


def test_run_shorter_than_window_gives_no_windows():
    run, ttd = _labelled_run(39)
    assert make_windows(run, ttd, w=40) == []


def test_stride_five():
    run, ttd = _labelled_run(45)
    windows = make_windows(run, ttd, w=40, stride=5)
    assert [w.end_cycle for w in windows] == [40, 45]


def test_window_labels_and_features_align():
    run, ttd = _labelled_run(50)
    for win in make_windows(run, ttd, w=10, stride=3):
        assert win.label == ttd.values[win.end_cycle - 1]
        assert np.array_equal(
            win.features, run.channels[win.end_cycle - 10 : win.end_cycle]
        )


def test_cross_reset_exclusion_flag():
    length = 60
    run = AdaptedRun(
        engine_id=3,
        drift_sensors=(1,),
        thresholds=(),
        segments=(Segment(1, 30, 30), Segment(31, 60, None)),
        channels=np.zeros((length, N_CHANNELS)),
        reset_events=(),
    )
    ttd = compute_ttd(run)
    spanning = make_windows(run, ttd, w=20, stride=1, allow_cross_reset=True)
    strict = make_windows(run, ttd, w=20, stride=1, allow_cross_reset=False)
    assert len(spanning) == 41
    # strict: windows ending in [20,30] fit segment 1, ending in [50,60] fit segment 2
    assert [w.end_cycle for w in strict] == list(range(20, 31)) + list(range(50, 61))


def test_window_count_identity_on_dataset(small_dataset):
    for run in small_dataset.runs:
        windows = make_windows(run, compute_ttd(run), w=40, stride=1)
        assert len(windows) == max(0, run.length - 40 + 1)


# ---------------------------------------------------------------------------
# split_engines
# ---------------------------------------------------------------------------

def test_split_100_engines_75_25():
    split = split_engines(range(1, 101), fraction=0.75, seed=0)
    assert len(split.train_engines) == 75
    assert len(split.val_engines) == 25


def test_split_rounding_4_engines():
    split = split_engines([1, 2, 3, 4], fraction=0.75, seed=0)
    assert len(split.train_engines) == 3
    assert len(split.val_engines) == 1


def test_split_deterministic_and_disjoint():
    ids = list(range(1, 41))
    a = split_engines(ids, seed=5)
    b = split_engines(ids, seed=5)
    assert a == b
    assert set(a.train_engines).isdisjoint(a.val_engines)
    assert sorted(a.train_engines + a.val_engines) == ids


def test_split_empty_side_rejected():
    with pytest.raises(ValueError):
        split_engines([1, 2], fraction=0.95, seed=0)
    with pytest.raises(ValueError):
        split_engines([1], fraction=0.5, seed=0)


# ---------------------------------------------------------------------------
# standardizer
# ---------------------------------------------------------------------------

def _random_windows(n=30, w=8, d=N_CHANNELS, seed=0, constant_channel=None):
    rng = np.random.default_rng(seed)
    run, ttd = _labelled_run(w + n)
    windows = make_windows(run, ttd, w=w, stride=1)[:n]
    if constant_channel is not None:
        for win in windows:
            win.features[:, constant_channel] = 3.14
    return windows


def test_fit_apply_self_normalizes():
    windows = _random_windows()
    std = fit_standardizer(windows)
    out = apply_standardizer(std, windows)
    stacked = np.concatenate([w.features for w in out], axis=0)
    assert np.abs(stacked.mean(axis=0)).max() < 1e-9
    assert np.abs(stacked.std(axis=0) - 1.0).max() < 1e-6


def test_constant_channel_floored_and_zeroed():
    windows = _random_windows(constant_channel=5)
    std = fit_standardizer(windows)
    assert std.std[5] == pytest.approx(1e-8)
    out = apply_standardizer(std, windows)
    assert all(np.all(w.features[:, 5] == 0.0) for w in out)


def test_train_stats_differ_from_val_stats():
    train = _random_windows(seed=1)
    val = [w for w in _random_windows(n=40, seed=2)[-10:]]
    # shift the validation distribution so the two transforms must differ
    for w in val:
        w.features[:] = w.features + 2.5
    train_std = fit_standardizer(train)
    val_std = fit_standardizer(val)
    with_train = np.concatenate([w.features for w in apply_standardizer(train_std, val)])
    with_own = np.concatenate([w.features for w in apply_standardizer(val_std, val)])
    assert not np.allclose(with_train, with_own)


def test_apply_has_no_side_effects():
    windows = _random_windows()
    std = fit_standardizer(windows)
    before = (std.mean.copy(), std.std.copy())
    apply_standardizer(std, windows)
    refit = fit_standardizer(windows)
    assert np.array_equal(refit.mean, before[0])
    assert np.array_equal(refit.std, before[1])


def test_fit_empty_rejected():
    with pytest.raises(ValueError):
        fit_standardizer([])


def test_leak_freedom_on_dataset(small_dataset):
    from driftcal.pipeline import label_and_window

    bundle = label_and_window(small_dataset, w=40, seed=3)
    train_ids = {w.engine_id for w in bundle.train_std}
    val_ids = {w.engine_id for w in bundle.val_std}
    assert train_ids.isdisjoint(val_ids)
    assert train_ids | val_ids == {run.engine_id for run in small_dataset.runs}
