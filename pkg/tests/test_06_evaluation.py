# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import json
import math

import numpy as np
import pandas as pd
import pytest

from fmpscore.dataset import Dataset, split
from fmpscore.errors import ConfigError, DomainError, EmptyInput, LengthMismatch, SingleClass
from fmpscore.evaluation import (
    ablation_study,
    auc,
    brier,
    calibration_curve,
    evaluate,
    expected_brier,
    match_labels,
    roc,
)


class TestConfig:
    """Constants for the evaluation tests."""

    CAL_PRED = [0.1, 0.1, 0.9, 0.9, 1.0]
    CAL_Y = [0, 1, 1, 1, 1]
    SEED = 5


def _pairwise_auc(pred, y):
    pos = [p for p, t in zip(pred, y) if t == 1]
    neg = [p for p, t in zip(pred, y) if t == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_brier():
    assert brier([0.5, 0.5], [1, 0]) == 0.25
    assert brier([1.0, 0.0], [1, 0]) == 0.0
    assert brier([0.0], [1]) == 1.0


@pytest.mark.parametrize("pred, y, error", [
    ([0.5, 0.5], [1], LengthMismatch),
    ([], [], EmptyInput),
    ([1.5], [1], DomainError),
    ([np.nan], [1], DomainError),
    ([0.5], [2], DomainError),
], ids=["length", "empty", "above-one", "nan", "label"])
def test_input_checks(pred, y, error):
    with pytest.raises(error):
        brier(pred, y)


def test_expected_brier():
    assert expected_brier([0.5] * 4) == (0.25, 0.0)
    assert expected_brier([0.0, 1.0]) == (0.0, 0.0)
    mean, std = expected_brier([0.1] * 100)
    assert mean == pytest.approx(0.09)
    assert std == pytest.approx(math.sqrt(100 * 0.09 * 0.64) / 100)


def test_calibration_curve():
    report = calibration_curve(TestConfig.CAL_PRED, TestConfig.CAL_Y, n_bins=10, min_count=1)
    assert [b.count for b in report.bins] == [0, 2, 0, 0, 0, 0, 0, 0, 0, 3]
    assert report.bins[1].mean_predicted == pytest.approx(0.1)
    assert report.bins[1].empirical_fraction == 0.5
    assert report.bins[9].mean_predicted == pytest.approx(2.8 / 3)
    assert math.isnan(report.bins[0].empirical_fraction)
    assert report.max_gap == pytest.approx(0.4)
    assert calibration_curve(TestConfig.CAL_PRED, TestConfig.CAL_Y, min_count=3).max_gap == \
        pytest.approx(1 - 2.8 / 3)
    assert math.isnan(calibration_curve(TestConfig.CAL_PRED, TestConfig.CAL_Y, min_count=10).max_gap)
    assert report.as_dict()["bins"][0]["empirical_fraction"] is None
    with pytest.raises(ConfigError):
        calibration_curve(TestConfig.CAL_PRED, TestConfig.CAL_Y, n_bins=1)


def test_roc():
    report = roc([0.9, 0.8, 0.4, 0.1], [1, 0, 1, 0])
    assert report.auc == 0.75
    assert report.points == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
    assert math.isinf(report.thresholds[0])
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.1, 0.9], [1, 0]) == 0.0
    tied = roc([0.5, 0.5], [1, 0])
    assert tied.auc == 0.5 and tied.points == [(0.0, 0.0), (1.0, 1.0)]
    with pytest.raises(SingleClass):
        roc([0.2, 0.3], [1, 1])


def test_auc_counts_ties_as_half():
    rng = np.random.default_rng(TestConfig.SEED)
    pred = rng.integers(0, 6, size=200) / 5
    y = (rng.random(200) < 0.3).astype(int)
    assert auc(pred, y) == pytest.approx(_pairwise_auc(pred.tolist(), y.tolist()), abs=1e-12)


def test_evaluate_and_exports(tmp_path):
    rng = np.random.default_rng(TestConfig.SEED)
    pred = rng.random(500)
    y = (rng.random(500) < pred).astype(int)
    report = evaluate(pred, y, n_bins=5, min_count=10)
    assert report.n == 500 and report.n_pos == int(y.sum())
    assert report.brier == brier(pred, y)
    assert report.auc == auc(pred, y)
    report.to_json(tmp_path / "report.json")
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["brier"] == report.brier
    assert len(data["calibration"]["bins"]) == 5
    report.write_points(tmp_path / "pts")
    assert len(pd.read_csv(tmp_path / "pts.calibration.csv")) == 5
    assert len(pd.read_csv(tmp_path / "pts.roc.csv")) == len(report.roc.fpr)
    report.write_gnuplot(tmp_path / "plot")
    lines = (tmp_path / "plot.roc.dat").read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "0 0"


def test_evaluate_single_class():
    report = evaluate([0.1, 0.2], [0, 0])
    assert report.roc is None and math.isnan(report.auc)
    assert report.as_dict()["auc"] is None


def _dataset(n=6, times=(100,)):
    ips = np.tile(np.arange(n), len(times))
    t0s = np.repeat(times, n)
    y = (ips % 2).astype(int)
    return Dataset("scan", np.zeros((len(ips), 58)), y, ips, t0s)


def test_match_labels():
    ds = _dataset()
    scores = pd.DataFrame({"ip": np.arange(6)[::-1], "t0": 100, "fmp": np.arange(6)[::-1] / 10})
    pred, y = match_labels(scores, ds)
    assert pred.tolist() == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert y.tolist() == [0, 1, 0, 1, 0, 1]
    with pytest.raises(LengthMismatch, match="no score"):
        match_labels(scores.iloc[:3], ds)
    with pytest.raises(LengthMismatch, match="more than once"):
        match_labels(pd.concat([scores, scores]), ds)
    two_times = _dataset(times=(100, 200))
    with pytest.raises(LengthMismatch, match="prediction times"):
        match_labels(scores.drop(columns="t0"), two_times)


def test_ablation_study():
    rng = np.random.default_rng(TestConfig.SEED)
    n = 300
    X = rng.random((n, 58))
    y = (X[:, 0] + X[:, 50] > 1.0).astype(int)
    train, test = split(Dataset("scan", X, y, np.arange(n), np.zeros(n)), test_fraction=0.3)
    table = ablation_study(train, test, kind="logreg", epochs=30)
    assert table["configuration"].tolist() == [
        "all", "without_other_category", "without_prefix", "without_rates", "without_tags",
        "same_category_only"]
    assert table["auc_drop"].iloc[0] == 0.0
    # Column 50 is a tag column and carries half of the signal
    drop = table.set_index("configuration")["auc_drop"]
    assert drop["without_tags"] > 0.02
    assert drop["without_prefix"] < drop["without_tags"]
