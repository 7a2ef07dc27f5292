# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (ConfigError, DomainError, EmptyInput, IoError, LengthMismatch,
                     SingleClass)
from .features import ABLATION_GROUPS
from .model import fmp_score
from .model import train as train_model

DEFAULT_N_BINS = 10
DEFAULT_MIN_COUNT = 50


def _check(pred, y):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    y = np.asarray(y).ravel()
    if len(pred) != len(y):
        raise LengthMismatch(f"{len(pred)} predictions for {len(y)} labels.")
    if len(pred) == 0:
        raise EmptyInput("No predictions to evaluate.")
    if np.any(np.isnan(pred)) or np.any(pred < 0) or np.any(pred > 1):
        raise DomainError("Predictions must be probabilities in [0, 1].")
    if np.any((y != 0) & (y != 1)):
        raise DomainError("Labels must be 0 or 1.")
    return pred, y.astype(np.float64)


def _nan_to_none(value):
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


def brier(pred, y):
    """
    Brier score: mean squared difference between predicted probabilities and
    binary outcomes.

    Examples
    --------
    >>> brier([0.5, 0.5], [1, 0])
    0.25
    """
    pred, y = _check(pred, y)
    return float(np.mean((pred - y) ** 2))


def expected_brier(pred):
    """
    Mean and standard deviation of the Brier score of ``pred`` when the
    outcomes are drawn as ``y_i ~ Bernoulli(pred_i)``.

    Returns
    -------
    tuple of float
        ``(mean(p (1 - p)), std)``.
    """
    p = np.asarray(pred, dtype=np.float64).ravel()
    if len(p) == 0:
        raise EmptyInput("No predictions.")
    var = p * (1 - p)
    term_var = var * (1 - 2 * p) ** 2
    return float(np.mean(var)), float(math.sqrt(np.sum(term_var)) / len(p))


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    count: int
    mean_predicted: float
    empirical_fraction: float


@dataclass
class CalibrationReport:
    """
    Reliability curve: equal-width bins over [0, 1] with the mean prediction
    and the fraction of positives of each. Empty bins have NaN fractions.
    ``max_gap`` only looks at bins with at least ``min_count`` samples and is
    NaN when there is none.
    """
    bins: list
    n_bins: int
    min_count: int
    max_gap: float

    def as_dict(self):
        return {
            "n_bins": self.n_bins,
            "min_count": self.min_count,
            "max_gap": _nan_to_none(self.max_gap),
            "bins": [{k: _nan_to_none(v) for k, v in vars(b).items()} for b in self.bins],
        }

    def to_frame(self):
        return pd.DataFrame([vars(b) for b in self.bins])


def calibration_curve(pred, y, n_bins=DEFAULT_N_BINS, min_count=DEFAULT_MIN_COUNT):
    """
    Bin predictions by value and compare with the observed positive fraction.

    A prediction ``p`` falls in bin ``min(floor(p * n_bins), n_bins - 1)``,
    so 1.0 belongs to the last bin.

    Parameters
    ----------
    pred, y : array_like
    n_bins : int, optional
        At least 2. Defaults to 10.
    min_count : int, optional
        Minimum bin size taken into account for ``max_gap``. Defaults to 50.

    Returns
    -------
    CalibrationReport
    """
    if int(n_bins) != n_bins or n_bins < 2:
        raise ConfigError(f"Calibration needs at least 2 bins, got {n_bins}.")
    if min_count < 1:
        raise ConfigError(f"min_count must be at least 1, got {min_count}.")
    n_bins = int(n_bins)
    pred, y = _check(pred, y)
    idx = np.minimum(np.floor(pred * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sum_pred = np.bincount(idx, weights=pred, minlength=n_bins)
    sum_pos = np.bincount(idx, weights=y, minlength=n_bins)
    bins = []
    gaps = []
    for k in range(n_bins):
        if counts[k]:
            mean_pred = float(sum_pred[k] / counts[k])
            frac = float(sum_pos[k] / counts[k])
            if counts[k] >= min_count:
                gaps.append(abs(mean_pred - frac))
        else:
            mean_pred = frac = math.nan
        bins.append(CalibrationBin(lower=k / n_bins, upper=(k + 1) / n_bins, count=int(counts[k]),
                                   mean_predicted=mean_pred, empirical_fraction=frac))
    return CalibrationReport(bins=bins, n_bins=n_bins, min_count=int(min_count),
                             max_gap=max(gaps) if gaps else math.nan)


@dataclass
class RocReport:
    """
    ROC curve from the highest threshold to the lowest. ``thresholds[i]`` is
    the score at or above which samples are predicted positive to reach
    ``(fpr[i], tpr[i])``; the first point (0, 0) has threshold +inf.
    """
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def as_dict(self):
        return {
            "auc": self.auc,
            "points": [{"fpr": f, "tpr": t, "threshold": None if math.isinf(th) else th}
                       for f, t, th in zip(self.fpr.tolist(), self.tpr.tolist(),
                                           self.thresholds.tolist())],
        }

    def to_frame(self):
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc(pred, y):
    """
    ROC curve with one point per distinct prediction value (tied samples
    move together) and its area by the trapezoidal rule, which equals the
    probability that a random positive scores higher than a random negative,
    ties counting one half.

    Raises
    ------
    SingleClass
        If only one class is present.

    Examples
    --------
    >>> roc([0.9, 0.8, 0.4, 0.1], [1, 0, 1, 0]).auc
    0.75
    """
    pred, y = _check(pred, y)
    n_pos = float(np.sum(y))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both positive and negative samples.")
    order = np.argsort(-pred, kind="stable")
    pred, y = pred[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(pred)), len(pred) - 1]
    tps = np.cumsum(y)[last_of_group]
    fps = (last_of_group + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, pred[last_of_group]]
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocReport(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=area)


def auc(pred, y):
    """Area under the ROC curve."""
    return roc(pred, y).auc


@dataclass
class EvalReport:
    n: int
    n_pos: int
    brier: float
    calibration: CalibrationReport
    roc: RocReport = None
    extra: dict = field(default_factory=dict)

    @property
    def auc(self):
        return math.nan if self.roc is None else self.roc.auc

    def as_dict(self):
        out = {
            "n": self.n,
            "n_pos": self.n_pos,
            "brier": self.brier,
            "auc": _nan_to_none(self.auc),
            "calibration": self.calibration.as_dict(),
            "roc": None if self.roc is None else self.roc.as_dict(),
        }
        out.update(self.extra)
        return out

    def to_json(self, filename):
        try:
            with Path(filename).open("w", encoding="utf-8") as fid:
                json.dump(self.as_dict(), fid, indent=2, sort_keys=True)
                fid.write("\n")
        except OSError as e:
            raise IoError(f"Cannot write report {filename}: {e}") from e

    def write_points(self, prefix):
        """Write ``<prefix>.calibration.csv`` and ``<prefix>.roc.csv``."""
        prefix = str(prefix)
        try:
            self.calibration.to_frame().to_csv(f"{prefix}.calibration.csv", index=False,
                                               float_format="%.17g")
            if self.roc is not None:
                self.roc.to_frame().to_csv(f"{prefix}.roc.csv", index=False, float_format="%.17g")
        except OSError as e:
            raise IoError(f"Cannot write report points {prefix}: {e}") from e

    def write_gnuplot(self, prefix):
        """
        Write ``<prefix>.calibration.dat`` and ``<prefix>.roc.dat``:
        whitespace-separated columns with a ``#`` header line, ready for
        gnuplot's ``plot 'file' using 1:2``.
        """
        prefix = str(prefix)
        try:
            with open(f"{prefix}.calibration.dat", "w", encoding="utf-8") as fid:
                fid.write("# mean_predicted empirical_fraction count\n")
                for b in self.calibration.bins:
                    if b.count:
                        fid.write(f"{b.mean_predicted:.10g} {b.empirical_fraction:.10g} {b.count}\n")
            if self.roc is not None:
                with open(f"{prefix}.roc.dat", "w", encoding="utf-8") as fid:
                    fid.write(f"# fpr tpr  (auc = {self.roc.auc:.6f})\n")
                    for f, t in self.roc.points:
                        fid.write(f"{f:.10g} {t:.10g}\n")
        except OSError as e:
            raise IoError(f"Cannot write gnuplot data {prefix}: {e}") from e


def evaluate(pred, y, n_bins=DEFAULT_N_BINS, min_count=DEFAULT_MIN_COUNT):
    """
    Brier score, calibration and (when both classes are present) ROC of
    probabilistic predictions.

    Returns
    -------
    EvalReport
    """
    pred, y = _check(pred, y)
    n_pos = int(np.sum(y))
    curve = roc(pred, y) if 0 < n_pos < len(y) else None
    return EvalReport(n=len(y), n_pos=n_pos, brier=brier(pred, y),
                      calibration=calibration_curve(pred, y, n_bins, min_count), roc=curve)


def match_labels(scores, dataset):
    """
    Pair a score table with the labels of a dataset.

    Parameters
    ----------
    scores : pandas.DataFrame
        Columns ``ip`` (integer), ``fmp`` and optionally ``t0``. Without
        ``t0`` the dataset must hold a single prediction time.
    dataset : Dataset

    Returns
    -------
    tuple of numpy.ndarray
        ``(pred, y)`` in dataset order.

    Raises
    ------
    LengthMismatch
        If a dataset sample has no score.
    """
    labels = pd.DataFrame({"ip": dataset.ips.astype(np.int64), "t0": dataset.t0s,
                           "y": dataset.y.astype(np.int64)})
    keys = ["ip", "t0"] if "t0" in scores.columns else ["ip"]
    if keys == ["ip"] and len(dataset.prediction_times) > 1:
        raise LengthMismatch("Scores without t0 cannot be matched to a dataset with "
                             + f"{len(dataset.prediction_times)} prediction times.")
    scores = scores.astype({k: np.int64 for k in keys})
    try:
        merged = labels.merge(scores[keys + ["fmp"]], on=keys, how="left", validate="one_to_one")
    except pd.errors.MergeError:
        raise LengthMismatch("The score table lists a sample more than once.") from None
    missing = int(merged["fmp"].isna().sum())
    if missing:
        raise LengthMismatch(f"{missing} of {len(merged)} labelled samples have no score.")
    return merged["fmp"].to_numpy(dtype=np.float64), merged["y"].to_numpy()


def ablation_study(train, test, kind="gbdt", groups=None, seed=0, silent=True, **options):
    """
    Compare feature sets by retraining with feature groups switched off.

    Trains one model with all features, one without each group and one
    with only the IP-scope features of the predicted category, and
    evaluates each on ``test``.

    Parameters
    ----------
    train, test : Dataset
    kind : str, optional
        Estimator kind, see :data:`fmpscore.model.ESTIMATORS`.
    groups : list of str, optional
        Groups to switch off one at a time. Defaults to all of
        :data:`fmpscore.features.ABLATION_GROUPS`.
    seed : int, optional
    silent : bool, optional
    **options
        Passed to :func:`fmpscore.model.train`.

    Returns
    -------
    pandas.DataFrame
        One row per configuration: ``configuration``, ``disabled``,
        ``brier``, ``auc``, ``auc_drop`` (relative to all features).
    """
    groups = list(ABLATION_GROUPS if groups is None else groups)
    configurations = [("all", [])]
    configurations += [(f"without_{group}", [group]) for group in groups]
    configurations.append(("same_category_only", list(ABLATION_GROUPS)))
    rows = []
    for name, disabled in configurations:
        model = train_model(kind, train, seed=seed, disabled=disabled, silent=silent, **options)
        pred = fmp_score(model, test.X)
        report = evaluate(pred, test.y)
        rows.append({"configuration": name, "disabled": ",".join(disabled),
                     "brier": report.brier, "auc": report.auc})
    df = pd.DataFrame(rows)
    df["auc_drop"] = df["auc"].iloc[0] - df["auc"]
    return df
