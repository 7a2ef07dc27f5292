# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import ipaddress
import json
import math
from dataclasses import dataclass
from pathlib import Path
from warnings import warn

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .alerts import DEFAULT_HISTORY_DAYS, DEFAULT_PREDICTION_DAYS, Category, WindowConfig
from .errors import (AlreadySubsampled, CategoryMismatch, CorruptSnapshot, EmptyDataset, FmpError,
                     InvalidFraction, InvalidRatio, IoError, SchemaMismatch)
from .features import (DEFAULT_ALPHA, FEATURE_NAMES, FEATURE_SCHEMA_HASH, NUM_FEATURES,
                       FeatureExtractor, FeatureVector, export_matrix)
from .general import SECONDS_PER_DAY
from .store import ip_to_int

DEFAULT_SUBSAMPLE_RATIO = 1.0
DEFAULT_TEST_FRACTION = 0.1
DEFAULT_SEED = 0

FEATURES_FILE = "features.csv"
SIDECAR_FILE = "dataset.json"


@dataclass(frozen=True)
class Sample:
    ip: int
    t0: int
    x: FeatureVector
    y: int


def _ratio(n_pos, n_neg):
    return n_pos / n_neg if n_pos > 0 and n_neg > 0 else math.nan


class Dataset:
    """
    Labelled feature vectors of one target category, stored column-wise.

    Parameters
    ----------
    target_category : Category or str
    X : array_like
        Feature matrix of shape ``(n, 58)``.
    y : array_like
        Labels in {0, 1}.
    ips : array_like
        Addresses as integers.
    t0s : array_like
        Prediction times (epoch seconds).
    beta : float, optional
        ``n_pos / n_neg`` of the pool before subsampling. Computed from ``y``
        if not given. NaN when one class is missing.
    subsampled : bool, optional
    seed : int, optional
        Seed of the last random operation (split or subsampling).
    neg_rate : float, optional
        Fraction of the negatives kept by subsampling (1 when not subsampled).
    alpha, w_h, w_p :
        Feature parameters the vectors were computed with.
    """

    def __init__(self, target_category, X, y, ips, t0s, beta=None, subsampled=False,
                 seed=None, neg_rate=1.0, alpha=DEFAULT_ALPHA, w_h=DEFAULT_HISTORY_DAYS,
                 w_p=DEFAULT_PREDICTION_DAYS):
        self.target_category = Category.from_label(target_category)
        self.X = np.asarray(X, dtype=np.float64).reshape(-1, NUM_FEATURES)
        self.y = np.asarray(y, dtype=np.int8)
        self.ips = np.asarray(ips, dtype=np.uint32)
        self.t0s = np.asarray(t0s, dtype=np.int64)
        n = len(self.X)
        if not len(self.y) == len(self.ips) == len(self.t0s) == n:
            raise ValueError("Dataset columns must have equal lengths.")
        if np.any((self.y != 0) & (self.y != 1)):
            raise ValueError("Labels must be 0 or 1.")
        self.beta = _ratio(self.n_pos, self.n_neg) if beta is None else float(beta)
        self.subsampled = bool(subsampled)
        self.seed = seed
        self.neg_rate = float(neg_rate)
        self.alpha = float(alpha)
        self.w_h = int(w_h)
        self.w_p = int(w_p)

    @property
    def n_pos(self):
        return int(np.count_nonzero(self.y == 1))

    @property
    def n_neg(self):
        return int(np.count_nonzero(self.y == 0))

    def __len__(self):
        return len(self.y)

    @property
    def positive_fraction(self):
        return self.n_pos / len(self) if len(self) else math.nan

    @property
    def samples(self):
        return [Sample(ip=int(ip), t0=int(t0), x=FeatureVector(int(ip), int(t0), x), y=int(y))
                for ip, t0, x, y in zip(self.ips, self.t0s, self.X, self.y)]

    @property
    def prediction_times(self):
        return np.unique(self.t0s)

    def _meta(self):
        return dict(target_category=self.target_category, beta=self.beta,
                    subsampled=self.subsampled, seed=self.seed, neg_rate=self.neg_rate,
                    alpha=self.alpha, w_h=self.w_h, w_p=self.w_p)

    def take(self, idx, **changes):
        """New Dataset of the rows ``idx``, with the same metadata unless overridden."""
        idx = np.asarray(idx, dtype=np.int64)
        meta = self._meta()
        meta.update(changes)
        return Dataset(X=self.X[idx], y=self.y[idx], ips=self.ips[idx], t0s=self.t0s[idx], **meta)

    def summary(self):
        return {
            "target_category": self.target_category.label,
            "n_samples": len(self),
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "positive_fraction": _json_float(self.positive_fraction),
            "beta": _json_float(self.beta),
            "neg_rate": self.neg_rate,
            "subsampled": self.subsampled,
            "seed": self.seed,
            "n_prediction_times": len(self.prediction_times),
            "alpha": self.alpha,
            "w_h": self.w_h,
            "w_p": self.w_p,
        }

    def __repr__(self):
        return (f"Dataset({self.target_category.label}, n={len(self)}, pos={self.n_pos}, "
                + f"neg={self.n_neg}, subsampled={self.subsampled})")


def _json_float(value):
    return None if value is None or math.isnan(value) else float(value)


def label(store, ip, window, target_category):
    """
    1 if ``ip`` is reported by an alert of ``target_category`` in the
    prediction window ``(t0, t0 + w_p days]``, else 0. Alerts of the other
    category are ignored.
    """
    category = Category.from_label(target_category)
    start, end = window.t0 + 1, window.t0 + window.w_p * SECONDS_PER_DAY + 1
    arrs = store.entity_arrays(ip, start, end)
    return int(np.any(arrs["c"] == category.code))


def _labels(store, ips, window, category):
    # Vectorised label() over many addresses.
    start, end = window.t0 + 1, window.t0 + window.w_p * SECONDS_PER_DAY + 1
    positives = store.reported_ips(start, end, category)
    return np.isin(ips, positives).astype(np.int8)


def build(store, prediction_times, target_category, w_h=DEFAULT_HISTORY_DAYS,
          w_p=DEFAULT_PREDICTION_DAYS, alpha=DEFAULT_ALPHA, silent=True):
    """
    Build labelled samples for several prediction times.

    At every prediction time ``t0`` one sample is created for each address
    with at least one alert of ``target_category`` in the history window
    ``[t0 - w_h days, t0)``. Addresses never seen before are not scored.

    Parameters
    ----------
    store : AlertStore
    prediction_times : iterable of int
        Prediction times (epoch seconds). Duplicates are ignored.
    target_category : Category or str
    w_h, w_p : int, optional
        History and prediction window lengths in days.
    alpha : float, optional
        EWMA smoothing factor.
    silent : bool, optional
        Hide the progress bar.

    Returns
    -------
    Dataset
        Sorted by ``(t0, ip)``, not subsampled.

    Raises
    ------
    EmptyDataset
        If no (address, prediction time) pair qualifies.
    """
    category = Category.from_label(target_category)
    times = sorted({int(t) for t in prediction_times})
    blocks = []
    for t0 in tqdm(times, desc=f"Building {category.label} dataset", disable=silent):
        window = WindowConfig(t0=t0, w_h=w_h, w_p=w_p)
        start, end = window.history
        ips = store.reported_ips(start, end, category)
        if len(ips) == 0:
            continue
        X = FeatureExtractor(store, window, alpha).matrix(ips)
        blocks.append((X, _labels(store, ips, window, category), ips,
                       np.full(len(ips), t0, dtype=np.int64)))
    if not blocks:
        raise EmptyDataset(f"No address has {category.label} alerts in the history window "
                           + f"of any of the {len(times)} prediction times.")
    X, y, ips, t0s = (np.concatenate(col) for col in zip(*blocks))
    return Dataset(category, X, y, ips, t0s, subsampled=False, alpha=alpha, w_h=w_h, w_p=w_p)


def subsample_majority(ds, ratio=DEFAULT_SUBSAMPLE_RATIO, seed=DEFAULT_SEED):
    """
    Keep all positives and a uniform random subset of ``round(ratio * n_pos)``
    negatives (at most all of them).

    ``beta`` keeps the value of the pool before subsampling; ``neg_rate``
    records the fraction of negatives kept. Deterministic given ``seed``.

    Raises
    ------
    InvalidRatio
        If ``ratio <= 0``.
    AlreadySubsampled
        If ``ds`` was subsampled before.
    """
    if not ratio > 0:
        raise InvalidRatio(f"Subsampling ratio must be positive, got {ratio}.")
    if ds.subsampled:
        raise AlreadySubsampled("Dataset is already subsampled.")
    pos_idx = np.flatnonzero(ds.y == 1)
    neg_idx = np.flatnonzero(ds.y == 0)
    if len(neg_idx) < len(pos_idx):
        warn(f"Negatives are the minority ({len(neg_idx)} vs {len(pos_idx)} positives).")
    n_keep = min(int(math.floor(ratio * len(pos_idx) + 0.5)), len(neg_idx))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(neg_idx, size=n_keep, replace=False) if n_keep else neg_idx[:0]
    keep = np.sort(np.concatenate([pos_idx, chosen]))
    neg_rate = n_keep / len(neg_idx) if len(neg_idx) else 1.0
    return ds.take(keep, subsampled=True, seed=seed, neg_rate=neg_rate)


def split(ds, test_fraction=DEFAULT_TEST_FRACTION, seed=DEFAULT_SEED):
    """
    Random partition into a training and a testing set.

    The split must happen before subsampling: the testing set keeps the
    original class distribution. The training set's ``beta`` is recomputed
    on the training pool.

    Parameters
    ----------
    ds : Dataset
    test_fraction : float, optional
        In (0, 1). Defaults to 0.1.
    seed : int, optional

    Returns
    -------
    tuple of Dataset
        ``(train, test)``, both in ``(t0, ip)`` order.

    Raises
    ------
    InvalidFraction
        If ``test_fraction`` is not in (0, 1) or leaves one side empty.
    AlreadySubsampled
        If ``ds`` is subsampled.
    """
    if not 0 < test_fraction < 1:
        raise InvalidFraction(f"Test fraction must be in (0, 1), got {test_fraction}.")
    if ds.subsampled:
        raise AlreadySubsampled("Split the dataset before subsampling the training part.")
    n = len(ds)
    n_test = int(math.floor(test_fraction * n + 0.5))
    if n_test == 0 or n_test == n:
        raise InvalidFraction(f"Test fraction {test_fraction} of {n} samples leaves an empty side.")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    train = ds.take(train_idx, seed=seed)
    train.beta = _ratio(train.n_pos, train.n_neg)
    test = ds.take(test_idx, seed=seed)
    test.beta = _ratio(test.n_pos, test.n_neg)
    return train, test


def concat(datasets):
    """
    Concatenate datasets of the same target category and feature parameters.

    Raises
    ------
    CategoryMismatch
        If the target categories differ.
    AlreadySubsampled
        If any input is subsampled.
    """
    datasets = list(datasets)
    if not datasets:
        raise EmptyDataset("Nothing to concatenate.")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.target_category != first.target_category:
            raise CategoryMismatch(f"Cannot join {first.target_category.label} and "
                                   + f"{ds.target_category.label} datasets.")
        if (ds.alpha, ds.w_h, ds.w_p) != (first.alpha, first.w_h, first.w_p):
            raise SchemaMismatch("Datasets were built with different feature parameters.")
    if any(ds.subsampled for ds in datasets):
        raise AlreadySubsampled("Only datasets that are not subsampled can be joined.")
    X = np.concatenate([ds.X for ds in datasets])
    y = np.concatenate([ds.y for ds in datasets])
    ips = np.concatenate([ds.ips for ds in datasets])
    t0s = np.concatenate([ds.t0s for ds in datasets])
    order = np.lexsort((ips, t0s))
    return Dataset(first.target_category, X[order], y[order], ips[order], t0s[order],
                   alpha=first.alpha, w_h=first.w_h, w_p=first.w_p)


def save_dataset(ds, directory):
    """
    Write ``features.csv`` (ip, t0, the 58 features, label) and the
    ``dataset.json`` sidecar into ``directory``.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        export_matrix(directory / FEATURES_FILE, ds.ips, ds.t0s, ds.X, ds.y)
        sidecar = {
            "target_category": ds.target_category.label,
            "beta": _json_float(ds.beta),
            "n_pos": ds.n_pos,
            "n_neg": ds.n_neg,
            "subsampled": ds.subsampled,
            "seed": ds.seed,
            "neg_rate": ds.neg_rate,
            "alpha": ds.alpha,
            "w_h": ds.w_h,
            "w_p": ds.w_p,
            "feature_schema": FEATURE_SCHEMA_HASH,
        }
        with (directory / SIDECAR_FILE).open("w", encoding="utf-8") as fid:
            json.dump(sidecar, fid, indent=2, sort_keys=True)
            fid.write("\n")
    except OSError as e:
        raise IoError(f"Cannot write dataset to {directory}: {e}") from e


def load_dataset(directory):
    """
    Read a dataset written by :func:`save_dataset`.

    Raises
    ------
    IoError
        If a file is missing or unreadable.
    SchemaMismatch
        If the feature columns differ from the current layout.
    CorruptSnapshot
        If a file is not valid JSON or CSV, the sidecar lacks a key, or its
        counts disagree with the CSV.
    """
    directory = Path(directory)
    try:
        with (directory / SIDECAR_FILE).open("r", encoding="utf-8") as fid:
            sidecar = json.load(fid)
        df = pd.read_csv(directory / FEATURES_FILE, float_precision="round_trip")
    except OSError as e:
        raise IoError(f"Cannot read dataset from {directory}: {e}") from e
    except ValueError as e:
        raise CorruptSnapshot(f"Dataset in {directory} is unreadable: {e}") from None
    if not isinstance(sidecar, dict):
        raise CorruptSnapshot(f"{directory / SIDECAR_FILE} must hold a JSON object.")
    if sidecar.get("feature_schema") != FEATURE_SCHEMA_HASH or \
            list(df.columns[2:2 + NUM_FEATURES]) != FEATURE_NAMES:
        raise SchemaMismatch(f"Dataset in {directory} has a different feature layout.")
    try:
        ds = Dataset(
            target_category=sidecar["target_category"],
            X=df[FEATURE_NAMES].to_numpy(dtype=np.float64),
            y=df["label"].to_numpy(),
            ips=[ip_to_int(ipaddress.IPv4Address(ip)) for ip in df["ip"]],
            t0s=df["t0"].to_numpy(dtype=np.int64),
            beta=math.nan if sidecar["beta"] is None else sidecar["beta"],
            subsampled=sidecar["subsampled"],
            seed=sidecar["seed"],
            neg_rate=sidecar["neg_rate"],
            alpha=sidecar["alpha"],
            w_h=sidecar["w_h"],
            w_p=sidecar["w_p"],
        )
        counts = (sidecar["n_pos"], sidecar["n_neg"])
    except FmpError:
        raise
    except KeyError as e:
        raise CorruptSnapshot(f"Dataset in {directory} lacks {e}.") from None
    except (TypeError, ValueError) as e:
        raise CorruptSnapshot(f"Dataset in {directory} has invalid values: {e}") from None
    if (ds.n_pos, ds.n_neg) != counts:
        raise CorruptSnapshot(f"Class counts in {directory / SIDECAR_FILE} do not match the data.")
    return ds
