# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
The fixed-order 58-dimensional feature vector of an (IP, prediction time) pair.

Layout
------
======  ===============================================================
index   content
======  ===============================================================
0-11    IP scope, scan alerts: f1..f12
12-23   IP scope, access alerts: f1..f12
24-34   /24 prefix scope, scan alerts: p1..p11
35-45   /24 prefix scope, access alerts: p1..p11
46      country maliciousness rate
47      ASN maliciousness rate
48-52   blacklist flags bl1..bl5
53      dynamic-range list flag
54-57   hostname tags: static, dynamic, IP in hostname, no PTR record
======  ===============================================================

Per category and scope: f1-f3 are log1p of the number of alerts, total
volume and distinct detectors in the last day, f4-f6 the same over the
whole history window, f7/f8 log1p of the EWMA of the daily alert counts and
volumes, f9 the EWMA of the daily presence flag, f10 exp(-days since the
last alert), f11/f12 exp(-mean/median interval between alerts in days).
The prefix scope has f1-f9 computed over all addresses of the /24 and two
more: log1p of the number of distinct reporting addresses in the last day
(p10) and in the history window (p11).
"""

import hashlib
import ipaddress
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .alerts import Category, format_time
from .errors import ConfigError, DomainError, EmptySeries
from .general import SECONDS_PER_DAY
from .store import ip_to_int

DEFAULT_ALPHA = 0.25
NUM_FEATURES = 58
NUM_IP_FEATURES = 12
NUM_PREFIX_FEATURES = 11

_IP_SUFFIXES = [
    "alerts_1d", "volume_1d", "detectors_1d",
    "alerts_wh", "volume_wh", "detectors_wh",
    "ewma_alerts", "ewma_volume", "ewma_presence",
    "last_alert", "mean_gap", "median_gap",
]
_PREFIX_SUFFIXES = _IP_SUFFIXES[:9] + ["ips_1d", "ips_wh"]


def feature_names():
    """Canonical names of the 58 columns, in vector order."""
    names = []
    for cat in Category:
        names += [f"ip_{cat.label}_{s}" for s in _IP_SUFFIXES]
    for cat in Category:
        names += [f"pfx_{cat.label}_{s}" for s in _PREFIX_SUFFIXES]
    names += ["country_rate", "asn_rate"]
    names += [f"bl{i}" for i in range(1, 6)]
    names += ["dynamic_list", "tag_static", "tag_dynamic", "tag_ip_in_hostname", "tag_no_ptr"]
    return names


FEATURE_NAMES = feature_names()
FEATURE_SCHEMA_HASH = hashlib.sha256(",".join(FEATURE_NAMES).encode()).hexdigest()[:16]

FEATURE_GROUPS = {
    "ip_scan": tuple(range(0, 12)),
    "ip_access": tuple(range(12, 24)),
    "prefix_scan": tuple(range(24, 35)),
    "prefix_access": tuple(range(35, 46)),
    "rates": (46, 47),
    "tags": tuple(range(48, 58)),
}
# Groups that can be switched off when training, relative to the predicted category.
ABLATION_GROUPS = ("other_category", "prefix", "rates", "tags")


def ablation_columns(disabled, category):
    """
    Column indices removed by disabling feature groups.

    Parameters
    ----------
    disabled : iterable of str
        Any of ``other_category`` (IP-scope features of the category that is
        not predicted), ``prefix`` (all /24 prefix features), ``rates``
        (country/ASN rates) and ``tags`` (blacklist flags and hostname tags).
        The IP-scope features of the predicted category are always kept.
    category : Category or str
        The predicted category.

    Returns
    -------
    list of int
    """
    category = Category.from_label(category)
    columns = []
    for group in disabled:
        if group == "other_category":
            columns += FEATURE_GROUPS[f"ip_{category.other().label}"]
        elif group == "prefix":
            columns += FEATURE_GROUPS["prefix_scan"] + FEATURE_GROUPS["prefix_access"]
        elif group in ("rates", "tags"):
            columns += FEATURE_GROUPS[group]
        else:
            raise ConfigError(f"Unknown feature group {group!r}; choose from {ABLATION_GROUPS}.")
    return sorted(set(columns))


def ablation_mask(disabled, category):
    """Boolean array of length 58, True for the columns of disabled groups."""
    mask = np.zeros(NUM_FEATURES, dtype=bool)
    mask[ablation_columns(disabled, category)] = True
    return mask


def apply_ablation(X, disabled, category):
    """Copy of a feature matrix with the disabled groups set to zero."""
    X = np.array(X, dtype=np.float64, copy=True)
    mask = ablation_mask(disabled, category)
    if mask.any():
        X[..., mask] = 0.0
    return X


# Transforms
# ==========

def log1p_transform(x):
    """Natural log of ``x + 1`` for counts (``x >= 0``)."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"log1p transform needs non-negative input, got {x!r}.")
    out = np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def expneg_transform(x):
    """``exp(-x)`` for time intervals; maps +infinity to 0 and 0 to 1."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"exp(-x) transform needs non-negative input, got {x!r}.")
    out = np.exp(-arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EwmaParams:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"EWMA smoothing factor must be in (0, 1), got {self.alpha}.")


def ewma(series, params=None):
    """
    Exponentially weighted moving average of a daily series.

    The average starts at the oldest value and is updated towards the most
    recent one with ``x̄ <- alpha * x + (1 - alpha) * x̄``.

    Parameters
    ----------
    series : sequence of float
        Daily values, oldest first.
    params : EwmaParams or float, optional
        Smoothing parameters (or directly alpha). Defaults to alpha = 0.25.

    Returns
    -------
    float

    Examples
    --------
    >>> ewma([1, 0, 1], EwmaParams(0.5))
    0.75
    """
    if params is None:
        params = EwmaParams()
    elif not isinstance(params, EwmaParams):
        params = EwmaParams(float(params))
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        raise EmptySeries("EWMA of an empty series.")
    alpha = params.alpha
    avg = values[0]
    for value in values[1:]:
        avg += alpha * (value - avg)
    return float(avg)


class DayBuckets(NamedTuple):
    """Daily aggregates; index ``k - 1`` holds bucket ``k`` (1 = most recent day)."""
    counts: np.ndarray
    volumes: np.ndarray
    presence: np.ndarray


def bucket_index(times, window):
    """Bucket number ``k`` of each time: ``t0 - k days <= t < t0 - (k - 1) days``."""
    ago = window.t0 - np.asarray(times, dtype=np.int64)
    return (ago + SECONDS_PER_DAY - 1) // SECONDS_PER_DAY


def day_buckets(times, window, volumes=None):
    """
    Aggregate alerts into the ``w_h`` daily buckets of the history window.
    Alerts outside ``[t0 - w_h days, t0)`` are ignored.

    Parameters
    ----------
    times : array_like of int
        Alert times (epoch seconds).
    window : WindowConfig
    volumes : array_like of int, optional
        Alert volumes; zeros if omitted.

    Returns
    -------
    DayBuckets
    """
    times = np.asarray(times, dtype=np.int64)
    volumes = np.zeros(len(times)) if volumes is None else np.asarray(volumes, dtype=np.float64)
    k = bucket_index(times, window)
    inside = (k >= 1) & (k <= window.w_h)
    counts = np.bincount(k[inside] - 1, minlength=window.w_h).astype(np.float64)
    vols = np.bincount(k[inside] - 1, weights=volumes[inside], minlength=window.w_h)
    return DayBuckets(counts=counts, volumes=vols.astype(np.float64),
                      presence=(counts > 0).astype(np.float64))


def _gap_features(times, t0):
    # f10, f11, f12 from time-ascending alert times of the history window.
    if len(times) == 0:
        return 0.0, 0.0, 0.0
    since_last = (t0 - times[-1]) / SECONDS_PER_DAY
    if len(times) < 2:
        return expneg_transform(since_last), 0.0, 0.0
    gaps = np.diff(times) / SECONDS_PER_DAY
    return (expneg_transform(since_last), expneg_transform(float(np.mean(gaps))),
            expneg_transform(float(np.median(gaps))))


def _activity_features(t, v, d, window, params):
    # f1..f9 of one category over time-ascending arrays restricted to T_h.
    last_day = t >= window.t0 - SECONDS_PER_DAY
    buckets = day_buckets(t, window, v)
    raw = [
        last_day.sum(), v[last_day].sum(), len(np.unique(d[last_day])),
        len(t), v.sum(), len(np.unique(d)),
    ]
    out = [log1p_transform(float(x)) for x in raw]
    out.append(log1p_transform(ewma(buckets.counts[::-1], params)))
    out.append(log1p_transform(ewma(buckets.volumes[::-1], params)))
    out.append(ewma(buckets.presence[::-1], params))
    return out


def _params(alpha):
    return alpha if isinstance(alpha, EwmaParams) else EwmaParams(alpha)


def ip_features(store, ip, category, window, alpha=DEFAULT_ALPHA):
    """
    The 12 IP-scope features f1..f12 of one category.

    Parameters
    ----------
    store : AlertStore
    ip : str, int or ipaddress.IPv4Address
    category : Category or str
    window : WindowConfig
    alpha : float or EwmaParams, optional

    Returns
    -------
    numpy.ndarray
        Shape (12,). All zeros when the address has no alert in the history window.
    """
    category = Category.from_label(category)
    start, end = window.history
    arrs = store.entity_arrays(ip, start, end)
    mask = arrs["c"] == category.code
    t, v, d = arrs["t"][mask], arrs["v"][mask].astype(np.float64), arrs["d"][mask]
    values = _activity_features(t, v, d, window, _params(alpha))
    values.extend(_gap_features(t, window.t0))
    return np.array(values, dtype=np.float64)


def _prefix_from_arrays(arrs, category, window, params):
    mask = arrs["c"] == category.code
    t, v, d, ips = arrs["t"][mask], arrs["v"][mask].astype(np.float64), arrs["d"][mask], arrs["ip"][mask]
    values = _activity_features(t, v, d, window, params)
    last_day = t >= window.t0 - SECONDS_PER_DAY
    values.append(log1p_transform(float(len(np.unique(ips[last_day])))))
    values.append(log1p_transform(float(len(np.unique(ips)))))
    return np.array(values, dtype=np.float64)


def prefix_features(store, ip, category, window, alpha=DEFAULT_ALPHA):
    """
    The 11 prefix-scope features p1..p11 of one category, computed over all
    alerts of the /24 prefix containing ``ip``.

    Returns
    -------
    numpy.ndarray
        Shape (11,).
    """
    category = Category.from_label(category)
    start, end = window.history
    arrs = store.prefix_arrays(ip_to_int(ip) >> 8, start, end)
    return _prefix_from_arrays(arrs, category, window, _params(alpha))


def _rate_counts(store, window):
    start, end = window.history
    reported = store.reported_ips(start, end)
    asns, countries = store.resolve_context(reported)
    return (Counter(cc for cc in countries if cc is not None),
            Counter(asn for asn in asns if asn is not None))


def _rates_for(store, ip, counts):
    country_counts, asn_counts = counts
    (asn,), (country,) = store.resolve_context([ip_to_int(ip)])
    sizes = store.context
    country_rate = 0.0
    if country is not None and country in sizes.country_sizes:
        country_rate = min(1.0, country_counts.get(country, 0) / sizes.country_sizes[country])
    asn_rate = 0.0
    if asn is not None and asn in sizes.asn_sizes:
        asn_rate = min(1.0, asn_counts.get(asn, 0) / sizes.asn_sizes[asn])
    return country_rate, asn_rate


def context_rates(store, ip, window):
    """
    Country and ASN maliciousness rates of the address: the number of
    distinct addresses of that country/ASN with at least one alert (any
    category) in the history window, divided by the number of addresses
    assigned to it. Clamped to [0, 1]; 0 when the address is unmapped.

    Returns
    -------
    tuple of float
        ``(country_rate, asn_rate)``.
    """
    return _rates_for(store, ip, _rate_counts(store, window))


@dataclass(frozen=True)
class FeatureVector:
    """Feature vector ``values`` (58 floats) of ``ip`` at prediction time ``t0``."""
    ip: int
    t0: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (NUM_FEATURES,):
            raise ValueError(f"Feature vector must have {NUM_FEATURES} entries, got {self.values.shape}.")

    def __len__(self):
        return NUM_FEATURES

    def __getitem__(self, item):
        return self.values[item]

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


class FeatureExtractor:
    """
    Computes feature vectors for many addresses at one prediction time.

    Prefix features and the country/ASN counts are cached, so scoring all
    addresses of a busy /24 computes its prefix features once.

    Parameters
    ----------
    store : AlertStore
    window : WindowConfig
    alpha : float, optional
        EWMA smoothing factor. Defaults to 0.25.
    """

    def __init__(self, store, window, alpha=DEFAULT_ALPHA):
        self.store = store
        self.window = window
        self.params = _params(alpha)
        self._prefix_cache = {}
        self._rate_counts = None

    @property
    def alpha(self):
        return self.params.alpha

    def _prefix_block(self, ip):
        key = ip_to_int(ip) >> 8
        if key not in self._prefix_cache:
            start, end = self.window.history
            arrs = self.store.prefix_arrays(key, start, end)
            self._prefix_cache[key] = np.concatenate(
                [_prefix_from_arrays(arrs, cat, self.window, self.params) for cat in Category])
        return self._prefix_cache[key]

    def rates(self, ip):
        if self._rate_counts is None:
            self._rate_counts = _rate_counts(self.store, self.window)
        return _rates_for(self.store, ip, self._rate_counts)

    def vector(self, ip):
        """The full :class:`FeatureVector` of one address."""
        ip = ip_to_int(ip)
        parts = [ip_features(self.store, ip, cat, self.window, self.params) for cat in Category]
        parts.append(self._prefix_block(ip))
        parts.append(np.array(self.rates(ip), dtype=np.float64))
        parts.append(self.store.tags(ip).as_features())
        return FeatureVector(ip=ip, t0=self.window.t0, values=np.concatenate(parts))

    def matrix(self, ips, silent=True):
        """Feature matrix of shape ``(len(ips), 58)``."""
        ips = list(ips)
        X = np.zeros((len(ips), NUM_FEATURES), dtype=np.float64)
        for i, ip in enumerate(tqdm(ips, desc=f"Features at {format_time(self.window.t0)}",
                                    disable=silent)):
            X[i] = self.vector(ip).values
        return X


def assemble_vector(store, ip, window, alpha=DEFAULT_ALPHA):
    """
    Feature vector of one address at one prediction time. Both categories'
    alert features are always included, whichever category is predicted.

    Returns
    -------
    FeatureVector
    """
    return FeatureExtractor(store, window, alpha).vector(ip)


def feature_frame(ips, t0s, X, labels=None):
    """DataFrame with ``ip`` (dotted quad), ``t0``, the 58 named columns and optionally ``label``."""
    df = pd.DataFrame(np.asarray(X, dtype=np.float64), columns=FEATURE_NAMES)
    df.insert(0, "t0", np.asarray(t0s, dtype=np.int64))
    df.insert(0, "ip", [str(ipaddress.IPv4Address(int(ip))) for ip in ips])
    if labels is not None:
        df["label"] = np.asarray(labels, dtype=np.int64)
    return df


def export_matrix(filename, ips, t0s, X, labels=None):
    """
    Write a feature matrix as CSV: header row, then ``ip``, ``t0``, the 58
    features (17 significant digits, so values read back exactly) and an
    optional ``label`` column.
    """
    feature_frame(ips, t0s, X, labels).to_csv(filename, index=False, float_format="%.17g")
