# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Predictive blacklists (top-N or thresholded FMP scores), global worst
offender lists (GWOL) and their evaluation on the prediction day.

Ranking rules
-------------
- FMP lists: score descending, then IP ascending (as integer).
- GWOL: alert count descending, then total volume descending, then IP ascending.
- Union: best (lowest) rank in any source list, then IP ascending.
"""

import ipaddress
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .alerts import DEFAULT_HISTORY_DAYS, Category, parse_ip
from .errors import (CategoryMismatch, ConfigError, CorruptSnapshot, DomainError, FmpError,
                     InvalidField, IoError, MalformedRecord)
from .general import SECONDS_PER_DAY
from .store import ip_to_int

POLICY_KINDS = ("fmp_topn", "fmp_threshold", "gwol", "third_party", "union")
MIN_EXPANDED_PREFIX = 24


@dataclass(frozen=True)
class Policy:
    """How a blacklist was built. Use the class methods to create one."""
    kind: str
    n: int = None
    threshold: float = None
    window_days: int = None
    name: str = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"Unknown blacklist policy {self.kind!r}.")
        if self.kind in ("fmp_topn", "gwol") and (self.n is None or int(self.n) != self.n
                                                  or self.n < 1):
            raise ConfigError(f"List size N must be a positive integer, got {self.n}.")
        if self.kind == "fmp_threshold" and (self.threshold is None
                                             or not 0 <= self.threshold <= 1):
            raise ConfigError(f"Threshold must be in [0, 1], got {self.threshold}.")
        if self.kind == "gwol" and (self.window_days is None or self.window_days < 1):
            raise ConfigError(f"GWOL window must be at least one day, got {self.window_days}.")

    @classmethod
    def topn(cls, n):
        return cls("fmp_topn", n=n)

    @classmethod
    def at_threshold(cls, threshold):
        return cls("fmp_threshold", threshold=threshold)

    @classmethod
    def gwol(cls, window_days, n):
        return cls("gwol", n=n, window_days=window_days)

    @classmethod
    def third_party(cls, name):
        return cls("third_party", name=name)

    @property
    def label(self):
        if self.kind == "fmp_topn":
            return f"fmp_top{self.n}"
        if self.kind == "fmp_threshold":
            return f"fmp_t{self.threshold:g}"
        if self.kind == "gwol":
            return f"gwol{self.window_days}_top{self.n}"
        return self.name or self.kind

    def as_dict(self):
        return {k: v for k, v in vars(self).items() if v is not None}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class BlacklistEntry(NamedTuple):
    ip: int
    score: float
    sources: tuple = ()

    @property
    def address(self):
        return ipaddress.IPv4Address(self.ip)


@dataclass
class Blacklist:
    """
    An ordered list of addresses to block.

    ``score`` is the FMP score for FMP lists, the alert count for GWOL and
    1.0 for third-party lists.
    """
    category: Category
    policy: Policy
    entries: list
    generated_at: int = None

    def __post_init__(self):
        self.category = Category.from_label(self.category)
        ips = [e.ip for e in self.entries]
        if len(set(ips)) != len(ips):
            raise InvalidField("A blacklist cannot list an address twice.")

    @property
    def name(self):
        return self.policy.label

    @property
    def ips(self):
        return np.array([e.ip for e in self.entries], dtype=np.uint32)

    @property
    def scores(self):
        return np.array([e.score for e in self.entries], dtype=np.float64)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, ip):
        return ip_to_int(ip) in {e.ip for e in self.entries}

    def __repr__(self):
        return f"Blacklist({self.name}, {self.category.label}, n={len(self)}, t0={self.generated_at})"


def _scored_arrays(scored):
    if isinstance(scored, pd.DataFrame):
        ips = [ip_to_int(ip) for ip in scored["ip"]]
        scores = scored["fmp"].to_numpy(dtype=np.float64)
    else:
        scored = list(scored)
        ips = [ip_to_int(ip) for ip, _ in scored]
        scores = np.array([s for _, s in scored], dtype=np.float64)
    ips = np.array(ips, dtype=np.int64)
    if len(np.unique(ips)) != len(ips):
        raise InvalidField("Scores must contain one entry per address.")
    if np.any(np.isnan(scores)) or np.any(scores < 0) or np.any(scores > 1):
        raise DomainError("FMP scores must be in [0, 1].")
    return ips, scores


def fmp_blacklist(scored, policy, category, t0=None):
    """
    Blacklist from FMP scores.

    Parameters
    ----------
    scored : iterable of (ip, score) or pandas.DataFrame
        One score per address; a DataFrame needs columns ``ip`` and ``fmp``.
    policy : Policy
        ``Policy.topn(N)`` keeps the N best, ``Policy.at_threshold(T)`` all
        scores ``>= T``.
    category : Category or str
    t0 : int, optional
        Prediction time the scores refer to.

    Returns
    -------
    Blacklist
        Sorted by score descending, ties by ascending address.
    """
    if policy.kind not in ("fmp_topn", "fmp_threshold"):
        raise ConfigError(f"Policy {policy.kind} does not apply to FMP scores.")
    ips, scores = _scored_arrays(scored)
    order = np.lexsort((ips, -scores))
    if policy.kind == "fmp_topn":
        order = order[:policy.n]
    else:
        order = order[scores[order] >= policy.threshold]
    entries = [BlacklistEntry(int(ips[i]), float(scores[i]), (policy.label,)) for i in order]
    return Blacklist(category=category, policy=policy, entries=entries, generated_at=t0)


def gwol(store, t0, window_days, n, category):
    """
    Global worst offender list: the ``n`` addresses with most alerts of
    ``category`` in ``[t0 - window_days days, t0)``. Ties go to the higher
    total volume, then to the lower address.
    """
    policy = Policy.gwol(window_days, n)
    category = Category.from_label(category)
    cols = store.columns
    start = t0 - window_days * SECONDS_PER_DAY
    mask = (cols["t"] >= start) & (cols["t"] < t0) & (cols["c"] == category.code)
    ips, inverse = np.unique(cols["ip"][mask], return_inverse=True)
    counts = np.bincount(inverse, minlength=len(ips))
    volumes = np.bincount(inverse, weights=cols["v"][mask].astype(np.float64), minlength=len(ips))
    order = np.lexsort((ips, -volumes, -counts))[:n]
    entries = [BlacklistEntry(int(ips[i]), float(counts[i]), (policy.label,)) for i in order]
    return Blacklist(category=category, policy=policy, entries=entries, generated_at=t0)


@dataclass
class HitReport:
    """
    Outcome of a blacklist on its prediction day ``(t0, t0 + 1 day]``.

    ``hit_count`` listed addresses attacked that day, ``hit_rate`` is
    ``hit_count / list_size`` (0 for an empty list), ``attackers_total`` the
    number of distinct attackers that day, ``attackers_blocked_fraction``
    the share of them on the list and ``new_attacker_fraction`` the share
    with no alert of the category in the previous 7 days.
    """
    list_size: int
    hit_count: int
    hit_rate: float
    attackers_total: int
    attackers_blocked_fraction: float
    new_attacker_fraction: float
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: v for k, v in vars(self).items() if k != "extra"}
        out.update(self.extra)
        return out


def evaluate_blacklist(bl, store, category=None, t0=None, lookback_days=DEFAULT_HISTORY_DAYS):
    """
    Count the listed addresses reported by an alert of ``category`` in the
    day after ``t0``.

    Parameters
    ----------
    bl : Blacklist
    store : AlertStore
    category : Category or str, optional
        Defaults to the blacklist's category.
    t0 : int, optional
        Defaults to the blacklist's ``generated_at``.
    lookback_days : int, optional
        Days before the prediction day used to tell new attackers from known ones.

    Returns
    -------
    HitReport
    """
    category = bl.category if category is None else Category.from_label(category)
    t0 = bl.generated_at if t0 is None else t0
    if t0 is None:
        raise ConfigError("The prediction time of the blacklist is unknown; pass t0.")
    attackers = store.reported_ips(t0 + 1, t0 + SECONDS_PER_DAY + 1, category)
    listed = bl.ips
    hits = int(np.count_nonzero(np.isin(listed, attackers)))
    known = store.reported_ips(t0 - lookback_days * SECONDS_PER_DAY, t0 + 1, category)
    n_att = len(attackers)
    new = int(np.count_nonzero(~np.isin(attackers, known)))
    return HitReport(
        list_size=len(listed),
        hit_count=hits,
        hit_rate=hits / len(listed) if len(listed) else 0.0,
        attackers_total=n_att,
        attackers_blocked_fraction=hits / n_att if n_att else 0.0,
        new_attacker_fraction=new / n_att if n_att else 0.0,
        extra={"name": bl.name, "t0": int(t0), "category": category.label},
    )


def evaluate_days(blacklists, store, category=None):
    """
    Evaluate blacklists of several prediction days and average the results.

    Returns
    -------
    reports : list of HitReport
    mean : dict
        Mean of every numeric field over the days.
    """
    reports = [evaluate_blacklist(bl, store, category) for bl in blacklists]
    if not reports:
        return [], {}
    keys = ("list_size", "hit_count", "hit_rate", "attackers_total",
            "attackers_blocked_fraction", "new_attacker_fraction")
    mean = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    mean["days"] = len(reports)
    return reports, mean


def union_blacklists(lists):
    """
    Union of blacklists of the same category. Each address keeps the
    sources it came from; the order is by best rank in any source, then
    address.

    Raises
    ------
    CategoryMismatch
        If the lists target different categories.
    """
    lists = list(lists)
    if not lists:
        raise ConfigError("Nothing to unite.")
    category = lists[0].category
    for bl in lists[1:]:
        if bl.category != category:
            raise CategoryMismatch(f"Cannot unite {category.label} and {bl.category.label} lists.")
    best = {}
    for bl in lists:
        for rank, entry in enumerate(bl.entries):
            rank_ip = (rank, entry.ip)
            if entry.ip not in best:
                best[entry.ip] = [rank_ip, entry.score, [bl.name]]
                continue
            current = best[entry.ip]
            if bl.name not in current[2]:
                current[2].append(bl.name)
            if rank_ip < current[0]:
                current[0], current[1] = rank_ip, entry.score
    ordered = sorted(best.items(), key=lambda item: item[1][0])
    entries = [BlacklistEntry(ip, score, tuple(sources)) for ip, (_, score, sources) in ordered]
    times = {bl.generated_at for bl in lists}
    name = "+".join(bl.name for bl in lists)
    return Blacklist(category=category, policy=Policy("union", name=name), entries=entries,
                     generated_at=times.pop() if len(times) == 1 else None)


def _expand(token, lineno):
    if "/" not in token:
        return [int(parse_ip(token))]
    try:
        net = ipaddress.IPv4Network(token, strict=False)
    except ValueError:
        raise InvalidField(f"Line {lineno}: invalid network {token!r}.") from None
    if net.prefixlen < MIN_EXPANDED_PREFIX:
        raise InvalidField(f"Line {lineno}: network {net} is larger than "
                           + f"/{MIN_EXPANDED_PREFIX} and is not expanded.")
    first = int(net.network_address)
    return list(range(first, first + net.num_addresses))


def read_third_party(filename, category, name=None, t0=None):
    """
    Read an external blacklist: one IPv4 address or CIDR network (/24 or
    longer) per line; ``#`` starts a comment. Networks are expanded to their
    addresses; repeated addresses are kept once, at the first position.
    """
    filename = Path(filename)
    name = filename.stem if name is None else name
    try:
        lines = filename.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoError(f"Cannot read blacklist {filename}: {e}") from e
    except UnicodeDecodeError as e:
        raise MalformedRecord(f"Blacklist {filename} is not UTF-8 text: {e}") from None
    seen = set()
    entries = []
    for lineno, line in enumerate(lines, start=1):
        token = line.split("#", 1)[0].strip()
        if not token:
            continue
        try:
            ips = _expand(token, lineno)
        except InvalidField as e:
            raise InvalidField(f"{filename}: {e}") from None
        for ip in ips:
            if ip not in seen:
                seen.add(ip)
                entries.append(BlacklistEntry(ip, 1.0, (name,)))
    return Blacklist(category=category, policy=Policy.third_party(name), entries=entries,
                     generated_at=t0)


def _sidecar(filename):
    filename = Path(filename)
    return filename.with_name(filename.name + ".json")


def write_blacklist(bl, filename):
    """
    Write one address per line in list order, plus ``<filename>.json`` with
    the policy, category, prediction time and the scores and sources.
    """
    filename = Path(filename)
    meta = {
        "category": bl.category.label,
        "policy": bl.policy.as_dict(),
        "t0": bl.generated_at,
        "scores": [None if math.isnan(e.score) else e.score for e in bl.entries],
        "sources": [list(e.sources) for e in bl.entries],
    }
    try:
        filename.parent.mkdir(parents=True, exist_ok=True)
        with filename.open("w", encoding="utf-8") as fid:
            for entry in bl.entries:
                fid.write(f"{entry.address}\n")
        with _sidecar(filename).open("w", encoding="utf-8") as fid:
            json.dump(meta, fid, indent=2, sort_keys=True)
            fid.write("\n")
    except OSError as e:
        raise IoError(f"Cannot write blacklist {filename}: {e}") from e


def read_blacklist(filename, category=None, t0=None):
    """
    Read a blacklist written by :func:`write_blacklist`. A file without
    sidecar is read as a third-party list, for which ``category`` is required
    and ``t0`` sets the prediction time.
    """
    filename = Path(filename)
    sidecar = _sidecar(filename)
    if not sidecar.exists():
        if category is None:
            raise ConfigError(f"{filename} has no sidecar; give the category explicitly.")
        return read_third_party(filename, category, t0=t0)
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        lines = [l.strip() for l in filename.read_text(encoding="utf-8").splitlines() if l.strip()]
    except OSError as e:
        raise IoError(f"Cannot read blacklist {filename}: {e}") from e
    except ValueError as e:
        raise CorruptSnapshot(f"Blacklist {filename} is unreadable: {e}") from None
    try:
        if len(lines) != len(meta["scores"]):
            raise InvalidField(f"{filename} and its sidecar list a different number of addresses.")
        entries = [BlacklistEntry(int(parse_ip(ip)), math.nan if s is None else float(s), tuple(src))
                   for ip, s, src in zip(lines, meta["scores"], meta["sources"])]
        return Blacklist(category=meta["category"] if category is None else category,
                         policy=Policy.from_dict(meta["policy"]), entries=entries,
                         generated_at=meta["t0"])
    except FmpError:
        raise
    except KeyError as e:
        raise CorruptSnapshot(f"Sidecar of blacklist {filename} lacks {e}.") from None
    except (TypeError, ValueError) as e:
        raise CorruptSnapshot(f"Sidecar of blacklist {filename} has invalid values: {e}") from None


def threshold_size_curve(scores, thresholds):
    """Number of addresses with score ``>= T`` for each threshold ``T``."""
    scores = np.sort(np.asarray(scores, dtype=np.float64))
    return [int(len(scores) - np.searchsorted(scores, t, side="left")) for t in thresholds]
