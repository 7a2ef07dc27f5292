# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Time-indexed alert storage keyed by IP address and /24 prefix.

Alerts are kept as columnar numpy arrays sorted by ``(ip, t, category,
volume, detector)``. Because the sort is by IP first, all alerts of one
address, and all alerts of one /24 prefix, are contiguous and found with
two binary searches.
"""

import ipaddress
import threading
from dataclasses import dataclass
from typing import NamedTuple
from warnings import warn

import numpy as np

from ..alerts import Category, parse_ip
from ..errors import CorruptSnapshot, InvalidField, MalformedRecord
from ..formats import read_container, write_container
from ..tools import log_debug
from .enrichment import (
    NUM_BLACKLISTS,
    ContextMaps,
    EnrichmentTags,
    PrefixTable,
    parse_enrichment_record,
)

_COLUMNS = (("ip", np.uint32), ("t", np.int64), ("c", np.uint8), ("v", np.int64), ("d", np.int32))


class EntityAlert(NamedTuple):
    t: int
    c: Category
    v: int
    d: str


class PrefixAlert(NamedTuple):
    ip: ipaddress.IPv4Address
    t: int
    c: Category
    v: int
    d: str


@dataclass(frozen=True)
class IngestSummary:
    scan: int = 0
    access: int = 0
    stored: int = 0
    duplicates: int = 0

    @property
    def received(self):
        return self.scan + self.access

    def as_dict(self):
        return {"scan": self.scan, "access": self.access, "stored": self.stored,
                "duplicates": self.duplicates}


@dataclass(frozen=True)
class EnrichmentSummary:
    records: int = 0
    skipped: int = 0
    new_ips: int = 0

    def as_dict(self):
        return {"records": self.records, "skipped": self.skipped, "new_ips": self.new_ips}


def ip_to_int(ip):
    if isinstance(ip, (int, np.integer)):
        return int(ip)
    return int(parse_ip(ip))


def prefix24(ip):
    """The /24 network containing an address."""
    return ipaddress.IPv4Network((ip_to_int(ip) & 0xFFFFFF00, 24))


def _prefix_key(prefix):
    # Accepts an IPv4Network (/24), a CIDR string or any address inside it.
    if isinstance(prefix, ipaddress.IPv4Network):
        net = prefix
    elif isinstance(prefix, str) and "/" in prefix:
        try:
            net = ipaddress.IPv4Network(prefix, strict=False)
        except ValueError:
            raise InvalidField(f"Invalid prefix {prefix!r}.") from None
    else:
        return ip_to_int(prefix) >> 8
    if net.prefixlen != 24:
        raise InvalidField(f"Only /24 prefixes are supported, got {net}.")
    return int(net.network_address) >> 8


def _empty_columns():
    return {name: np.empty(0, dtype=dtype) for name, dtype in _COLUMNS}


class AlertStore:
    """
    In-memory alert database with per-IP enrichment and context maps.

    Writes (:meth:`ingest`, :meth:`attach_enrichment`) are serialised by a
    lock; readers always work on an immutable set of arrays, so a query
    running during an ingest sees either the state before or after a whole
    batch.

    Examples
    --------
    >>> store = AlertStore()
    >>> store.ingest(AlertReader("alerts.jsonl"))
    >>> store.query_entity("192.0.2.7", (t_start, t_end))
    """

    def __init__(self, no_ptr_rule=True):
        self._lock = threading.RLock()
        self._columns = _empty_columns()
        self._detectors = []
        self.enrichment = {}
        self.context = ContextMaps()
        self.no_ptr_rule = no_ptr_rule

    # Writing
    # =======

    def ingest(self, alerts):
        """
        Insert alerts. Input need not be time-sorted; exact duplicates (same
        time, IP, category, volume and detector) are stored once.

        Parameters
        ----------
        alerts : iterable of Alert

        Returns
        -------
        IngestSummary
            Number of received alerts per category, number newly stored and
            number of duplicates dropped.
        """
        ips, times, cats, vols, dets = [], [], [], [], []
        det_names = {}
        counts = [0, 0]
        for alert in alerts:
            ips.append(alert.ip_int)
            times.append(alert.t)
            cats.append(alert.c.code)
            vols.append(alert.v)
            dets.append(det_names.setdefault(alert.d, len(det_names)))
            counts[alert.c.code] += 1
        with self._lock:
            before = len(self)
            batch_names = list(det_names)
            new = {
                "ip": np.array(ips, dtype=np.uint32),
                "t": np.array(times, dtype=np.int64),
                "c": np.array(cats, dtype=np.uint8),
                "v": np.array(vols, dtype=np.int64),
                "d": np.array(dets, dtype=np.int32),
            }
            self._merge(new, batch_names)
            stored = len(self) - before
        summary = IngestSummary(scan=counts[0], access=counts[1], stored=stored,
                                duplicates=sum(counts) - stored)
        log_debug(f"Ingested {summary.as_dict()}", cmd="ingest")
        return summary

    def _merge(self, new, batch_names):
        old = self._columns
        # Detector codes follow the sorted detector names, so that the storage
        # order never depends on the order of ingestion.
        names = sorted(set(self._detectors) | set(batch_names))
        rank = {name: i for i, name in enumerate(names)}
        old_map = np.array([rank[n] for n in self._detectors], dtype=np.int32)
        new_map = np.array([rank[n] for n in batch_names], dtype=np.int32)
        merged = {}
        for name, dtype in _COLUMNS:
            if name == "d":
                parts = [old_map[old["d"]] if len(old_map) else old["d"],
                         new_map[new["d"]] if len(new_map) else new["d"]]
            else:
                parts = [old[name], new[name]]
            merged[name] = np.concatenate(parts).astype(dtype, copy=False)
        order = np.lexsort((merged["d"], merged["v"], merged["c"], merged["t"], merged["ip"]))
        merged = {name: arr[order] for name, arr in merged.items()}
        if len(order) > 1:
            keep = np.ones(len(order), dtype=bool)
            same = np.ones(len(order) - 1, dtype=bool)
            for name, _ in _COLUMNS:
                same &= merged[name][1:] == merged[name][:-1]
            keep[1:] = ~same
            merged = {name: arr[keep] for name, arr in merged.items()}
        for arr in merged.values():
            arr.setflags(write=False)
        self._detectors = names
        self._columns = merged

    def attach_enrichment(self, records):
        """
        Attach enrichment records (JSON lines as text or bytes, or dicts).
        The latest record per IP wins; unknown IPs get an entry without
        alerts. Malformed or undecodable lines are skipped with a warning and
        counted.

        Returns
        -------
        EnrichmentSummary
        """
        n_records = n_skipped = n_new = 0
        with self._lock:
            for lineno, line in enumerate(records, start=1):
                if isinstance(line, (str, bytes)):
                    line = line.strip()
                    if not line or line[:1] in ("#", b"#"):
                        continue
                n_records += 1
                try:
                    ip, tags = parse_enrichment_record(line, no_ptr_rule=self.no_ptr_rule)
                except (MalformedRecord, InvalidField) as e:
                    n_skipped += 1
                    warn(f"Skipping enrichment record {lineno}: {e}")
                    continue
                if ip not in self.enrichment and not self.has_alerts(ip):
                    n_new += 1
                self.enrichment[ip] = tags
        return EnrichmentSummary(records=n_records, skipped=n_skipped, new_ips=n_new)

    def set_context(self, maps):
        """Replace the ASN/country context maps."""
        if not isinstance(maps, ContextMaps):
            raise TypeError("Expected ContextMaps.")
        with self._lock:
            self.context = maps

    # Reading
    # =======

    @property
    def columns(self):
        """Read-only columnar view ``{ip, t, c, v, d}`` of all stored alerts."""
        return self._columns

    @property
    def detectors(self):
        return list(self._detectors)

    def __len__(self):
        return len(self._columns["t"])

    def time_range(self):
        """``(first, last)`` alert time, or None if the store is empty."""
        t = self._columns["t"]
        if len(t) == 0:
            return None
        return int(t.min()), int(t.max())

    def _ip_bounds(self, cols, lo_ip, hi_ip):
        ip = cols["ip"]
        return (np.searchsorted(ip, np.uint32(lo_ip), side="left"),
                np.searchsorted(ip, np.uint32(hi_ip), side="right"))

    def has_alerts(self, ip):
        ip = ip_to_int(ip)
        lo, hi = self._ip_bounds(self._columns, ip, ip)
        return hi > lo

    def entity_arrays(self, ip, start, end):
        """
        Alerts of one IP with ``start <= t < end`` as a dict of arrays
        (``t``, ``c``, ``v``, ``d``), time ascending.
        """
        cols = self._columns
        ip = ip_to_int(ip)
        lo, hi = self._ip_bounds(cols, ip, ip)
        t = cols["t"][lo:hi]
        a = lo + np.searchsorted(t, start, side="left")
        b = lo + np.searchsorted(t, end, side="left")
        if start >= end:
            b = a
        return {name: cols[name][a:b] for name in ("t", "c", "v", "d")}

    def prefix_arrays(self, prefix, start, end):
        """
        Alerts of all IPs in a /24 prefix with ``start <= t < end`` as a dict
        of arrays (``ip``, ``t``, ``c``, ``v``, ``d``), time ascending.
        """
        cols = self._columns
        key = _prefix_key(prefix)
        lo, hi = self._ip_bounds(cols, key << 8, (key << 8) | 0xFF)
        t = cols["t"][lo:hi]
        mask = (t >= start) & (t < end)
        idx = np.nonzero(mask)[0] + lo
        if len(idx) > 1:
            order = np.lexsort((cols["d"][idx], cols["v"][idx], cols["c"][idx],
                                cols["ip"][idx], cols["t"][idx]))
            idx = idx[order]
        return {name: cols[name][idx] for name in ("ip", "t", "c", "v", "d")}

    def query_entity(self, ip, interval):
        """
        All alerts of ``ip`` with ``start <= t < end``, time ascending.

        Parameters
        ----------
        ip : str, int or ipaddress.IPv4Address
        interval : tuple of int
            Half-open ``(start, end)`` in epoch seconds.

        Returns
        -------
        list of EntityAlert
            Empty for unknown addresses or empty intervals.
        """
        start, end = interval
        arrs = self.entity_arrays(ip, start, end)
        return [EntityAlert(int(t), Category(int(c)), int(v), self._detectors[d])
                for t, c, v, d in zip(arrs["t"], arrs["c"], arrs["v"], arrs["d"])]

    def query_prefix(self, prefix, interval):
        """
        All alerts of the /24 prefix with ``start <= t < end``, time ascending.

        Returns
        -------
        list of PrefixAlert
        """
        start, end = interval
        arrs = self.prefix_arrays(prefix, start, end)
        return [PrefixAlert(ipaddress.IPv4Address(int(ip)), int(t), Category(int(c)), int(v),
                            self._detectors[d])
                for ip, t, c, v, d in zip(arrs["ip"], arrs["t"], arrs["c"], arrs["v"], arrs["d"])]

    def reported_ips(self, start, end, category=None):
        """Sorted distinct IPs (uint32) with at least one alert in ``[start, end)``."""
        cols = self._columns
        mask = (cols["t"] >= start) & (cols["t"] < end)
        if category is not None:
            mask &= cols["c"] == Category.from_label(category).code
        return np.unique(cols["ip"][mask])

    def entities(self):
        """Sorted distinct IPs (uint32) known to the store, with alerts or enrichment."""
        known = np.unique(self._columns["ip"])
        if self.enrichment:
            extra = np.fromiter(self.enrichment.keys(), dtype=np.uint32, count=len(self.enrichment))
            known = np.union1d(known, extra)
        return known

    def tags(self, ip):
        """Enrichment of an address, or the defaults for an unknown one."""
        return self.enrichment.get(ip_to_int(ip), EnrichmentTags.missing(self.no_ptr_rule))

    def resolve_context(self, ips):
        """
        ASN and country codes for many IPs: enrichment values take precedence
        over the CIDR tables.

        Returns
        -------
        asns : list
            ASN or None per address.
        countries : list
            Country code or None per address.
        """
        ips = np.asarray(ips, dtype=np.uint32)
        asn_values = self.context.ip_to_asn.values
        cc_values = self.context.ip_to_country.values
        asn_codes = self.context.ip_to_asn.lookup_codes(ips)
        cc_codes = self.context.ip_to_country.lookup_codes(ips)
        asns, countries = [], []
        for ip, a, c in zip(ips, asn_codes, cc_codes):
            tags = self.enrichment.get(int(ip))
            asn = tags.asn if tags is not None and tags.asn is not None else (
                asn_values[a] if a >= 0 else None)
            cc = tags.country if tags is not None and tags.country is not None else (
                cc_values[c] if c >= 0 else None)
            asns.append(asn)
            countries.append(cc)
        return asns, countries

    # Persistence
    # ===========

    def snapshot_save(self, filename):
        """
        Save alerts, enrichment and context maps to one container file
        (see :mod:`fmpscore.formats.container`).
        """
        with self._lock:
            cols = self._columns
            enrich_ips = sorted(self.enrichment)
            tags = [self.enrichment[ip] for ip in enrich_ips]
            countries = sorted({t.country for t in tags if t.country is not None})
            cc_index = {cc: i for i, cc in enumerate(countries)}
            arrays = {f"alert_{name}": cols[name] for name, _ in _COLUMNS}
            arrays["enrich_ip"] = np.array(enrich_ips, dtype=np.uint32)
            arrays["enrich_flags"] = np.array(
                [[*t.on_blacklist, t.on_dynamic_list, t.tag_static, t.tag_dynamic,
                  t.tag_ip_in_hostname, t.tag_no_ptr] for t in tags],
                dtype=np.uint8).reshape(len(tags), NUM_BLACKLISTS + 5)
            arrays["enrich_asn"] = np.array([-1 if t.asn is None else t.asn for t in tags],
                                            dtype=np.int64)
            arrays["enrich_cc"] = np.array([-1 if t.country is None else cc_index[t.country]
                                            for t in tags], dtype=np.int32)
            maps = self.context
            for label, table in (("asn", maps.ip_to_asn), ("cc", maps.ip_to_country)):
                networks, lengths, codes = table.to_arrays()
                arrays[f"map_{label}_network"] = networks
                arrays[f"map_{label}_length"] = lengths
                arrays[f"map_{label}_code"] = codes
            meta = {
                "detectors": self._detectors,
                "hostnames": [t.hostname for t in tags],
                "countries": countries,
                "no_ptr_rule": self.no_ptr_rule,
                "asn_values": maps.ip_to_asn.values,
                "cc_values": maps.ip_to_country.values,
                "asn_sizes": [[int(k), int(v)] for k, v in sorted(maps.asn_sizes.items())],
                "cc_sizes": [[k, int(v)] for k, v in sorted(maps.country_sizes.items())],
            }
            write_container("snapshot", filename, meta, arrays)
        log_debug(f"Saved snapshot with {len(self)} alerts to {filename}", cmd="snapshot")

    @classmethod
    def snapshot_load(cls, filename):
        """Load a store written by :meth:`snapshot_save`."""
        meta, arrays = read_container("snapshot", filename)
        store = cls(no_ptr_rule=meta.get("no_ptr_rule", True))
        try:
            columns = {name: arrays[f"alert_{name}"].astype(dtype, copy=False)
                       for name, dtype in _COLUMNS}
            lengths = {len(arr) for arr in columns.values()}
            if len(lengths) != 1:
                raise CorruptSnapshot(f"Alert columns of {filename} differ in length.")
            for arr in columns.values():
                arr.setflags(write=False)
            store._columns = columns
            store._detectors = list(meta["detectors"])
            countries = meta["countries"]
            flags = arrays["enrich_flags"]
            for i, ip in enumerate(arrays["enrich_ip"]):
                row = [bool(x) for x in flags[i]]
                asn = int(arrays["enrich_asn"][i])
                cc = int(arrays["enrich_cc"][i])
                store.enrichment[int(ip)] = EnrichmentTags(
                    on_blacklist=tuple(row[:NUM_BLACKLISTS]),
                    on_dynamic_list=row[NUM_BLACKLISTS],
                    hostname=meta["hostnames"][i],
                    tag_static=row[NUM_BLACKLISTS + 1],
                    tag_dynamic=row[NUM_BLACKLISTS + 2],
                    tag_ip_in_hostname=row[NUM_BLACKLISTS + 3],
                    tag_no_ptr=row[NUM_BLACKLISTS + 4],
                    asn=None if asn < 0 else asn,
                    country=None if cc < 0 else countries[cc],
                )
            store.context = ContextMaps(
                asn_sizes={int(k): int(v) for k, v in meta["asn_sizes"]},
                country_sizes={k: int(v) for k, v in meta["cc_sizes"]},
                ip_to_asn=PrefixTable.from_arrays(arrays["map_asn_network"], arrays["map_asn_length"],
                                                  arrays["map_asn_code"], meta["asn_values"]),
                ip_to_country=PrefixTable.from_arrays(arrays["map_cc_network"], arrays["map_cc_length"],
                                                      arrays["map_cc_code"], meta["cc_values"]),
            )
            if len(columns["d"]) and columns["d"].max() >= len(store._detectors):
                raise CorruptSnapshot(f"Detector codes out of range in {filename}.")
        except (KeyError, IndexError, TypeError, ValueError) as e:
            if isinstance(e, CorruptSnapshot):
                raise
            raise CorruptSnapshot(f"Inconsistent snapshot {filename}: {e}") from e
        return store

    def __repr__(self):
        return (f"AlertStore(alerts={len(self)}, ips={len(np.unique(self._columns['ip']))}, "
                + f"enriched={len(self.enrichment)})")
