# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Per-IP enrichment (blacklist flags, hostname tags, ASN, country) and the
context maps used to compute country/ASN maliciousness rates.

Enrichment records are line-delimited JSON::

    {"ip": "192.0.2.7", "hostname": "static-192-0-2-7.isp.example",
     "bl": [1, 0, 0, 0, 0], "dyn": 0, "asn": 64500, "cc": "CZ"}

Context maps are four CSV files in one directory: ``asn_map.csv`` (cidr,asn),
``cc_map.csv`` (cidr,cc), ``asn_sizes.csv`` (asn,count) and ``cc_sizes.csv``
(cc,count).
"""

import ipaddress
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Tuple
from warnings import warn

import numpy as np
import pandas as pd

from ..alerts import decode_line, parse_ip
from ..errors import ConfigError, InvalidField, IoError, MalformedRecord

NUM_BLACKLISTS = 5
DYNAMIC_KEYWORDS = ("dynamic", "dyn", "dsl", "dial", "pool")
STATIC_KEYWORD = "static"


class HostnameTags(NamedTuple):
    static: bool
    dynamic: bool
    ip_in_hostname: bool
    no_ptr: bool


def _octets_pattern(octets):
    # Octets may be zero padded ("192-000-002-007") but must not be glued to
    # other digits.
    body = r"\D+".join(f"0*{o}" for o in octets)
    return re.compile(rf"(?<!\d){body}(?!\d)")


def derive_hostname_tags(hostname, ip, no_ptr_rule=True):
    """
    Apply the hand-written hostname rules.

    Parameters
    ----------
    hostname : str or None
        Reverse-DNS name of the address, None when there is no PTR record.
    ip : str, int or ipaddress.IPv4Address
        The address the hostname belongs to.
    no_ptr_rule : bool, optional
        Whether the fourth tag (absent hostname) is active. Defaults to True.

    Returns
    -------
    HostnameTags
        ``(static, dynamic, ip_in_hostname, no_ptr)``.

    Examples
    --------
    >>> derive_hostname_tags("static-192-0-2-7.isp.example", "192.0.2.7")
    HostnameTags(static=True, dynamic=False, ip_in_hostname=True, no_ptr=False)
    """
    if not hostname:
        return HostnameTags(False, False, False, bool(no_ptr_rule))
    ip = ipaddress.IPv4Address(ip if not isinstance(ip, np.integer) else int(ip))
    lowered = hostname.lower()
    octets = str(ip).split(".")
    in_hostname = bool(_octets_pattern(octets).search(lowered)
                       or _octets_pattern(octets[::-1]).search(lowered))
    return HostnameTags(
        static=STATIC_KEYWORD in lowered,
        dynamic=any(keyword in lowered for keyword in DYNAMIC_KEYWORDS),
        ip_in_hostname=in_hostname,
        no_ptr=False,
    )


@dataclass(frozen=True)
class EnrichmentTags:
    """Point-in-time non-alert data about one IP address."""
    on_blacklist: Tuple[bool, ...] = (False,) * NUM_BLACKLISTS
    on_dynamic_list: bool = False
    hostname: Optional[str] = None
    tag_static: bool = False
    tag_dynamic: bool = False
    tag_ip_in_hostname: bool = False
    tag_no_ptr: bool = True
    asn: Optional[int] = None
    country: Optional[str] = None

    @classmethod
    def build(cls, ip, hostname=None, on_blacklist=None, on_dynamic_list=False,
              asn=None, country=None, no_ptr_rule=True):
        """Create tags, deriving the four hostname tags from ``hostname``."""
        tags = derive_hostname_tags(hostname, ip, no_ptr_rule=no_ptr_rule)
        if on_blacklist is None:
            on_blacklist = (False,) * NUM_BLACKLISTS
        return cls(
            on_blacklist=tuple(bool(flag) for flag in on_blacklist),
            on_dynamic_list=bool(on_dynamic_list),
            hostname=hostname or None,
            tag_static=tags.static,
            tag_dynamic=tags.dynamic,
            tag_ip_in_hostname=tags.ip_in_hostname,
            tag_no_ptr=tags.no_ptr,
            asn=asn,
            country=country,
        )

    @classmethod
    def missing(cls, no_ptr_rule=True):
        """Tags of an address about which nothing is known."""
        return cls(tag_no_ptr=bool(no_ptr_rule))

    def as_features(self):
        """The 10 non-alert features: bl1..bl5, dynamic list, 4 hostname tags."""
        return np.array(
            [*self.on_blacklist, self.on_dynamic_list, self.tag_static,
             self.tag_dynamic, self.tag_ip_in_hostname, self.tag_no_ptr],
            dtype=np.float64,
        )


def _flag(value, key):
    if value in (0, 1) and not isinstance(value, float):
        return bool(value)
    raise InvalidField(f"Field {key!r} must be 0 or 1, got {value!r}.")


def parse_enrichment_record(line, no_ptr_rule=True):
    """
    Parse one enrichment line.

    Returns
    -------
    ip : int
        The address as an integer.
    tags : EnrichmentTags

    Raises
    ------
    MalformedRecord
        Invalid JSON or missing ``ip``.
    InvalidField
        Invalid values.
    """
    if isinstance(line, dict):
        record = line
    else:
        line = decode_line(line)
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecord(f"Invalid JSON: {e.msg}.") from None
    if not isinstance(record, dict) or "ip" not in record:
        raise MalformedRecord("Enrichment record must be an object with key 'ip'.")
    ip = parse_ip(record["ip"])
    hostname = record.get("hostname")
    if hostname is not None and not isinstance(hostname, str):
        raise InvalidField(f"Field 'hostname' must be a string, got {hostname!r}.")
    bl = record.get("bl", [0] * NUM_BLACKLISTS)
    if not isinstance(bl, list) or len(bl) != NUM_BLACKLISTS:
        raise InvalidField(f"Field 'bl' must list {NUM_BLACKLISTS} flags, got {bl!r}.")
    bl = tuple(_flag(value, "bl") for value in bl)
    dyn = _flag(record.get("dyn", 0), "dyn")
    asn = record.get("asn")
    if asn is not None and (isinstance(asn, bool) or not isinstance(asn, int)
                            or not 0 <= asn < 2**32):
        raise InvalidField(f"Field 'asn' must be a 32-bit unsigned integer, got {asn!r}.")
    cc = record.get("cc")
    if cc is not None:
        if not isinstance(cc, str) or len(cc) != 2 or not cc.isalpha():
            raise InvalidField(f"Field 'cc' must be an ISO-3166 alpha-2 code, got {cc!r}.")
        cc = cc.upper()
    tags = EnrichmentTags.build(ip, hostname=hostname, on_blacklist=bl, on_dynamic_list=dyn,
                                asn=asn, country=cc, no_ptr_rule=no_ptr_rule)
    return int(ip), tags


class PrefixTable:
    """
    Longest-prefix-match table from IPv4 CIDR blocks to values.

    For every prefix length present, the network keys (address shifted right
    by ``32 - length``) are kept sorted, so a lookup is one binary search per
    distinct length, longest first.
    """

    def __init__(self, entries=()):
        self._values = []
        self._value_index = {}
        networks = {}
        for cidr, value in entries:
            try:
                net = ipaddress.IPv4Network(str(cidr).strip(), strict=False)
            except ValueError:
                raise InvalidField(f"Invalid CIDR block {cidr!r}.") from None
            networks[(int(net.network_address), net.prefixlen)] = self._intern(value)
        self._build(networks)

    def _intern(self, value):
        if value not in self._value_index:
            self._value_index[value] = len(self._values)
            self._values.append(value)
        return self._value_index[value]

    def _build(self, networks):
        self._tables = []
        by_length = {}
        for (network, length), code in networks.items():
            by_length.setdefault(length, []).append((network, code))
        for length in sorted(by_length, reverse=True):
            rows = sorted(by_length[length])
            shift = 32 - length
            keys = np.array([network >> shift for network, _ in rows], dtype=np.uint64)
            codes = np.array([code for _, code in rows], dtype=np.int64)
            self._tables.append((length, keys, codes))

    def __len__(self):
        return sum(len(keys) for _, keys, _ in self._tables)

    @property
    def values(self):
        return list(self._values)

    def lookup_codes(self, ips):
        """Value codes (index into :attr:`values`) for many addresses, -1 if unmapped."""
        ips = np.asarray(ips, dtype=np.uint64)
        result = np.full(ips.shape, -1, dtype=np.int64)
        for length, keys, codes in self._tables:
            todo = result < 0
            if not todo.any():
                break
            wanted = ips[todo] >> np.uint64(32 - length)
            pos = np.searchsorted(keys, wanted)
            pos_clipped = np.minimum(pos, len(keys) - 1)
            hit = (pos < len(keys)) & (keys[pos_clipped] == wanted)
            found = np.where(hit, codes[pos_clipped], -1)
            result[todo] = found
        return result

    def lookup(self, ip):
        """Value of the longest matching prefix, or None."""
        ip = int(ip) if isinstance(ip, (int, np.integer)) else int(parse_ip(ip))
        code = self.lookup_codes([ip])[0]
        return None if code < 0 else self._values[code]

    def to_arrays(self):
        networks, lengths, codes = [], [], []
        for length, keys, table_codes in self._tables:
            networks.extend(int(k) << (32 - length) for k in keys)
            lengths.extend([length] * len(keys))
            codes.extend(int(c) for c in table_codes)
        return (np.array(networks, dtype=np.uint32), np.array(lengths, dtype=np.uint8),
                np.array(codes, dtype=np.int64))

    @classmethod
    def from_arrays(cls, networks, lengths, codes, values):
        table = cls()
        for value in values:
            table._intern(value if not isinstance(value, list) else tuple(value))
        table._build({(int(n), int(l)): int(c) for n, l, c in zip(networks, lengths, codes)})
        return table


@dataclass
class ContextMaps:
    """Address-to-ASN/country tables and the total address counts per ASN/country."""
    asn_sizes: dict = field(default_factory=dict)
    country_sizes: dict = field(default_factory=dict)
    ip_to_asn: PrefixTable = field(default_factory=PrefixTable)
    ip_to_country: PrefixTable = field(default_factory=PrefixTable)

    def __post_init__(self):
        for name, sizes in (("ASN", self.asn_sizes), ("country", self.country_sizes)):
            for key, size in sizes.items():
                if size < 1:
                    raise ConfigError(f"Size of {name} {key} must be >= 1, got {size}.")

    @property
    def is_empty(self):
        return len(self.ip_to_asn) == 0 and len(self.ip_to_country) == 0


def _read_pairs(path, names):
    if not path.exists():
        warn(f"Context map {path} not found; treating it as empty.")
        return pd.DataFrame(columns=names)
    try:
        df = pd.read_csv(path, header=None, names=names, dtype=str, comment="#",
                         skipinitialspace=True)
    except OSError as e:
        raise IoError(f"Cannot read context map {path}: {e}") from e
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=names)
    except ValueError as e:
        raise MalformedRecord(f"Context map {path} is not a CSV table: {e}") from None
    df = df.dropna()
    # Header row is optional
    return df[df[names[0]].str.strip().str.lower() != names[0]]


def load_context_maps(directory):
    """
    Load the four context-map CSV files from a directory.

    Parameters
    ----------
    directory : pathlib.Path
        Directory containing ``asn_map.csv``, ``cc_map.csv``, ``asn_sizes.csv``
        and ``cc_sizes.csv``. Missing files are treated as empty.

    Returns
    -------
    ContextMaps
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"Context map directory {directory} not found!")
    asn_map = _read_pairs(directory / "asn_map.csv", ["cidr", "asn"])
    cc_map = _read_pairs(directory / "cc_map.csv", ["cidr", "cc"])
    asn_sizes = _read_pairs(directory / "asn_sizes.csv", ["asn", "count"])
    cc_sizes = _read_pairs(directory / "cc_sizes.csv", ["cc", "count"])
    try:
        return ContextMaps(
            asn_sizes={int(a): int(c) for a, c in zip(asn_sizes["asn"], asn_sizes["count"])},
            country_sizes={cc.strip().upper(): int(c) for cc, c in zip(cc_sizes["cc"], cc_sizes["count"])},
            ip_to_asn=PrefixTable(zip(asn_map["cidr"], (int(a) for a in asn_map["asn"]))),
            ip_to_country=PrefixTable(zip(cc_map["cidr"], (cc.strip().upper() for cc in cc_map["cc"]))),
        )
    except ValueError as e:
        if isinstance(e, (ConfigError, InvalidField)):
            raise
        raise InvalidField(f"Invalid number in context maps of {directory}: {e}") from e


def write_context_maps(maps, directory):
    """Write context maps as the four CSV files (inverse of :func:`load_context_maps`)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for table, column, fname in ((maps.ip_to_asn, "asn", "asn_map.csv"),
                                 (maps.ip_to_country, "cc", "cc_map.csv")):
        networks, lengths, codes = table.to_arrays()
        values = table.values
        rows = sorted((int(n), int(l), values[int(c)]) for n, l, c in zip(networks, lengths, codes))
        pd.DataFrame({
            "cidr": [f"{ipaddress.IPv4Address(n)}/{l}" for n, l, _ in rows],
            column: [v for _, _, v in rows],
        }).to_csv(directory / fname, index=False)
    pd.DataFrame({"asn": sorted(maps.asn_sizes),
                  "count": [maps.asn_sizes[a] for a in sorted(maps.asn_sizes)]}
                 ).to_csv(directory / "asn_sizes.csv", index=False)
    pd.DataFrame({"cc": sorted(maps.country_sizes),
                  "count": [maps.country_sizes[c] for c in sorted(maps.country_sizes)]}
                 ).to_csv(directory / "cc_sizes.csv", index=False)
