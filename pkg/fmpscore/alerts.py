# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Alert data model and the line-delimited JSON alert interchange format.

One alert per line::

    {"ts": "2017-09-01T00:00:00Z", "src": "192.0.2.7", "cat": "scan", "vol": 12, "det": "hp1"}

A record may list several sources under ``srcs`` instead of ``src``; it is
expanded into one alert per source with the volume split equally (see
:func:`expand_multisource`). Lines starting with ``#`` are comments.
"""

import datetime
import enum
import ipaddress
import json
from dataclasses import dataclass
from pathlib import Path
from warnings import warn

from .errors import ConfigError, InvalidField, IoError, MalformedRecord
from .general import SECONDS_PER_DAY

DEFAULT_HISTORY_DAYS = 7
DEFAULT_PREDICTION_DAYS = 1

_EPOCH = datetime.datetime(1970, 1, 1, tzinfo=datetime.timezone.utc)


class Category(enum.IntEnum):
    """Alert category. The integer values are the serialization codes."""
    SCAN = 0
    ACCESS = 1

    @property
    def label(self):
        return self.name.lower()

    @property
    def code(self):
        return int(self)

    @classmethod
    def from_label(cls, label):
        if isinstance(label, Category):
            return label
        try:
            return cls[str(label).upper()]
        except KeyError:
            raise InvalidField(f"Unknown alert category {label!r} "
                             + "(expected 'scan' or 'access').") from None

    @classmethod
    def from_code(cls, code):
        try:
            return cls(int(code))
        except ValueError:
            raise InvalidField(f"Unknown category code {code!r}.") from None

    def other(self):
        return Category.ACCESS if self is Category.SCAN else Category.SCAN

    def __str__(self):
        return self.label


def parse_time(text):
    """
    Parse an RFC 3339 timestamp into integer seconds since the epoch (UTC).
    Fractions of a second are truncated.
    """
    if not isinstance(text, str):
        raise InvalidField(f"Timestamp must be a string, got {text!r}.")
    value = text.strip()
    if value.endswith(('Z', 'z')):
        value = value[:-1] + '+00:00'
    try:
        when = datetime.datetime.fromisoformat(value)
    except ValueError:
        raise InvalidField(f"Unparseable timestamp {text!r}.") from None
    if when.tzinfo is None:
        raise InvalidField(f"Timestamp {text!r} has no UTC offset.")
    return int((when - _EPOCH).total_seconds() // 1)


def format_time(seconds):
    """Format epoch seconds as an RFC 3339 UTC timestamp with a ``Z`` suffix."""
    when = _EPOCH + datetime.timedelta(seconds=int(seconds))
    return when.strftime('%Y-%m-%dT%H:%M:%SZ')


def parse_ip(text):
    """Parse a dotted-quad IPv4 address, raising InvalidField on failure."""
    if isinstance(text, ipaddress.IPv4Address):
        return text
    try:
        return ipaddress.IPv4Address(text)
    except (ipaddress.AddressValueError, ValueError, TypeError):
        raise InvalidField(f"Invalid IPv4 address {text!r}.") from None


@dataclass(frozen=True, order=True)
class Alert:
    """
    One detected malicious event.

    Attributes
    ----------
    t : int
        Detection time, seconds since the epoch (UTC).
    e : ipaddress.IPv4Address
        Reported source entity.
    c : Category
        Alert category.
    v : int
        Volume (number of connection attempts), non-negative.
    d : str
        Detector identifier.
    """
    t: int
    e: ipaddress.IPv4Address
    c: Category
    v: int
    d: str

    def __post_init__(self):
        if not isinstance(self.e, ipaddress.IPv4Address):
            object.__setattr__(self, 'e', parse_ip(self.e))
        if not isinstance(self.c, Category):
            object.__setattr__(self, 'c', Category.from_label(self.c))
        if self.v < 0:
            raise InvalidField(f"Negative volume {self.v}.")
        if not self.d:
            raise InvalidField("Empty detector identifier.")

    @property
    def ip_int(self):
        return int(self.e)


@dataclass(frozen=True)
class WindowConfig:
    """
    Prediction time and window lengths.

    The history window is ``[t0 - w_h days, t0)`` and the prediction window
    is ``(t0, t0 + w_p days]``.
    """
    t0: int
    w_h: int = DEFAULT_HISTORY_DAYS
    w_p: int = DEFAULT_PREDICTION_DAYS

    def __post_init__(self):
        if int(self.w_h) != self.w_h or self.w_h < 1:
            raise ConfigError(f"History window must be a whole number of days >= 1, got {self.w_h}.")
        if int(self.w_p) != self.w_p or self.w_p < 1:
            raise ConfigError(f"Prediction window must be a whole number of days >= 1, got {self.w_p}.")
        object.__setattr__(self, 't0', int(self.t0))

    @property
    def history(self):
        """Half-open interval ``(start, end)`` of the history window."""
        return self.t0 - self.w_h * SECONDS_PER_DAY, self.t0

    @property
    def last_day(self):
        """Half-open interval covering the last day of the history window."""
        return self.t0 - SECONDS_PER_DAY, self.t0

    @property
    def prediction(self):
        """Bounds ``(start, end)`` of the prediction window, open at start, closed at end."""
        return self.t0, self.t0 + self.w_p * SECONDS_PER_DAY

    def shifted(self, t0):
        return WindowConfig(t0=t0, w_h=self.w_h, w_p=self.w_p)


def _require(record, key, types):
    if key not in record:
        raise MalformedRecord(f"Missing key {key!r} in alert record.")
    value = record[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise InvalidField(f"Field {key!r} has invalid value {value!r}.")
    return value


def _common_fields(record):
    if not isinstance(record, dict):
        raise MalformedRecord("Alert record must be a JSON object.")
    t = parse_time(_require(record, 'ts', str))
    c = Category.from_label(_require(record, 'cat', str))
    v = _require(record, 'vol', int)
    if v < 0:
        raise InvalidField(f"Negative volume {v}.")
    d = _require(record, 'det', str)
    if not d:
        raise InvalidField("Empty detector identifier.")
    return t, c, v, d


def decode_line(line):
    """
    Text of one input line. Bytes are decoded as UTF-8; undecodable bytes
    raise MalformedRecord so that callers can skip the line.
    """
    if isinstance(line, bytes):
        try:
            return line.decode('utf-8')
        except UnicodeDecodeError as e:
            raise MalformedRecord(f"Invalid UTF-8 at byte {e.start}.") from None
    return line


def _load_line(line):
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"Invalid JSON: {e.msg}.") from None


def parse_alert(line):
    """
    Parse one single-source record of the alert interchange format.

    Parameters
    ----------
    line : str
        One JSON line with keys ``ts``, ``src``, ``cat``, ``vol``, ``det``.

    Returns
    -------
    Alert

    Raises
    ------
    MalformedRecord
        Bad JSON, missing keys or a multi-source record (use
        :func:`parse_record` for those).
    InvalidField
        Bad IP, unknown category, negative volume or bad timestamp.
    """
    record = _load_line(line)
    if isinstance(record, dict) and 'srcs' in record and 'src' not in record:
        raise MalformedRecord("Multi-source record; expand it with expand_multisource.")
    t, c, v, d = _common_fields(record)
    e = parse_ip(_require(record, 'src', str))
    return Alert(t=t, e=e, c=c, v=v, d=d)


def expand_multisource(record):
    """
    Expand a multi-source record into one alert per source.

    Each source gets ``floor(v / k)`` volume and the first ``v mod k``
    sources one extra unit, so the total volume is preserved.

    Parameters
    ----------
    record : dict or str
        Decoded (or raw JSON) record with a ``srcs`` list (or a single ``src``).

    Returns
    -------
    list of Alert
    """
    if isinstance(record, str):
        record = _load_line(record)
    t, c, v, d = _common_fields(record)
    if 'srcs' in record:
        sources = record['srcs']
        if not isinstance(sources, list):
            raise MalformedRecord("Field 'srcs' must be a list.")
    elif 'src' in record:
        sources = [record['src']]
    else:
        raise MalformedRecord("Missing key 'src' or 'srcs' in alert record.")
    if len(sources) == 0:
        raise MalformedRecord("Multi-source record without sources.")
    ips = [parse_ip(src) for src in sources]
    share, remainder = divmod(v, len(ips))
    return [Alert(t=t, e=ip, c=c, v=share + (1 if i < remainder else 0), d=d)
            for i, ip in enumerate(ips)]


def parse_record(line):
    """Parse any record (single or multi-source) into a list of alerts."""
    record = _load_line(line)
    if isinstance(record, dict) and 'srcs' in record:
        return expand_multisource(record)
    t, c, v, d = _common_fields(record)
    return [Alert(t=t, e=parse_ip(_require(record, 'src', str)), c=c, v=v, d=d)]


def render_alert(alert):
    """Canonical JSON line (without newline) for an alert."""
    return json.dumps({
        'ts': format_time(alert.t),
        'src': str(alert.e),
        'cat': alert.c.label,
        'vol': int(alert.v),
        'det': alert.d,
    }, sort_keys=True, separators=(',', ':'))


def write_alerts(alerts, filename):
    """Write alerts in the interchange format, one per line."""
    filename = Path(filename)
    with filename.open('w', encoding='utf-8') as fid:
        for alert in alerts:
            fid.write(render_alert(alert))
            fid.write('\n')


class AlertReader:
    """
    Stream alerts from a file or an iterable of lines.

    Comment (``#``) and blank lines are ignored, multi-source records are
    expanded. With ``strict=False`` bad lines are skipped and counted, with
    ``strict=True`` the first bad line raises.

    Examples
    --------
    >>> reader = AlertReader("alerts.jsonl")
    >>> store.ingest(reader)
    >>> print(reader.n_skipped)
    """

    def __init__(self, source, strict=False):
        self._source = source
        self.strict = strict
        self.n_lines = 0
        self.n_alerts = 0
        self.n_skipped = 0

    def _lines(self):
        if isinstance(self._source, (str, Path)):
            try:
                fid = Path(self._source).open('rb')
            except OSError as e:
                raise IoError(f"Cannot read alerts {self._source}: {e}") from e
            with fid:
                yield from fid
        else:
            yield from self._source

    def __iter__(self):
        for lineno, line in enumerate(self._lines(), start=1):
            self.n_lines += 1
            try:
                stripped = decode_line(line).strip()
                if not stripped or stripped.startswith('#'):
                    continue
                alerts = parse_record(stripped)
            except (MalformedRecord, InvalidField) as e:
                if self.strict:
                    raise type(e)(f"Line {lineno}: {e}") from None
                self.n_skipped += 1
                warn(f"Skipping line {lineno}: {e}")
                continue
            self.n_alerts += len(alerts)
            yield from alerts

    def __repr__(self):
        return (f"AlertReader(lines={self.n_lines}, alerts={self.n_alerts}, "
                + f"skipped={self.n_skipped})")
