# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import ipaddress
import json

import numpy as np
import pytest

from fmpscore.alerts import Alert, Category
from fmpscore.errors import CorruptSnapshot, InvalidField, MalformedRecord, VersionMismatch
from fmpscore.store import (
    AlertStore,
    ContextMaps,
    EnrichmentTags,
    PrefixTable,
    derive_hostname_tags,
    load_context_maps,
    parse_enrichment_record,
    prefix24,
    write_context_maps,
)


class TestConfig:
    """Constants for the alert store tests."""

    T = 1_000_000
    IP_A = "192.0.2.7"
    IP_B = "192.0.2.200"
    IP_C = "198.51.100.1"
    ENRICHMENT = {"ip": "192.0.2.7", "hostname": "static-192-0-2-7.isp.example",
                  "bl": [1, 0, 0, 0, 1], "dyn": 0, "asn": 64500, "cc": "cz"}


def _alert(ip, t, c="scan", v=1, d="hp1"):
    return Alert(t=t, e=ip, c=c, v=v, d=d)


@pytest.fixture
def store():
    T = TestConfig.T
    store = AlertStore()
    store.ingest([
        _alert(TestConfig.IP_A, T + 30),
        _alert(TestConfig.IP_A, T + 10, v=5),
        _alert(TestConfig.IP_A, T + 20, c="access", d="ids2"),
        _alert(TestConfig.IP_B, T + 15, v=2),
        _alert(TestConfig.IP_C, T + 5),
    ])
    return store


def test_ingest_and_query(store):
    T = TestConfig.T
    assert len(store) == 5
    assert store.detectors == ["hp1", "ids2"]
    assert store.time_range() == (T + 5, T + 30)
    alerts = store.query_entity(TestConfig.IP_A, (T, T + 100))
    assert [a.t for a in alerts] == [T + 10, T + 20, T + 30]
    assert [a.c for a in alerts] == [Category.SCAN, Category.ACCESS, Category.SCAN]
    assert alerts[0].v == 5 and alerts[1].d == "ids2"
    # Half-open interval
    assert [a.t for a in store.query_entity(TestConfig.IP_A, (T + 10, T + 30))] == [T + 10, T + 20]
    assert store.query_entity(TestConfig.IP_A, (T + 30, T + 10)) == []
    assert store.query_entity("203.0.113.1", (T, T + 100)) == []


def test_duplicates_are_stored_once(store):
    summary = store.ingest([_alert(TestConfig.IP_A, TestConfig.T + 10, v=5),
                            _alert(TestConfig.IP_A, TestConfig.T + 10, v=6)])
    assert summary.received == 2
    assert summary.stored == 1
    assert summary.duplicates == 1
    assert len(store) == 6


def test_ingest_order_does_not_matter(store):
    alerts = [_alert(TestConfig.IP_B, TestConfig.T + i, d=f"det{i % 3}") for i in range(20)]
    a, b = AlertStore(), AlertStore()
    a.ingest(alerts)
    b.ingest(alerts[::-1][:7])
    b.ingest(alerts[::-1][7:])
    for name in ("ip", "t", "c", "v", "d"):
        assert np.array_equal(a.columns[name], b.columns[name])
    assert a.detectors == b.detectors


def test_query_prefix(store):
    T = TestConfig.T
    alerts = store.query_prefix("192.0.2.0/24", (T, T + 100))
    assert [a.t for a in alerts] == [T + 10, T + 15, T + 20, T + 30]
    assert {str(a.ip) for a in alerts} == {TestConfig.IP_A, TestConfig.IP_B}
    assert store.query_prefix(prefix24(TestConfig.IP_B), (T, T + 100)) == alerts
    assert store.query_prefix(TestConfig.IP_A, (T, T + 100)) == alerts
    with pytest.raises(InvalidField, match="/24"):
        store.query_prefix("192.0.0.0/16", (T, T + 100))


def test_reported_ips(store):
    T = TestConfig.T
    ips = store.reported_ips(T, T + 100)
    assert [str(ipaddress.IPv4Address(int(ip))) for ip in ips] == \
        [TestConfig.IP_A, TestConfig.IP_B, TestConfig.IP_C]
    access = store.reported_ips(T, T + 100, Category.ACCESS)
    assert access.tolist() == [int(ipaddress.IPv4Address(TestConfig.IP_A))]
    assert len(store.reported_ips(T + 31, T + 100)) == 0
    assert store.has_alerts(TestConfig.IP_C)
    assert not store.has_alerts("203.0.113.1")


def test_hostname_tags():
    assert derive_hostname_tags("static-192-0-2-7.isp.example", "192.0.2.7") == (True, False, True, False)
    assert derive_hostname_tags("7.2.0.192.dsl.example", "192.0.2.7") == (False, True, True, False)
    assert derive_hostname_tags("mail.example.org", "192.0.2.7") == (False, False, False, False)
    assert derive_hostname_tags(None, "192.0.2.7") == (False, False, False, True)
    assert derive_hostname_tags(None, "192.0.2.7", no_ptr_rule=False).no_ptr is False
    # 192.0.2.71 is not 192.0.2.7
    assert not derive_hostname_tags("host-192-0-2-71.example", "192.0.2.7").ip_in_hostname


def test_parse_enrichment_record():
    ip, tags = parse_enrichment_record(json.dumps(TestConfig.ENRICHMENT))
    assert ip == int(ipaddress.IPv4Address(TestConfig.IP_A))
    assert tags.on_blacklist == (True, False, False, False, True)
    assert tags.country == "CZ" and tags.asn == 64500
    assert tags.tag_static and tags.tag_ip_in_hostname and not tags.tag_no_ptr
    assert tags.as_features().tolist() == [1, 0, 0, 0, 1, 0, 1, 0, 1, 0]
    with pytest.raises(MalformedRecord):
        parse_enrichment_record("{}")
    with pytest.raises(InvalidField, match="'bl'"):
        parse_enrichment_record({"ip": TestConfig.IP_A, "bl": [1, 0]})
    with pytest.raises(InvalidField, match="'cc'"):
        parse_enrichment_record({"ip": TestConfig.IP_A, "cc": "CZE"})


def test_attach_enrichment(store):
    lines = [json.dumps(TestConfig.ENRICHMENT), json.dumps({"ip": "203.0.113.9"}), "oops"]
    with pytest.warns(UserWarning, match="Skipping enrichment record 3"):
        summary = store.attach_enrichment(lines)
    assert (summary.records, summary.skipped, summary.new_ips) == (3, 1, 1)
    assert store.tags(TestConfig.IP_A).tag_static
    assert store.tags("203.0.113.9").tag_no_ptr
    assert store.tags(TestConfig.IP_B) == EnrichmentTags.missing()
    assert len(store.entities()) == 4


def test_prefix_table_longest_match():
    table = PrefixTable([("10.0.0.0/8", "wide"), ("10.1.0.0/16", "mid"), ("10.1.2.0/24", "narrow")])
    assert table.lookup("10.1.2.3") == "narrow"
    assert table.lookup("10.1.3.3") == "mid"
    assert table.lookup("10.200.0.1") == "wide"
    assert table.lookup("11.0.0.1") is None
    ips = [int(ipaddress.IPv4Address(x)) for x in ("10.1.2.3", "11.0.0.1", "10.9.9.9")]
    codes = table.lookup_codes(ips)
    assert [table.values[c] if c >= 0 else None for c in codes] == ["narrow", None, "wide"]
    with pytest.raises(InvalidField):
        PrefixTable([("10.0.0.0/33", "bad")])


def test_context_maps_round_trip(tmp_path):
    maps = ContextMaps(
        asn_sizes={64500: 256, 64501: 512},
        country_sizes={"CZ": 768},
        ip_to_asn=PrefixTable([("192.0.2.0/24", 64500), ("198.51.100.0/23", 64501)]),
        ip_to_country=PrefixTable([("192.0.0.0/8", "CZ")]),
    )
    write_context_maps(maps, tmp_path)
    loaded = load_context_maps(tmp_path)
    assert loaded.asn_sizes == maps.asn_sizes
    assert loaded.country_sizes == maps.country_sizes
    assert loaded.ip_to_asn.lookup("198.51.101.1") == 64501
    assert loaded.ip_to_country.lookup("192.0.2.7") == "CZ"


def test_resolve_context(store):
    store.set_context(ContextMaps(asn_sizes={64501: 10}, ip_to_asn=PrefixTable([("192.0.2.0/24", 64501)])))
    store.attach_enrichment([json.dumps(TestConfig.ENRICHMENT)])
    ips = [int(ipaddress.IPv4Address(x)) for x in (TestConfig.IP_A, TestConfig.IP_B, TestConfig.IP_C)]
    asns, countries = store.resolve_context(ips)
    # Enrichment wins over the table
    assert asns == [64500, 64501, None]
    assert countries == ["CZ", None, None]


def test_snapshot_round_trip(store, tmp_path):
    store.attach_enrichment([json.dumps(TestConfig.ENRICHMENT)])
    store.set_context(ContextMaps(asn_sizes={64500: 256}, ip_to_asn=PrefixTable([("192.0.2.0/24", 64500)])))
    filename = tmp_path / "store.fmps"
    store.snapshot_save(filename)
    loaded = AlertStore.snapshot_load(filename)
    for name in ("ip", "t", "c", "v", "d"):
        assert np.array_equal(loaded.columns[name], store.columns[name])
    assert loaded.detectors == store.detectors
    assert loaded.enrichment == store.enrichment
    assert loaded.context.asn_sizes == {64500: 256}
    assert loaded.context.ip_to_asn.lookup(TestConfig.IP_B) == 64500
    # Same content, same bytes
    again = tmp_path / "again.fmps"
    loaded.snapshot_save(again)
    assert again.read_bytes() == filename.read_bytes()


def test_snapshot_corruption(store, tmp_path):
    filename = tmp_path / "store.fmps"
    store.snapshot_save(filename)
    data = bytearray(filename.read_bytes())
    data[-1] ^= 0x01
    filename.write_bytes(bytes(data))
    with pytest.raises(CorruptSnapshot):
        AlertStore.snapshot_load(filename)
    data[4] = 99
    filename.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        AlertStore.snapshot_load(filename)
