# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import ipaddress

import pandas as pd
import pytest

from fmpscore.alerts import Alert, Category
from fmpscore.blacklist import (
    Blacklist,
    BlacklistEntry,
    Policy,
    evaluate_blacklist,
    evaluate_days,
    fmp_blacklist,
    gwol,
    read_blacklist,
    read_third_party,
    threshold_size_curve,
    union_blacklists,
    write_blacklist,
)
from fmpscore.errors import (CategoryMismatch, ConfigError, CorruptSnapshot, DomainError, InvalidField,
                             MalformedRecord)
from fmpscore.general import SECONDS_PER_DAY
from fmpscore.store import AlertStore

D = SECONDS_PER_DAY


class TestConfig:
    """Addresses and times for the blacklist tests."""

    T0 = 20 * D
    A, B, C, E = "192.0.2.1", "192.0.2.2", "192.0.2.3", "192.0.2.5"
    SCORES = [(A, 0.9), (B, 0.5), (C, 0.9), ("192.0.2.4", 0.1)]


def _ip(text):
    return int(ipaddress.IPv4Address(text))


@pytest.fixture
def store():
    T0 = TestConfig.T0
    alerts = [Alert(t=T0 - 100 * (i + 1), e=TestConfig.A, c="scan", v=1, d="hp") for i in range(3)]
    alerts += [Alert(t=T0 - 50 * (i + 1), e=TestConfig.B, c="scan", v=v, d="hp")
               for i, v in enumerate((2, 3, 5))]
    alerts += [
        Alert(t=T0 - 10, e=TestConfig.C, c="scan", v=100, d="hp"),
        # Other category and other days do not count for a one-day scan GWOL
        *[Alert(t=T0 - 20 - i, e="192.0.2.9", c="access", v=1, d="ids") for i in range(5)],
        *[Alert(t=T0 - 3 * D - i, e="192.0.2.10", c="scan", v=1, d="hp") for i in range(5)],
        # Prediction day
        Alert(t=T0 + 100, e=TestConfig.A, c="scan", v=1, d="hp"),
        Alert(t=T0 + D, e=TestConfig.E, c="scan", v=1, d="hp"),
        Alert(t=T0 + D + 1, e=TestConfig.B, c="scan", v=1, d="hp"),
    ]
    store = AlertStore()
    store.ingest(alerts)
    return store


def test_fmp_blacklist_topn():
    bl = fmp_blacklist(TestConfig.SCORES, Policy.topn(2), "scan", t0=TestConfig.T0)
    assert [str(e.address) for e in bl.entries] == [TestConfig.A, TestConfig.C]
    assert bl.scores.tolist() == [0.9, 0.9]
    assert bl.name == "fmp_top2" and bl.generated_at == TestConfig.T0
    assert len(fmp_blacklist(TestConfig.SCORES, Policy.topn(10), "scan")) == 4
    assert TestConfig.C in bl and TestConfig.B not in bl


def test_fmp_blacklist_threshold():
    bl = fmp_blacklist(TestConfig.SCORES, Policy.at_threshold(0.5), Category.SCAN)
    assert [str(e.address) for e in bl.entries] == [TestConfig.A, TestConfig.C, TestConfig.B]
    df = pd.DataFrame({"ip": [ip for ip, _ in TestConfig.SCORES], "fmp": [s for _, s in TestConfig.SCORES]})
    assert fmp_blacklist(df, Policy.at_threshold(0.5), "scan").ips.tolist() == bl.ips.tolist()
    assert len(fmp_blacklist(TestConfig.SCORES, Policy.at_threshold(1.0), "scan")) == 0


@pytest.mark.parametrize("scores, error", [
    ([(TestConfig.A, 0.5), (TestConfig.A, 0.6)], InvalidField),
    ([(TestConfig.A, 1.2)], DomainError),
    ([("not-an-ip", 0.5)], InvalidField),
], ids=["duplicate", "range", "address"])
def test_fmp_blacklist_errors(scores, error):
    with pytest.raises(error):
        fmp_blacklist(scores, Policy.topn(1), "scan")


def test_policy_validation():
    with pytest.raises(ConfigError):
        Policy.topn(0)
    with pytest.raises(ConfigError):
        Policy.at_threshold(1.5)
    with pytest.raises(ConfigError):
        Policy.gwol(0, 10)
    with pytest.raises(ConfigError):
        fmp_blacklist(TestConfig.SCORES, Policy.gwol(1, 10), "scan")
    assert Policy.from_dict(Policy.gwol(7, 5).as_dict()) == Policy.gwol(7, 5)
    with pytest.raises(InvalidField):
        Blacklist("scan", Policy.topn(2), [BlacklistEntry(1, 0.5), BlacklistEntry(1, 0.4)])


def test_gwol(store):
    bl = gwol(store, TestConfig.T0, 1, 2, "scan")
    assert [str(e.address) for e in bl.entries] == [TestConfig.B, TestConfig.A]
    assert bl.scores.tolist() == [3.0, 3.0]
    assert bl.name == "gwol1_top2"
    top = gwol(store, TestConfig.T0, 1, 10, "scan")
    assert [str(e.address) for e in top.entries] == [TestConfig.B, TestConfig.A, TestConfig.C]
    week = gwol(store, TestConfig.T0, 7, 1, "scan")
    assert str(week.entries[0].address) == "192.0.2.10"


def test_evaluate_blacklist(store):
    bl = fmp_blacklist([(TestConfig.A, 0.9), (TestConfig.B, 0.8), (TestConfig.C, 0.7)],
                       Policy.topn(3), "scan", t0=TestConfig.T0)
    report = evaluate_blacklist(bl, store)
    # A attacks the next day, E is new, B comes one second too late
    assert report.list_size == 3
    assert report.hit_count == 1
    assert report.hit_rate == pytest.approx(1 / 3)
    assert report.attackers_total == 2
    assert report.attackers_blocked_fraction == 0.5
    assert report.new_attacker_fraction == 0.5
    assert report.as_dict()["name"] == "fmp_top3"
    with pytest.raises(ConfigError):
        evaluate_blacklist(fmp_blacklist(TestConfig.SCORES, Policy.topn(1), "scan"), store)


def test_evaluate_days(store):
    first = gwol(store, TestConfig.T0, 1, 2, "scan")
    second = gwol(store, TestConfig.T0 + D, 1, 2, "scan")
    reports, mean = evaluate_days([first, second], store)
    assert len(reports) == 2 and mean["days"] == 2
    assert mean["hit_count"] == pytest.approx((reports[0].hit_count + reports[1].hit_count) / 2)
    assert evaluate_days([], store) == ([], {})


def test_union():
    first = fmp_blacklist([(TestConfig.A, 0.9), (TestConfig.B, 0.8)], Policy.topn(2), "scan", t0=5)
    second = Blacklist("scan", Policy.third_party("feed"),
                       [BlacklistEntry(_ip(TestConfig.C), 1.0, ("feed",)),
                        BlacklistEntry(_ip(TestConfig.A), 1.0, ("feed",))], generated_at=5)
    union = union_blacklists([first, second])
    assert [str(e.address) for e in union.entries] == [TestConfig.A, TestConfig.C, TestConfig.B]
    assert union.entries[0].sources == ("fmp_top2", "feed")
    assert union.entries[0].score == 0.9
    assert union.generated_at == 5
    assert union.name == "fmp_top2+feed"
    with pytest.raises(CategoryMismatch):
        union_blacklists([first, fmp_blacklist([(TestConfig.A, 0.9)], Policy.topn(1), "access")])


def test_read_third_party(tmp_path):
    filename = tmp_path / "feed.txt"
    filename.write_text(f"{TestConfig.A}\n# comment\n198.51.100.0/30  # net\n\n{TestConfig.A}\n")
    bl = read_third_party(filename, "scan", t0=TestConfig.T0)
    assert [str(e.address) for e in bl.entries] == [
        TestConfig.A, "198.51.100.0", "198.51.100.1", "198.51.100.2", "198.51.100.3"]
    assert bl.name == "feed" and bl.generated_at == TestConfig.T0
    assert bl.scores.tolist() == [1.0] * 5
    filename.write_text("10.0.0.0/16\n")
    with pytest.raises(InvalidField, match="/24"):
        read_third_party(filename, "scan")


def test_write_and_read(tmp_path):
    bl = fmp_blacklist(TestConfig.SCORES, Policy.topn(3), "access", t0=TestConfig.T0)
    filename = tmp_path / "bl.txt"
    write_blacklist(bl, filename)
    assert filename.read_text().splitlines() == [TestConfig.A, TestConfig.C, TestConfig.B]
    assert (tmp_path / "bl.txt.json").exists()
    loaded = read_blacklist(filename)
    assert loaded.entries == bl.entries
    assert loaded.policy == bl.policy
    assert loaded.category is Category.ACCESS
    assert loaded.generated_at == TestConfig.T0
    plain = tmp_path / "plain.txt"
    plain.write_text(f"{TestConfig.A}\n")
    with pytest.raises(ConfigError, match="sidecar"):
        read_blacklist(plain)
    assert len(read_blacklist(plain, category="scan")) == 1


@pytest.mark.parametrize("sidecar, match", [
    (b"{not json", "unreadable"),
    (b'{"scores": [0.9, 0.9, 0.5], "sources": [[], [], []]}', "lacks 'category'"),
    (b'{"scores": 3}', "invalid values"),
], ids=["not-json", "no-category", "bad-scores"])
def test_read_rejects_damaged_sidecar(tmp_path, sidecar, match):
    filename = tmp_path / "bl.txt"
    write_blacklist(fmp_blacklist(TestConfig.SCORES, Policy.topn(3), "access"), filename)
    (tmp_path / "bl.txt.json").write_bytes(sidecar)
    with pytest.raises(CorruptSnapshot, match=match):
        read_blacklist(filename)


def test_read_third_party_rejects_binary(tmp_path):
    filename = tmp_path / "feed.bin"
    filename.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(MalformedRecord, match="UTF-8"):
        read_third_party(filename, "scan")


def test_threshold_size_curve():
    assert threshold_size_curve([0.1, 0.5, 0.9], [0.0, 0.5, 0.95, 1.0]) == [3, 2, 0, 0]
