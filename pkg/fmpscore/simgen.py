# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Synthetic alert streams with known next-day attack probabilities.

Every actor attacks on a given day with a probability fixed by its kind,
so the exact probability of an attack tomorrow, given everything that
happened up to today, is known and written to the ground-truth file.

Actor kinds
-----------
``persistent``
    Attacks with daily probability p during its lifetime.
``periodic``
    Attacks with probability p every ``period`` days of its lifetime.
``oneshot``
    Attacks only on its first day (with probability p, normally 1).
``churning``
    Like persistent, with a short lifetime and a random start day. These
    are the "new" attackers of each day.
``neighborhood_member``
    Lives in a bad /24 neighbourhood. A neighbourhood switches between an
    active and a quiet state (a two-state Markov chain); members attack with
    probability p while it is active and ``neighborhood_idle_prob`` while
    it is quiet. Siblings' alerts reveal the state, so prefix features carry
    signal.
``cross_category``
    Scans with probability ``p_scan``; on the day after a scan it attacks the
    access category with probability ``coupling_prob``, otherwise with
    ``p_access``.

A uniform noise rate adds spurious alerts: the probability of any actor on
any day becomes ``p + (1 - p) * noise_rate``.

Scenario file
-------------
A JSON object with the fields of :class:`ScenarioConfig`; ``actors`` maps a
kind to an object with the fields of :class:`ActorGroup`, for instance::

    {"seed": 1, "n_days": 30,
     "actors": {"persistent": {"count": 100, "p_scan": [0.2, 0.9]},
                "churning": {"count": 400, "p_scan": [0.5, 1.0], "lifetime": [1, 2]}}}

Output files
------------
``alerts.jsonl`` (time-sorted alerts), ``truth.csv`` (ip, day_index, t0,
p_scan, p_access: probability of at least one alert in the day after
``t0 = start + (day_index + 1) days``), ``actors.csv``, ``enrichment.jsonl``,
``maps/`` (context maps) and ``scenario.json``.
"""

import ipaddress
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .alerts import Alert, Category, write_alerts
from .errors import ConfigError, InvalidField, IoError, MalformedRecord, OutOfRange
from .general import SECONDS_PER_DAY
from .store import ContextMaps, PrefixTable, write_context_maps

ACTOR_KINDS = ("persistent", "periodic", "oneshot", "churning", "neighborhood_member",
               "cross_category")
DEFAULT_START = 1704067200  # 2024-01-01T00:00:00Z
DEFAULT_DETECTORS = ("hp-1", "hp-2", "ids-1", "ids-2", "fw-1")
COUNTRIES = ("CZ", "DE", "US", "CN", "RU", "BR", "NL", "FR", "IN", "VN")
FIRST_ASN = 64500
_BASE_NETWORK = int(ipaddress.IPv4Address("10.0.0.0"))

ALERTS_FILE = "alerts.jsonl"
TRUTH_FILE = "truth.csv"
ACTORS_FILE = "actors.csv"
ENRICHMENT_FILE = "enrichment.jsonl"
MAPS_DIR = "maps"
SCENARIO_FILE = "scenario.json"


def _range(value, name, lo=0.0, hi=1.0):
    if isinstance(value, (int, float)):
        value = (value, value)
    value = tuple(float(v) for v in value)
    if len(value) != 2 or not lo <= value[0] <= value[1] <= hi:
        raise ConfigError(f"{name} must be a range [a, b] with {lo} <= a <= b <= {hi}, got {value}.")
    return value


@dataclass(frozen=True)
class VolumeDist:
    """Alert volume: ``constant`` k, or ``geometric`` with success probability p (>= 1)."""
    kind: str = "geometric"
    k: int = 1
    p: float = 0.3

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ConfigError(f"Unknown volume distribution {self.kind!r}.")
        if self.kind == "constant" and self.k < 0:
            raise ConfigError(f"Constant volume must be non-negative, got {self.k}.")
        if self.kind == "geometric" and not 0 < self.p <= 1:
            raise ConfigError(f"Geometric volume needs p in (0, 1], got {self.p}.")

    def draw(self, rng, size):
        if self.kind == "constant":
            return np.full(size, self.k, dtype=np.int64)
        return rng.geometric(self.p, size=size).astype(np.int64)


@dataclass(frozen=True)
class ActorGroup:
    """
    Population settings of one actor kind; ranges are drawn uniformly per actor.
    ``extra_alerts`` overrides the scenario-wide mean number of extra alerts
    per attack day.
    """
    count: int = 0
    p_scan: tuple = (0.0, 0.0)
    p_access: tuple = (0.0, 0.0)
    lifetime: tuple = (1, 10 ** 6)
    period: tuple = (2, 4)
    volume: VolumeDist = field(default_factory=VolumeDist)
    extra_alerts: float = None

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError(f"Actor count must be non-negative, got {self.count}.")
        object.__setattr__(self, "p_scan", _range(self.p_scan, "p_scan"))
        object.__setattr__(self, "p_access", _range(self.p_access, "p_access"))
        object.__setattr__(self, "lifetime", tuple(int(v) for v in _range(self.lifetime, "lifetime", 1, math.inf)))
        object.__setattr__(self, "period", tuple(int(v) for v in _range(self.period, "period", 1, math.inf)))
        if isinstance(self.volume, dict):
            object.__setattr__(self, "volume", VolumeDist(**self.volume))
        if self.extra_alerts is not None and self.extra_alerts < 0:
            raise ConfigError(f"extra_alerts must be non-negative, got {self.extra_alerts}.")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_days: int = 30
    start: int = DEFAULT_START
    actors: dict = field(default_factory=dict)
    n_prefixes: int = 200
    bad_neighborhood_fraction: float = 0.1
    neighborhood_stay: float = 0.8
    neighborhood_wake: float = 0.1
    neighborhood_idle_prob: float = 0.02
    coupling_prob: float = 0.5
    noise_rate: float = 0.0
    extra_alerts: float = 0.5
    detectors: tuple = DEFAULT_DETECTORS
    n_asns: int = 20

    def __post_init__(self):
        if self.n_days < 2:
            raise ConfigError(f"A scenario needs at least 2 days, got {self.n_days}.")
        if self.start % SECONDS_PER_DAY:
            raise ConfigError("Scenario start must be at midnight UTC.")
        unknown = set(self.actors) - set(ACTOR_KINDS)
        if unknown:
            raise ConfigError(f"Unknown actor kinds {sorted(unknown)}; choose from {ACTOR_KINDS}.")
        groups = {kind: group if isinstance(group, ActorGroup) else ActorGroup(**group)
                  for kind, group in self.actors.items()}
        object.__setattr__(self, "actors", groups)
        for name in ("bad_neighborhood_fraction", "neighborhood_stay", "neighborhood_wake",
                     "neighborhood_idle_prob", "coupling_prob", "noise_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}.")
        if self.extra_alerts < 0:
            raise ConfigError("extra_alerts must be non-negative.")
        if not 1 <= self.n_prefixes <= 65536:
            raise ConfigError(f"n_prefixes must be in [1, 65536], got {self.n_prefixes}.")
        if not self.detectors:
            raise ConfigError("At least one detector is needed.")
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.n_asns < 1:
            raise ConfigError("n_asns must be at least 1.")

    @property
    def n_actors(self):
        return sum(group.count for group in self.actors.values())

    def day_start(self, day):
        return self.start + day * SECONDS_PER_DAY

    def prediction_time(self, day_index):
        """Prediction time whose truth row is ``day_index``: the end of that day."""
        return self.start + (day_index + 1) * SECONDS_PER_DAY

    def as_dict(self):
        return asdict(self)

    def to_json(self, filename):
        with Path(filename).open("w", encoding="utf-8") as fid:
            json.dump(self.as_dict(), fid, indent=2, sort_keys=True)
            fid.write("\n")

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid scenario: {e}") from None

    @classmethod
    def from_json(cls, filename):
        try:
            with Path(filename).open("r", encoding="utf-8") as fid:
                data = json.load(fid)
        except OSError as e:
            raise IoError(f"Cannot read scenario {filename}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Scenario {filename} is not valid JSON: {e.msg}.") from None
        except UnicodeDecodeError as e:
            raise ConfigError(f"Scenario {filename} is not UTF-8 text: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"Scenario {filename} must hold a JSON object.")
        return cls.from_dict(data)


@dataclass(frozen=True)
class ActorProfile:
    ip: int
    kind: str
    p_scan: float
    p_access: float
    volume: VolumeDist
    start_day: int
    lifetime_days: int
    period: int
    prefix: int
    neighborhood: int
    detectors: tuple
    extra_alerts: float = 0.5

    @property
    def address(self):
        return ipaddress.IPv4Address(self.ip)

    def as_row(self):
        return {
            "ip": str(self.address), "kind": self.kind, "p_scan": self.p_scan,
            "p_access": self.p_access, "start_day": self.start_day,
            "lifetime_days": self.lifetime_days, "period": self.period,
            "prefix": f"{ipaddress.IPv4Address(self.prefix << 8)}/24",
            "neighborhood": self.neighborhood,
            "volume": f"{self.volume.kind}:{self.volume.k if self.volume.kind == 'constant' else self.volume.p}",
            "detectors": " ".join(self.detectors),
            "extra_alerts": self.extra_alerts,
        }


@dataclass
class Simulation:
    config: ScenarioConfig
    actors: list
    alerts: list
    truth: pd.DataFrame
    enrichment: list
    maps: ContextMaps

    def actors_frame(self):
        return pd.DataFrame([actor.as_row() for actor in self.actors])

    def oracle(self, t0, category):
        return oracle_scores(self.truth, t0, category)

    def write(self, directory):
        """Write all scenario files into ``directory``; returns the alert and truth paths."""
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            write_alerts(self.alerts, directory / ALERTS_FILE)
            _truth_for_csv(self.truth).to_csv(directory / TRUTH_FILE, index=False,
                                              float_format="%.17g")
            self.actors_frame().to_csv(directory / ACTORS_FILE, index=False, float_format="%.17g")
            with (directory / ENRICHMENT_FILE).open("w", encoding="utf-8") as fid:
                for record in self.enrichment:
                    fid.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
                    fid.write("\n")
            write_context_maps(self.maps, directory / MAPS_DIR)
            self.config.to_json(directory / SCENARIO_FILE)
        except OSError as e:
            raise IoError(f"Cannot write scenario to {directory}: {e}") from e
        return directory / ALERTS_FILE, directory / TRUTH_FILE


def _truth_for_csv(truth):
    out = truth.copy()
    out["ip"] = [str(ipaddress.IPv4Address(int(ip))) for ip in out["ip"]]
    return out


# Population
# ==========

def _draw_actors(config, rng):
    n_bad = int(round(config.bad_neighborhood_fraction * config.n_prefixes))
    members = config.actors.get("neighborhood_member", ActorGroup())
    if members.count and n_bad == 0:
        n_bad = 1
    prefixes = np.sort(rng.choice(65536, size=config.n_prefixes, replace=False))
    prefixes = (_BASE_NETWORK >> 8) + prefixes
    shuffled = rng.permutation(prefixes)
    bad = np.sort(shuffled[:n_bad])
    good = np.sort(shuffled[n_bad:]) if n_bad < len(shuffled) else bad
    free_hosts = {}

    def host_in(prefix):
        hosts = free_hosts.setdefault(int(prefix), list(rng.permutation(np.arange(1, 255))))
        if not hosts:
            raise ConfigError(f"More than 254 actors in prefix {prefix << 8}; add prefixes.")
        return (int(prefix) << 8) | int(hosts.pop())

    actors = []
    for kind in ACTOR_KINDS:
        group = config.actors.get(kind)
        if group is None or group.count == 0:
            continue
        for _ in range(group.count):
            p_scan = float(rng.uniform(*group.p_scan))
            p_access = float(rng.uniform(*group.p_access))
            lifetime = int(rng.integers(group.lifetime[0], group.lifetime[1] + 1))
            period = int(rng.integers(group.period[0], group.period[1] + 1))
            if kind in ("persistent", "neighborhood_member", "cross_category", "periodic"):
                start_day = 0
            else:
                start_day = int(rng.integers(0, config.n_days))
            if kind == "oneshot":
                lifetime = 1
            if kind == "neighborhood_member":
                neighborhood = int(rng.integers(0, len(bad)))
                prefix = bad[neighborhood]
            else:
                neighborhood = -1
                prefix = good[int(rng.integers(0, len(good)))]
            n_det = int(rng.integers(1, min(3, len(config.detectors)) + 1))
            detectors = tuple(sorted(rng.choice(config.detectors, size=n_det, replace=False).tolist()))
            actors.append(ActorProfile(
                ip=host_in(prefix), kind=kind, p_scan=p_scan, p_access=p_access,
                volume=group.volume, start_day=start_day, lifetime_days=lifetime,
                period=period, prefix=int(prefix), neighborhood=neighborhood,
                detectors=detectors,
                extra_alerts=config.extra_alerts if group.extra_alerts is None else group.extra_alerts))
    return actors, prefixes, bad


class _Population:
    # Column view of the actors for per-day vectorised probabilities.
    def __init__(self, actors, config):
        self.config = config
        kinds = np.array([ACTOR_KINDS.index(a.kind) for a in actors], dtype=np.int64)
        self.is_kind = {kind: kinds == i for i, kind in enumerate(ACTOR_KINDS)}
        self.p_scan = np.array([a.p_scan for a in actors])
        self.p_access = np.array([a.p_access for a in actors])
        self.start = np.array([a.start_day for a in actors], dtype=np.int64)
        self.end = self.start + np.array([a.lifetime_days for a in actors], dtype=np.int64)
        self.period = np.array([a.period for a in actors], dtype=np.int64)
        self.neighborhood = np.array([a.neighborhood for a in actors], dtype=np.int64)

    def probabilities(self, day, active_prob, scanned_prev):
        """
        Attack probabilities of every actor on ``day`` (scan, access).

        ``active_prob`` is the probability of each neighbourhood being active
        that day; ``scanned_prev`` tells which actors scanned the day before.
        """
        cfg = self.config
        k = self.is_kind
        alive = (day >= self.start) & (day < self.end)
        scheduled = alive.copy()
        scheduled[k["periodic"]] &= ((day - self.start[k["periodic"]]) % self.period[k["periodic"]]) == 0
        scheduled[k["oneshot"]] = day == self.start[k["oneshot"]]
        q_scan = np.where(scheduled, self.p_scan, 0.0)
        q_access = np.where(scheduled, self.p_access, 0.0)

        members = k["neighborhood_member"]
        if members.any():
            pa = active_prob[self.neighborhood[members]]
            idle = cfg.neighborhood_idle_prob
            q_scan[members] = pa * self.p_scan[members] + (1 - pa) * idle * (self.p_scan[members] > 0)
            q_access[members] = pa * self.p_access[members] + (1 - pa) * idle * (self.p_access[members] > 0)

        cross = k["cross_category"] & alive
        q_access[cross] = np.where(scanned_prev[cross], cfg.coupling_prob, self.p_access[cross])

        noise = cfg.noise_rate
        return q_scan + (1 - q_scan) * noise, q_access + (1 - q_access) * noise


def _enrichment(actors, asn_of_prefix, country_of_asn, rng):
    records = []
    for actor in actors:
        a, b, c, d = str(actor.address).split(".")
        style = rng.random()
        asn = int(asn_of_prefix[actor.prefix])
        if style < 0.4:
            hostname = f"dsl-{a}-{b}-{c}-{d}.pool.as{asn}.example"
            dyn = int(rng.random() < 0.8)
        elif style < 0.6:
            hostname = f"mail{d}.static.as{asn}.example"
            dyn = 0
        else:
            hostname = None
            dyn = int(rng.random() < 0.1)
        activity = max(actor.p_scan, actor.p_access)
        bl = [int(rng.random() < 0.05 + 0.4 * activity) for _ in range(5)]
        record = {"ip": str(actor.address), "bl": bl, "dyn": dyn, "asn": asn,
                  "cc": country_of_asn[asn]}
        if hostname is not None:
            record["hostname"] = hostname
        records.append(record)
    return records


def _context_maps(prefixes, asn_of_prefix, country_of_asn):
    asn_sizes, cc_sizes = {}, {}
    for prefix in prefixes:
        asn = int(asn_of_prefix[int(prefix)])
        asn_sizes[asn] = asn_sizes.get(asn, 0) + 256
        cc = country_of_asn[asn]
        cc_sizes[cc] = cc_sizes.get(cc, 0) + 256
    cidrs = [f"{ipaddress.IPv4Address(int(p) << 8)}/24" for p in prefixes]
    return ContextMaps(
        asn_sizes=asn_sizes,
        country_sizes=cc_sizes,
        ip_to_asn=PrefixTable((cidr, int(asn_of_prefix[int(p)])) for cidr, p in zip(cidrs, prefixes)),
        ip_to_country=PrefixTable((cidr, country_of_asn[int(asn_of_prefix[int(p)])])
                                  for cidr, p in zip(cidrs, prefixes)),
    )


# Generation
# ==========

def simulate(config, silent=True):
    """
    Run a scenario in memory.

    All randomness comes from ``numpy.random.default_rng(config.seed)``, so
    the same configuration always gives the same alerts and truth.

    Returns
    -------
    Simulation
    """
    rng = np.random.default_rng(config.seed)
    actors, prefixes, bad = _draw_actors(config, rng)
    pop = _Population(actors, config)
    n_actors = len(actors)
    ips = np.array([a.ip for a in actors], dtype=np.int64)

    stay, wake = config.neighborhood_stay, config.neighborhood_wake
    stationary = wake / (wake + 1 - stay) if wake + 1 - stay > 0 else 1.0
    state = rng.random(len(bad)) < stationary
    scanned = np.zeros(n_actors, dtype=bool)

    alerts = []
    truth_blocks = []
    for day in tqdm(range(config.n_days), desc="Simulating", disable=silent):
        if day > 0:
            state = rng.random(len(bad)) < np.where(state, stay, wake)
        q_scan, q_access = pop.probabilities(day, state.astype(np.float64), scanned)
        attack_scan = rng.random(n_actors) < q_scan
        attack_access = rng.random(n_actors) < q_access
        for category, attacking in ((Category.SCAN, attack_scan), (Category.ACCESS, attack_access)):
            for i in np.flatnonzero(attacking):
                alerts.extend(_alerts_of(actors[i], category, day, config, rng))
        scanned = attack_scan
        if day < config.n_days - 1:
            next_active = np.where(state, stay, wake).astype(np.float64)
            t_scan, t_access = pop.probabilities(day + 1, next_active, scanned)
            truth_blocks.append(pd.DataFrame({
                "ip": ips, "day_index": day, "t0": config.prediction_time(day),
                "p_scan": t_scan, "p_access": t_access,
            }))
    alerts.sort()
    truth = pd.concat(truth_blocks, ignore_index=True) if truth_blocks else pd.DataFrame(
        columns=["ip", "day_index", "t0", "p_scan", "p_access"])

    asn_ids = FIRST_ASN + np.arange(config.n_asns)
    asn_of_prefix = {int(p): int(asn_ids[rng.integers(0, config.n_asns)]) for p in prefixes}
    country_of_asn = {int(a): COUNTRIES[int(rng.integers(0, len(COUNTRIES)))] for a in asn_ids}
    enrichment = _enrichment(actors, asn_of_prefix, country_of_asn, rng)
    maps = _context_maps(prefixes, asn_of_prefix, country_of_asn)
    return Simulation(config=config, actors=actors, alerts=alerts, truth=truth,
                      enrichment=enrichment, maps=maps)


def _alerts_of(actor, category, day, config, rng):
    n = 1 + int(rng.poisson(actor.extra_alerts))
    offsets = rng.integers(1, SECONDS_PER_DAY, size=n)
    volumes = actor.volume.draw(rng, n)
    detectors = rng.choice(len(actor.detectors), size=n)
    base = config.day_start(day)
    address = actor.address
    return [Alert(t=int(base + o), e=address, c=category, v=int(v), d=actor.detectors[j])
            for o, v, j in zip(offsets, volumes, detectors)]


def generate(config, directory, silent=True):
    """
    Simulate a scenario and write its files into ``directory``.

    Returns
    -------
    tuple of pathlib.Path
        The alert stream and ground-truth files.
    """
    if not isinstance(config, ScenarioConfig):
        config = ScenarioConfig.from_dict(config)
    return simulate(config, silent=silent).write(directory)


def load_truth(filename):
    """Read a ground-truth CSV; addresses become integers."""
    try:
        truth = pd.read_csv(filename, float_precision="round_trip")
    except OSError as e:
        raise IoError(f"Cannot read ground truth {filename}: {e}") from e
    except ValueError as e:
        raise MalformedRecord(f"Ground truth {filename} is not a CSV table: {e}") from None
    try:
        truth["ip"] = [int(ipaddress.IPv4Address(ip)) for ip in truth["ip"]]
    except KeyError:
        raise MalformedRecord(f"Ground truth {filename} has no 'ip' column.") from None
    except ValueError as e:
        raise InvalidField(f"Ground truth {filename}: {e}") from None
    return truth


def oracle_scores(truth, t0, category):
    """
    True next-day attack probabilities at prediction time ``t0``.

    Parameters
    ----------
    truth : pandas.DataFrame or path
        Ground truth as produced by :func:`simulate` or its CSV file.
    t0 : int
        One of the scenario's prediction times (end of a simulated day).
    category : Category or str

    Returns
    -------
    list of (int, float)
        ``(ip, probability)`` for every actor, sorted by address.

    Raises
    ------
    OutOfRange
        If ``t0`` is not a prediction time of the scenario.
    """
    if not isinstance(truth, pd.DataFrame):
        truth = load_truth(truth)
    column = f"p_{Category.from_label(category).label}"
    rows = truth[truth["t0"] == int(t0)]
    if rows.empty:
        raise OutOfRange(f"No ground truth for prediction time {t0}.")
    rows = rows.sort_values("ip")
    return [(int(ip), float(p)) for ip, p in zip(rows["ip"], rows[column])]


# Scenarios
# =========

def single_actor_scenario(kind="persistent", p_scan=1.0, p_access=0.0, n_days=10, seed=0, **kwargs):
    """One actor of the given kind, for hand-checked examples."""
    group = ActorGroup(count=1, p_scan=(p_scan, p_scan), p_access=(p_access, p_access),
                       lifetime=kwargs.pop("lifetime", (n_days, n_days)),
                       period=kwargs.pop("period", (2, 2)))
    return ScenarioConfig(seed=seed, n_days=n_days, actors={kind: group}, n_prefixes=1,
                          bad_neighborhood_fraction=0.0 if kind != "neighborhood_member" else 1.0,
                          **kwargs)


def standard_scenario(seed=0, n_actors=2000, n_days=30):
    """
    Mixed population. One-day churning actors make up most of each day's
    attackers, so that roughly 60 % of them were not seen in the previous
    week (with the default size and length).
    """
    def share(f):
        return max(1, int(round(f * n_actors)))

    actors = {
        "persistent": ActorGroup(count=share(0.02), p_scan=(0.3, 0.9), p_access=(0.0, 0.2)),
        "periodic": ActorGroup(count=share(0.005), p_scan=(0.6, 1.0), period=(2, 4)),
        "oneshot": ActorGroup(count=share(0.07), p_scan=(1.0, 1.0),
                              volume=VolumeDist("geometric", p=0.05)),
        "churning": ActorGroup(count=share(0.885), p_scan=(0.5, 1.0), p_access=(0.0, 0.3),
                               lifetime=(1, 1)),
        "neighborhood_member": ActorGroup(count=share(0.015), p_scan=(0.6, 0.9)),
        "cross_category": ActorGroup(count=share(0.005), p_scan=(0.2, 0.6), p_access=(0.0, 0.05)),
    }
    return ScenarioConfig(seed=seed, n_days=n_days, actors=actors,
                          n_prefixes=max(10, n_actors // 20))


def neighborhood_scenario(seed=0, n_members=1500, n_days=30):
    """Mostly members of bad neighbourhoods with a few other actors."""
    actors = {
        "neighborhood_member": ActorGroup(count=n_members, p_scan=(0.3, 0.7)),
        "persistent": ActorGroup(count=n_members // 5, p_scan=(0.05, 0.5)),
        "churning": ActorGroup(count=n_members // 3, p_scan=(0.3, 0.7), lifetime=(1, 3)),
    }
    return ScenarioConfig(seed=seed, n_days=n_days, actors=actors, n_prefixes=150,
                          bad_neighborhood_fraction=0.2, neighborhood_stay=0.85,
                          neighborhood_wake=0.1, neighborhood_idle_prob=0.01)


def gwol_trap_scenario(seed=0, n_days=21):
    """
    Loud actors that do not come back and quiet regular ones. One-time
    attackers and short-lived churners raise many alerts of high volume,
    persistent actors few of volume 1: ranking by past activity picks the
    loud ones, ranking by the probability of returning picks the regular ones.
    """
    actors = {
        "oneshot": ActorGroup(count=600, p_scan=(1.0, 1.0), volume=VolumeDist("constant", k=500),
                              extra_alerts=10.0),
        "persistent": ActorGroup(count=300, p_scan=(0.5, 0.95), volume=VolumeDist("constant", k=1),
                                 extra_alerts=0.5),
        "churning": ActorGroup(count=600, p_scan=(0.8, 1.0), lifetime=(2, 4),
                               volume=VolumeDist("constant", k=50), extra_alerts=6.0),
    }
    return ScenarioConfig(seed=seed, n_days=n_days, actors=actors, n_prefixes=100)


def small_population_scenario(seed=0, n_actors=12, n_days=14):
    """A handful of persistent actors with spread-out probabilities."""
    if not 1 <= n_actors <= 254:
        raise ConfigError("A small population has between 1 and 254 actors.")
    return ScenarioConfig(seed=seed, n_days=n_days, n_prefixes=1,
                          actors={"persistent": ActorGroup(count=n_actors, p_scan=(0.05, 0.95))})


SCENARIOS = {
    "standard": standard_scenario,
    "neighborhood": neighborhood_scenario,
    "gwol_trap": gwol_trap_scenario,
    "small": small_population_scenario,
}
