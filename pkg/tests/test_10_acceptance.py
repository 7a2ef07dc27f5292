# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import itertools
import math

import numpy as np
import pandas as pd
import pytest

from fmpscore.blacklist import Policy, evaluate_blacklist, fmp_blacklist, gwol
from fmpscore.dataset import build, split, subsample_majority
from fmpscore.evaluation import ablation_study, auc, brier, evaluate, roc
from fmpscore.features import NUM_FEATURES
from fmpscore.general import SECONDS_PER_DAY
from fmpscore.model import GbdtConfig, fmp_score, predict_raw, recalibrate, train
from fmpscore.simgen import (
    gwol_trap_scenario,
    neighborhood_scenario,
    simulate,
    small_population_scenario,
    standard_scenario,
)
from fmpscore.store import AlertStore


class TestConfig:
    """Scenario sizes and tolerances of the end-to-end checks."""

    seed = 11
    first_day = 7
    calibrated_gap = 0.05
    biased_gap = 0.10
    min_bin_count = 500


def _store(sim):
    store = AlertStore()
    store.ingest(sim.alerts)
    store.attach_enrichment(sim.enrichment)
    store.set_context(sim.maps)
    return store


def _times(config, first=TestConfig.first_day, last=None):
    last = config.n_days - 2 if last is None else last
    return [config.prediction_time(day) for day in range(first, last + 1)]


def _oracle(sim, ds):
    truth = sim.truth[["ip", "t0", "p_scan"]]
    samples = pd.DataFrame({"ip": ds.ips, "t0": ds.t0s})
    return samples.merge(truth, on=["ip", "t0"], how="left", validate="one_to_one")["p_scan"].to_numpy()


# Fast checks
# ===========

def test_oracle_list_is_the_best_subset():
    config = small_population_scenario(seed=TestConfig.seed, n_actors=12)
    sim = simulate(config)
    t0 = config.prediction_time(8)
    oracle = sim.oracle(t0, "scan")
    p = dict(oracle)
    for n in range(1, 6):
        listed = fmp_blacklist(oracle, Policy.topn(n), "scan", t0=t0)
        expected = sum(p[ip] for ip in listed.ips)
        best = max(sum(p[ip] for ip in subset) for subset in itertools.combinations(p, n))
        assert expected == pytest.approx(best)


def test_auc_unchanged_by_recalibration():
    rng = np.random.default_rng(TestConfig.seed)
    for _ in range(20):
        X = rng.normal(size=(300, 3))
        w = rng.normal(size=3)
        pred = 1 / (1 + np.exp(-X @ w))
        y = (rng.random(300) < pred).astype(np.int64)
        beta = float(rng.uniform(0.05, 1.0))
        assert abs(auc(pred, y) - auc(recalibrate(pred, beta), y)) <= 1e-12


def test_roc_endpoints_and_monotone():
    rng = np.random.default_rng(TestConfig.seed)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 0, 1
        pred = np.round(rng.random(n), 1)
        curve = roc(pred, y)
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        assert (np.diff(curve.fpr) >= 0).all()
        assert (np.diff(curve.tpr) >= 0).all()
        assert 0 <= curve.auc <= 1


def test_gbdt_loss_never_increases():
    config = standard_scenario(seed=TestConfig.seed, n_actors=500, n_days=14)
    sim = simulate(config)
    ds = build(_store(sim), _times(config), "scan")
    assert ds.X.shape[1] == NUM_FEATURES
    assert np.isfinite(ds.X).all()
    model = train("gbdt", ds, config=GbdtConfig(n_trees=30, max_depth=4))
    curve = model.metadata["training_curve"]
    assert len(curve) == 30
    assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


# End-to-end checks
# =================

@pytest.mark.slow
def test_oracle_brier_is_the_analytic_mean():
    sim = simulate(standard_scenario(seed=TestConfig.seed, n_actors=10000))
    truth = sim.truth
    start = sim.config.start
    days = {(a.ip_int, (a.t - start) // SECONDS_PER_DAY) for a in sim.alerts if a.c.label == "scan"}
    y = np.array([(int(ip), int(d) + 1) in days for ip, d in zip(truth["ip"], truth["day_index"])],
                 dtype=np.float64)
    p = truth["p_scan"].to_numpy()
    assert len(p) >= 100000
    sigma = math.sqrt(np.sum(p * (1 - p) * (1 - 2 * p) ** 2)) / len(p)
    assert abs(brier(p, y) - np.mean(p * (1 - p))) <= 3 * sigma


@pytest.mark.slow
def test_recalibration_removes_the_subsampling_bias():
    config = standard_scenario(seed=TestConfig.seed, n_actors=20000)
    sim = simulate(config)
    ds = build(_store(sim), _times(config), "scan")
    assert len(ds) >= 50000
    assert 0.05 <= ds.n_pos / len(ds) <= 0.15
    train_ds, test_ds = split(ds, 0.3, seed=TestConfig.seed)
    model = train("logreg", subsample_majority(train_ds, 1.0, seed=TestConfig.seed),
                  seed=TestConfig.seed)
    assert model.subsampled
    raw = predict_raw(model, test_ds.X)
    fixed = fmp_score(model, test_ds.X)
    biased = evaluate(raw, test_ds.y, min_count=TestConfig.min_bin_count)
    calibrated = evaluate(fixed, test_ds.y, min_count=TestConfig.min_bin_count)
    assert biased.calibration.max_gap >= TestConfig.biased_gap
    assert calibrated.calibration.max_gap <= TestConfig.calibrated_gap
    assert calibrated.brier < biased.brier
    assert calibrated.auc == pytest.approx(biased.auc, abs=1e-12)


@pytest.mark.slow
def test_gbdt_on_the_standard_scenario():
    config = standard_scenario(seed=TestConfig.seed, n_actors=5000)
    sim = simulate(config)
    ds = build(_store(sim), _times(config), "scan")
    train_ds, test_ds = split(ds, 0.3, seed=TestConfig.seed)
    model = train("gbdt", train_ds, seed=TestConfig.seed, config=GbdtConfig(n_trees=200, max_depth=7))
    report = evaluate(fmp_score(model, test_ds.X), test_ds.y)
    assert report.auc >= 0.85
    oracle = brier(_oracle(sim, test_ds), test_ds.y)
    assert report.brier <= oracle + 0.02


@pytest.mark.slow
def test_fmp_beats_gwol():
    config = gwol_trap_scenario(seed=TestConfig.seed)
    sim = simulate(config)
    store = _store(sim)
    train_ds = build(store, _times(config, last=12), "scan")
    model = train("gbdt", train_ds, seed=TestConfig.seed, config=GbdtConfig(n_trees=100, max_depth=5))
    hits = {"fmp": [], "gwol1": [], "gwol7": []}
    for t0 in _times(config, first=14, last=18):
        day = build(store, [t0], "scan")
        scores = list(zip(day.ips.tolist(), np.atleast_1d(fmp_score(model, day.X)).tolist()))
        lists = {
            "fmp": fmp_blacklist(scores, Policy.topn(100), "scan", t0=t0),
            "gwol1": gwol(store, t0, 1, 100, "scan"),
            "gwol7": gwol(store, t0, 7, 100, "scan"),
        }
        for name, listed in lists.items():
            hits[name].append(evaluate_blacklist(listed, store).hit_count)
    mean = {name: np.mean(values) for name, values in hits.items()}
    assert mean["fmp"] > mean["gwol1"]
    assert mean["fmp"] > mean["gwol7"]


@pytest.mark.slow
def test_prefix_features_matter_in_bad_neighbourhoods():
    config = neighborhood_scenario(seed=TestConfig.seed)
    sim = simulate(config)
    ds = build(_store(sim), _times(config), "scan")
    train_ds, test_ds = split(ds, 0.3, seed=TestConfig.seed)
    table = ablation_study(train_ds, test_ds, kind="gbdt", groups=["prefix"], seed=TestConfig.seed,
                           config=GbdtConfig(n_trees=100, max_depth=5))
    drop = table.set_index("configuration")["auc_drop"]
    assert drop["without_prefix"] >= 0.02
