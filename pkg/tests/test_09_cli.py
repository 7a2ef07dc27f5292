# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import json
import shutil

import pandas as pd
import pytest

from fmpscore.blacklist import read_blacklist
from fmpscore.cli import build_parser, main
from fmpscore.config import RunConfig, manifest_path, write_manifest
from fmpscore.dataset import load_dataset
from fmpscore.errors import ConfigError, IoError, MalformedRecord
from fmpscore.general import SECONDS_PER_DAY, __version__
from fmpscore.model import load_model
from fmpscore.simgen import DEFAULT_START
from fmpscore.store import AlertStore

D = SECONDS_PER_DAY


class TestConfig:
    """A small scenario run through every command."""

    scenario = {
        "seed": 7, "n_days": 14, "n_prefixes": 2,
        "actors": {"persistent": {"count": 40, "p_scan": [0.1, 0.9]}},
    }
    days = [7, 8, 9, 10, 11]
    live_day = 12
    topn = 5

    @classmethod
    def t0(cls, day):
        return DEFAULT_START + (day + 1) * D


def _run(*argv):
    return main(["--quiet", "--log-level", "ERROR", *[str(a) for a in argv]])


def _error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    scenario = root / "scenario.json"
    scenario.write_text(json.dumps(TestConfig.scenario))
    paths = {
        "sim": root / "sim",
        "snapshot": root / "store.fmps",
        "dataset": root / "ds",
        "split": root / "split",
        "model": root / "model.fmpm",
        "scores": root / "scores.csv",
        "live": root / "live.csv",
        "fmp": root / "fmp.txt",
        "gwol": root / "gwol.txt",
        "union": root / "union.txt",
        "report": root / "eval.json",
        "hits": root / "hits.json",
    }
    t0_flags = [x for day in TestConfig.days for x in ("--t0", TestConfig.t0(day))]
    live = TestConfig.t0(TestConfig.live_day)
    steps = [
        ("simulate", "--config", scenario, "--out", paths["sim"]),
        ("ingest", "--alerts", paths["sim"] / "alerts.jsonl", "--snapshot", paths["snapshot"]),
        ("enrich", "--snapshot", paths["snapshot"], "--enrichment", paths["sim"] / "enrichment.jsonl",
         "--maps", paths["sim"] / "maps"),
        ("dataset", "--snapshot", paths["snapshot"], *t0_flags, "--out", paths["dataset"]),
        ("dataset", "--snapshot", paths["snapshot"], *t0_flags, "--split", "--test-fraction", 0.3,
         "--out", paths["split"]),
        ("train", "--dataset", paths["dataset"], "--model", "gbdt", "--trees", 20, "--depth", 3,
         "--min-leaf", 1, "--no-subsample", "--out", paths["model"]),
        ("score", "--model", paths["model"], "--dataset", paths["dataset"], "--out", paths["scores"]),
        ("score", "--model", paths["model"], "--snapshot", paths["snapshot"], "--t0", live,
         "--out", paths["live"]),
        ("blacklist", "--scores", paths["live"], "--topn", TestConfig.topn, "--out", paths["fmp"]),
        ("gwol", "--snapshot", paths["snapshot"], "--t0", live, "--n", TestConfig.topn,
         "--out", paths["gwol"]),
        ("eval", "--pred", paths["scores"], "--labels", paths["dataset"], "--report", paths["report"],
         "--points", root / "points", "--gnuplot", root / "plot"),
        ("eval-blacklist", "--list", paths["fmp"], "--list", paths["gwol"],
         "--snapshot", paths["snapshot"], "--report", paths["hits"]),
        ("union", "--lists", paths["fmp"], paths["gwol"], "--out", paths["union"]),
    ]
    codes = [_run(*step) for step in steps]
    return root, paths, codes


# Pipeline
# ========

def test_every_step_succeeds(pipeline):
    _, _, codes = pipeline
    assert codes == [0] * len(codes)


def test_dataset_and_split(pipeline):
    _, paths, _ = pipeline
    ds = load_dataset(paths["dataset"])
    assert set(ds.t0s.tolist()) <= {TestConfig.t0(day) for day in TestConfig.days}
    assert ds.n_pos > 0 and ds.n_neg > 0
    train = load_dataset(paths["split"] / "train")
    test = load_dataset(paths["split"] / "test")
    assert len(train) + len(test) == len(ds)


def test_model_and_scores(pipeline):
    _, paths, _ = pipeline
    model = load_model(paths["model"])
    assert model.kind == "gbdt"
    assert model.n_trees == 20
    assert not model.subsampled
    scores = pd.read_csv(paths["scores"])
    assert list(scores.columns) == ["ip", "t0", "fmp", "raw"]
    assert len(scores) == len(load_dataset(paths["dataset"]))
    assert scores["fmp"].between(0, 1).all()
    # Not subsampled: the score is the raw probability
    assert (scores["fmp"] == scores["raw"]).all()
    live = pd.read_csv(paths["live"])
    assert (live["t0"] == TestConfig.t0(TestConfig.live_day)).all()


def test_blacklist_has_n_lines(pipeline):
    _, paths, _ = pipeline
    lines = paths["fmp"].read_text().splitlines()
    assert len(lines) == TestConfig.topn
    listed = read_blacklist(paths["fmp"])
    assert listed.generated_at == TestConfig.t0(TestConfig.live_day)
    assert listed.policy.kind == "fmp_topn"
    live = pd.read_csv(paths["live"]).sort_values("fmp", ascending=False, kind="stable")
    assert listed.scores[0] == pytest.approx(live["fmp"].iloc[0])
    assert len(paths["gwol"].read_text().splitlines()) == TestConfig.topn


def test_reports(pipeline):
    root, paths, _ = pipeline
    report = json.loads(paths["report"].read_text())
    assert report["category"] == "scan"
    assert 0 <= report["brier"] <= 1
    assert report["n"] == len(load_dataset(paths["dataset"]))
    for suffix in ("calibration.csv", "roc.csv"):
        assert (root / f"points.{suffix}").exists()
    for suffix in ("calibration.dat", "roc.dat"):
        assert (root / f"plot.{suffix}").read_text().startswith("#")
    hits = json.loads(paths["hits"].read_text())
    assert [h["list"] for h in hits] == [str(paths["fmp"]), str(paths["gwol"])]
    assert all(0 <= h["hit_count"] <= TestConfig.topn for h in hits)
    union = read_blacklist(paths["union"])
    assert TestConfig.topn <= len(union) <= 2 * TestConfig.topn


def test_manifests(pipeline):
    _, paths, _ = pipeline
    for name in ("model", "scores", "fmp", "report"):
        manifest = json.loads(manifest_path(paths[name]).read_text())
        assert manifest["fmpscore_version"] == __version__
        assert str(paths[name]) in manifest["outputs"]
    manifest = json.loads((paths["dataset"] / "manifest.json").read_text())
    assert manifest["command"] == "dataset"
    assert manifest["config"]["w_h"] == 7
    assert len(manifest["outputs"]) == 2
    assert json.loads(manifest_path(paths["model"]).read_text())["config"]["trees"] == 20


def test_reruns_are_byte_identical(pipeline):
    root, paths, _ = pipeline
    model = root / "model-again.fmpm"
    scores = root / "scores-again.csv"
    fmp = root / "fmp-again.txt"
    assert _run("train", "--dataset", paths["dataset"], "--model", "gbdt", "--trees", 20,
                "--depth", 3, "--min-leaf", 1, "--no-subsample", "--out", model) == 0
    assert model.read_bytes() == paths["model"].read_bytes()
    assert _run("score", "--model", model, "--dataset", paths["dataset"], "--out", scores) == 0
    assert scores.read_bytes() == paths["scores"].read_bytes()
    assert _run("blacklist", "--scores", paths["live"], "--topn", TestConfig.topn, "--out", fmp) == 0
    assert fmp.read_bytes() == paths["fmp"].read_bytes()


def test_train_logreg_with_subsampling(pipeline):
    root, paths, _ = pipeline
    out = root / "logreg.fmpm"
    assert _run("train", "--dataset", paths["dataset"], "--model", "logreg", "--epochs", 50,
                "--subsample-ratio", 1, "--disable", "tags", "--out", out) == 0
    model = load_model(out)
    assert model.kind == "logreg"
    assert model.disabled_groups == ["tags"]
    ds = load_dataset(paths["dataset"])
    if ds.n_neg > ds.n_pos:
        assert model.subsampled
        assert model.beta == pytest.approx(ds.n_pos / ds.n_neg)


# Errors
# ======

def test_missing_input_reports_io_error(tmp_path, capsys):
    code = _run("blacklist", "--scores", tmp_path / "missing.csv", "--topn", 3,
                "--out", tmp_path / "bl.txt")
    assert code == IoError.exit_code == 8
    error = _error(capsys)
    assert error["exit_code"] == 8
    assert error["error"] == "IoError"


def test_missing_times_is_a_config_error(pipeline, tmp_path, capsys):
    _, paths, _ = pipeline
    code = _run("dataset", "--snapshot", paths["snapshot"], "--out", tmp_path / "ds")
    assert code == ConfigError.exit_code == 3
    error = _error(capsys)
    assert error == {"error": "ConfigError", "exit_code": 3,
                     "message": "Give prediction times with --t0 or --t0-list."}


def test_corrupt_snapshot(tmp_path, capsys):
    garbage = tmp_path / "garbage.fmps"
    garbage.write_bytes(b"not a snapshot at all")
    code = _run("gwol", "--snapshot", garbage, "--t0", 86400, "--n", 3, "--out", tmp_path / "g.txt")
    assert code == 7
    assert _error(capsys)["error"] == "CorruptSnapshot"


def test_ingest_skips_undecodable_lines(tmp_path, capsys):
    line = '{"ts": "2024-01-02T00:00:00Z", "src": "192.0.2.%d", "cat": "scan", "vol": 1, "det": "hp1"}'
    alerts = tmp_path / "alerts.jsonl"
    alerts.write_bytes((line % 1).encode() + b'\n{"e": "\xff\xfe"}\n' + (line % 2).encode() + b"\n")
    snapshot = tmp_path / "store.fmps"
    with pytest.warns(UserWarning, match="Invalid UTF-8"):
        assert _run("ingest", "--alerts", alerts, "--snapshot", snapshot) == 0
    assert len(AlertStore.snapshot_load(snapshot)) == 2
    code = _run("ingest", "--alerts", alerts, "--snapshot", tmp_path / "strict.fmps", "--strict")
    assert code == MalformedRecord.exit_code == 4
    error = _error(capsys)
    assert error["error"] == "MalformedRecord"
    assert error["message"].startswith("Line 2: Invalid UTF-8")


def test_unreadable_scores_are_malformed(tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    scores.write_text("")
    code = _run("blacklist", "--scores", scores, "--topn", 3, "--out", tmp_path / "bl.txt")
    assert code == 4
    assert _error(capsys)["error"] == "MalformedRecord"


def test_damaged_dataset_sidecar(pipeline, tmp_path, capsys):
    _, paths, _ = pipeline
    damaged = tmp_path / "ds"
    shutil.copytree(paths["dataset"], damaged)
    sidecar = damaged / "dataset.json"
    meta = json.loads(sidecar.read_text())
    del meta["beta"]
    sidecar.write_text(json.dumps(meta))
    code = _run("train", "--dataset", damaged, "--model", "logreg", "--out", tmp_path / "m.fmpm")
    assert code == 7
    error = _error(capsys)
    assert error["error"] == "CorruptSnapshot"
    assert "lacks 'beta'" in error["message"]
    sidecar.write_text("{")
    assert _run("train", "--dataset", damaged, "--model", "logreg", "--out", tmp_path / "m.fmpm") == 7
    assert _error(capsys)["error"] == "CorruptSnapshot"


def test_several_prediction_times_need_t0(pipeline, tmp_path, capsys):
    _, paths, _ = pipeline
    code = _run("blacklist", "--scores", paths["scores"], "--threshold", 0.5,
                "--out", tmp_path / "bl.txt")
    assert code == 3
    assert "--t0" in _error(capsys)["message"]
    t0 = TestConfig.t0(TestConfig.days[0])
    assert _run("blacklist", "--scores", paths["scores"], "--threshold", 0.5, "--t0", t0,
                "--out", tmp_path / "bl.txt") == 0
    assert read_blacklist(tmp_path / "bl.txt").generated_at == t0


def test_score_needs_an_input(pipeline, tmp_path, capsys):
    _, paths, _ = pipeline
    assert _run("score", "--model", paths["model"], "--out", tmp_path / "s.csv") == 3
    assert _error(capsys)["error"] == "ConfigError"


@pytest.mark.parametrize("argv", [
    [],
    ["train", "--dataset", "ds"],
    ["blacklist", "--scores", "s.csv", "--topn", "3", "--threshold", "0.5", "--out", "bl.txt"],
    ["train", "--dataset", "ds", "--out", "m", "--disable", "colour"],
], ids=["no-command", "missing-out", "two-policies", "unknown-group"])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args(argv)
    assert e.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert capsys.readouterr().out.strip() == f"fmpscore {__version__}"


def test_t0_accepts_timestamps():
    args = build_parser().parse_args(["gwol", "--snapshot", "s", "--t0", "2024-01-08T00:00:00Z",
                                      "--n", "3", "--out", "g"])
    assert args.t0 == DEFAULT_START + 7 * D


# Configuration
# =============

def test_config_precedence(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"model": "logreg", "epochs": 50, "seed": 3,
                                  "paths": {"dataset": "a"}}))
    cfg = RunConfig.resolve(config, {"seed": 5, "trees": None, "paths": {"out": "b"}})
    assert cfg.model == "logreg"
    assert cfg.epochs == 50
    assert cfg.seed == 5
    assert cfg.trees == RunConfig().trees
    assert cfg.paths == {"dataset": "a", "out": "b"}
    assert RunConfig.resolve().as_dict() == RunConfig().as_dict()


@pytest.mark.parametrize("data, message", [
    ({"colour": "red"}, "Unknown configuration keys"),
    ({"category": "ddos"}, "category"),
    ({"model": "forest"}, "Unknown model"),
    ({"disabled_groups": ["colour"]}, "Unknown feature groups"),
    ({"w_h": 0}, "at least one day"),
    ({"alpha": 1.5}, "alpha"),
], ids=["key", "category", "model", "group", "window", "alpha"])
def test_invalid_config(data, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(data)


def test_invalid_config_file(tmp_path):
    config = tmp_path / "run.json"
    config.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        RunConfig.from_json(config)
    config.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        RunConfig.from_json(config)
    with pytest.raises(IoError):
        RunConfig.from_json(tmp_path / "missing.json")


def test_write_manifest(tmp_path):
    artifact = tmp_path / "out.txt"
    artifact.write_text("hello\n")
    first = write_manifest(artifact, "test", RunConfig(), inputs=[], outputs=[artifact])
    assert first.name == "out.txt.manifest.json"
    text = first.read_text()
    write_manifest(artifact, "test", RunConfig(), inputs=[], outputs=[artifact])
    assert first.read_text() == text
    manifest = json.loads(text)
    assert manifest["outputs"] == {
        str(artifact): "5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"}
    assert manifest["command"] == "test"
    directory = tmp_path / "dir"
    directory.mkdir()
    assert str(manifest_path(directory)).endswith("dir/manifest.json")
