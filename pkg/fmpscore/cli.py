# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Command-line interface: ``fmpscore <command> [options]``.

Pipeline::

    simulate -> ingest -> enrich -> dataset -> train -> score -> blacklist / gwol -> eval

Errors are reported on stderr as one JSON object
``{"error": ..., "message": ..., "exit_code": ...}`` and the process exits
with the error's code (see :mod:`fmpscore.errors`).
"""

import argparse
import ipaddress
import json
import sys

import numpy as np
import pandas as pd
from xaux import FsPath

from . import blacklist as bl
from . import dataset as dsmod
from . import simgen
from .alerts import AlertReader, Category, WindowConfig, parse_time
from .config import RunConfig, write_manifest
from .errors import ConfigError, FmpError, InvalidField, IoError, MalformedRecord
from .evaluation import ablation_study, evaluate, match_labels
from .features import ABLATION_GROUPS, FeatureExtractor
from .general import __version__
from .model import ESTIMATORS, fmp_score, load_model, predict_raw, save_model, train
from .store import AlertStore, load_context_maps
from .tools import log_error, log_info, log_warning, use_logging


def _t0(text):
    text = str(text).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    return parse_time(text)


def _read_times(filename):
    filename = FsPath(filename)
    try:
        lines = filename.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoError(f"Cannot read prediction times {filename}: {e}") from e
    except UnicodeDecodeError as e:
        raise MalformedRecord(f"Prediction times {filename} are not UTF-8 text: {e}") from None
    return [_t0(line) for line in lines if line.strip() and not line.lstrip().startswith("#")]


def _config(args, **flags):
    return RunConfig.resolve(getattr(args, "config", None), flags)


def _silent(args):
    return bool(args.quiet)


def _write_scores(filename, ips, t0s, fmp, raw):
    df = pd.DataFrame({
        "ip": [str(ipaddress.IPv4Address(int(ip))) for ip in ips],
        "t0": np.asarray(t0s, dtype=np.int64),
        "fmp": np.asarray(fmp, dtype=np.float64),
        "raw": np.asarray(raw, dtype=np.float64),
    })
    try:
        df.to_csv(filename, index=False, float_format="%.17g")
    except OSError as e:
        raise IoError(f"Cannot write scores {filename}: {e}") from e


def _read_scores(filename):
    try:
        df = pd.read_csv(filename, float_precision="round_trip")
    except OSError as e:
        raise IoError(f"Cannot read scores {filename}: {e}") from e
    except ValueError as e:
        raise MalformedRecord(f"Score file {filename} is not a CSV table: {e}") from None
    if "ip" not in df.columns or "fmp" not in df.columns:
        raise InvalidField(f"Score file {filename} needs columns 'ip' and 'fmp'.")
    try:
        df["ip"] = [int(ipaddress.IPv4Address(ip)) for ip in df["ip"]]
    except ValueError as e:
        raise InvalidField(f"Score file {filename}: {e}") from None
    return df


# Commands
# ========

def cmd_simulate(args):
    if args.config is not None:
        scenario = simgen.ScenarioConfig.from_json(args.config)
    else:
        scenario = simgen.SCENARIOS[args.scenario](seed=args.seed)
    out = FsPath(args.out)
    alerts, truth = simgen.generate(scenario, out, silent=_silent(args))
    write_manifest(out, "simulate", {"scenario": scenario.as_dict()},
                   inputs=[args.config] if args.config else [], outputs=[out])
    log_info(f"Wrote {alerts} and {truth}.", cmd="simulate")
    return 0


def cmd_ingest(args):
    cfg = _config(args, no_ptr_rule=args.no_ptr_rule,
                  paths={"alerts": args.alerts, "snapshot": args.snapshot})
    snapshot = FsPath(args.snapshot)
    if args.append and snapshot.exists():
        store = AlertStore.snapshot_load(snapshot)
    else:
        store = AlertStore(no_ptr_rule=cfg.no_ptr_rule)
    reader = AlertReader(str(args.alerts), strict=args.strict)
    summary = store.ingest(reader)
    if reader.n_skipped:
        log_warning(f"Skipped {reader.n_skipped} malformed lines in {args.alerts}.", cmd="ingest")
    store.snapshot_save(snapshot)
    write_manifest(snapshot, "ingest", cfg, inputs=[args.alerts], outputs=[snapshot])
    log_info(f"Ingested {summary.stored} alerts ({summary.duplicates} duplicates, "
             + f"{reader.n_skipped} skipped lines).", cmd="ingest")
    return 0


def cmd_enrich(args):
    cfg = _config(args, no_ptr_rule=args.no_ptr_rule,
                  paths={"snapshot": args.snapshot, "enrichment": args.enrichment,
                         "maps": args.maps})
    if args.enrichment is None and args.maps is None:
        raise ConfigError("Give --enrichment, --maps or both.")
    store = AlertStore.snapshot_load(args.snapshot)
    store.no_ptr_rule = cfg.no_ptr_rule
    inputs = [args.snapshot]
    if args.enrichment is not None:
        path = FsPath(args.enrichment)
        try:
            lines = path.read_bytes().splitlines()
        except OSError as e:
            raise IoError(f"Cannot read enrichment {path}: {e}") from e
        summary = store.attach_enrichment(lines)
        inputs.append(args.enrichment)
        log_info(f"Attached {summary.records} enrichment records ({summary.new_ips} new "
                 + f"addresses, {summary.skipped} skipped).", cmd="enrich")
    if args.maps is not None:
        store.set_context(load_context_maps(args.maps))
        inputs.append(args.maps)
    out = FsPath(args.out or args.snapshot)
    store.snapshot_save(out)
    write_manifest(out, "enrich", cfg, inputs=inputs, outputs=[out])
    return 0


def cmd_dataset(args):
    cfg = _config(args, category=args.category, w_h=args.history_days,
                  w_p=args.prediction_days, alpha=args.alpha, seed=args.seed,
                  test_fraction=args.test_fraction,
                  paths={"snapshot": args.snapshot, "t0_list": args.t0_list, "out": args.out})
    times = list(args.t0 or [])
    if args.t0_list is not None:
        times += _read_times(args.t0_list)
    if not times:
        raise ConfigError("Give prediction times with --t0 or --t0-list.")
    store = AlertStore.snapshot_load(args.snapshot)
    ds = dsmod.build(store, times, cfg.category, w_h=cfg.w_h, w_p=cfg.w_p, alpha=cfg.alpha,
                     silent=_silent(args))
    out = FsPath(args.out)
    if args.split:
        train_ds, test_ds = dsmod.split(ds, cfg.test_fraction, seed=cfg.seed)
        dsmod.save_dataset(train_ds, out / "train")
        dsmod.save_dataset(test_ds, out / "test")
    else:
        dsmod.save_dataset(ds, out)
    inputs = [args.snapshot] + ([args.t0_list] if args.t0_list else [])
    write_manifest(out, "dataset", cfg, inputs=inputs, outputs=[out])
    summary = ds.summary()
    log_info(f"{summary['n_samples']} samples, {summary['n_pos']} positive "
             + f"({summary['positive_fraction']:.3f}).", cmd="dataset")
    return 0


def cmd_train(args):
    cfg = _config(args, model=args.model, trees=args.trees, depth=args.depth,
                  learning_rate=args.learning_rate, l2_lambda=args.l2_lambda,
                  min_samples_leaf=args.min_samples_leaf, row_subsample=args.row_subsample,
                  epochs=args.epochs, logreg_learning_rate=args.logreg_learning_rate,
                  seed=args.seed, subsample=args.subsample, subsample_ratio=args.subsample_ratio,
                  disabled_groups=args.disable,
                  paths={"dataset": args.dataset, "out": args.out})
    ds = dsmod.load_dataset(args.dataset)
    if cfg.subsample and not ds.subsampled:
        ds = dsmod.subsample_majority(ds, cfg.subsample_ratio, seed=cfg.seed)
    model = train(cfg.model, ds, seed=cfg.seed, disabled=cfg.disabled_groups,
                  silent=_silent(args), **cfg.estimator_options())
    save_model(model, args.out)
    write_manifest(args.out, "train", cfg, inputs=[args.dataset], outputs=[args.out])
    log_info(f"Trained {model!r}.", cmd="train")
    return 0


def cmd_score(args):
    cfg = _config(args, paths={"model": args.model, "snapshot": args.snapshot,
                               "dataset": args.dataset, "out": args.out})
    model = load_model(args.model)
    if args.dataset is not None:
        ds = dsmod.load_dataset(args.dataset)
        if ds.target_category != model.target_category:
            raise ConfigError(f"Model predicts {model.target_category.label}, dataset is "
                              + f"{ds.target_category.label}.")
        ips, t0s, X = ds.ips, ds.t0s, ds.X
        inputs = [args.model, args.dataset]
    else:
        if args.snapshot is None or args.t0 is None:
            raise ConfigError("Give --dataset, or --snapshot with --t0.")
        store = AlertStore.snapshot_load(args.snapshot)
        meta = model.metadata
        window = WindowConfig(t0=args.t0, w_h=meta["w_h"], w_p=meta["w_p"])
        start, end = window.history
        ips = store.reported_ips(start, end, model.target_category)
        t0s = np.full(len(ips), window.t0, dtype=np.int64)
        X = FeatureExtractor(store, window, meta["alpha"]).matrix(ips, silent=_silent(args))
        inputs = [args.model, args.snapshot]
    if len(ips):
        raw = np.atleast_1d(predict_raw(model, X))
        fmp = np.atleast_1d(fmp_score(model, X))
    else:
        raw = fmp = np.empty(0)
    _write_scores(args.out, ips, t0s, fmp, raw)
    write_manifest(args.out, "score", cfg, inputs=inputs, outputs=[args.out])
    log_info(f"Scored {len(ips)} addresses.", cmd="score")
    return 0


def cmd_blacklist(args):
    cfg = _config(args, category=args.category, paths={"scores": args.scores, "out": args.out})
    scores = _read_scores(args.scores)
    t0 = None
    if "t0" in scores.columns:
        times = scores["t0"].unique()
        if args.t0 is not None:
            scores = scores[scores["t0"] == args.t0]
            t0 = args.t0
        elif len(times) > 1:
            raise ConfigError("Scores span several prediction times; choose one with --t0.")
        elif len(times) == 1:
            t0 = int(times[0])
    if args.topn is not None:
        policy = bl.Policy.topn(args.topn)
    else:
        policy = bl.Policy.at_threshold(args.threshold)
    result = bl.fmp_blacklist(scores, policy, cfg.category, t0=t0)
    bl.write_blacklist(result, args.out)
    write_manifest(args.out, "blacklist", cfg, inputs=[args.scores], outputs=[args.out])
    log_info(f"{result!r}", cmd="blacklist")
    return 0


def cmd_gwol(args):
    cfg = _config(args, category=args.category, paths={"snapshot": args.snapshot, "out": args.out})
    store = AlertStore.snapshot_load(args.snapshot)
    result = bl.gwol(store, args.t0, args.window, args.n, cfg.category)
    bl.write_blacklist(result, args.out)
    write_manifest(args.out, "gwol", cfg, inputs=[args.snapshot], outputs=[args.out])
    log_info(f"{result!r}", cmd="gwol")
    return 0


def cmd_eval(args):
    cfg = _config(args, n_bins=args.bins, min_count=args.min_count,
                  paths={"pred": args.pred, "labels": args.labels, "report": args.report})
    scores = _read_scores(args.pred)
    ds = dsmod.load_dataset(args.labels)
    pred, y = match_labels(scores, ds)
    report = evaluate(pred, y, n_bins=cfg.n_bins, min_count=cfg.min_count)
    report.extra["category"] = ds.target_category.label
    report.to_json(args.report)
    outputs = [args.report]
    if args.points:
        report.write_points(args.points)
    if args.gnuplot:
        report.write_gnuplot(args.gnuplot)
    write_manifest(args.report, "eval", cfg, inputs=[args.pred, args.labels], outputs=outputs)
    log_info(f"Brier {report.brier:.6f}, AUC {report.auc:.6f} on {report.n} samples.", cmd="eval")
    return 0


def _emit(report, filename):
    text = json.dumps(report, indent=2, sort_keys=True)
    if filename:
        try:
            FsPath(filename).write_text(text + "\n", encoding="utf-8")
        except OSError as e:
            raise IoError(f"Cannot write report {filename}: {e}") from e
    else:
        print(text)


def cmd_eval_blacklist(args):
    cfg = _config(args, category=args.category, paths={"snapshot": args.snapshot})
    store = AlertStore.snapshot_load(args.snapshot)
    reports = []
    for filename in args.list:
        listed = bl.read_blacklist(filename, category=args.category, t0=args.t0)
        report = bl.evaluate_blacklist(listed, store, category=args.category, t0=args.t0)
        reports.append({"list": str(filename), **report.as_dict()})
    _emit(reports[0] if len(reports) == 1 else reports, args.report)
    if args.report:
        write_manifest(args.report, "eval-blacklist", cfg, inputs=[args.snapshot, *args.list],
                       outputs=[args.report])
    return 0


def cmd_union(args):
    cfg = _config(args, category=args.category, paths={"out": args.out})
    lists = [bl.read_blacklist(f, category=args.category) for f in args.lists]
    result = bl.union_blacklists(lists)
    bl.write_blacklist(result, args.out)
    write_manifest(args.out, "union", cfg, inputs=args.lists, outputs=[args.out])
    log_info(f"{result!r}", cmd="union")
    return 0


def cmd_ablation(args):
    cfg = _config(args, model=args.model, trees=args.trees, depth=args.depth, seed=args.seed,
                  subsample_ratio=args.subsample_ratio,
                  paths={"train": args.train, "test": args.test, "out": args.out})
    train_ds = dsmod.load_dataset(args.train)
    test_ds = dsmod.load_dataset(args.test)
    if cfg.subsample and not train_ds.subsampled:
        train_ds = dsmod.subsample_majority(train_ds, cfg.subsample_ratio, seed=cfg.seed)
    table = ablation_study(train_ds, test_ds, kind=cfg.model, groups=args.groups, seed=cfg.seed,
                           silent=_silent(args), **cfg.estimator_options())
    try:
        table.to_csv(args.out, index=False, float_format="%.17g")
    except OSError as e:
        raise IoError(f"Cannot write {args.out}: {e}") from e
    write_manifest(args.out, "ablation", cfg, inputs=[args.train, args.test], outputs=[args.out])
    log_info("\n" + table.to_string(index=False), cmd="ablation")
    return 0


# Parser
# ======

def _add_config(parser, help_text="JSON run configuration; flags take precedence."):
    parser.add_argument("--config", default=None, help=help_text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fmpscore",
        description="Future Maliciousness Probability scores and predictive blacklists "
                    + "from intrusion-detection alerts.")
    parser.add_argument("--version", action="version", version=f"fmpscore {__version__}")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars.")
    sub = parser.add_subparsers(dest="command", required=True)
    categories = [c.label for c in Category]

    p = sub.add_parser("simulate", help="Generate a synthetic scenario.")
    _add_config(p, "Scenario JSON file.")
    p.add_argument("--scenario", choices=sorted(simgen.SCENARIOS), default="standard",
                   help="Built-in scenario used when --config is not given.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="Load alerts into a store snapshot.")
    _add_config(p)
    p.add_argument("--alerts", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--append", action="store_true", help="Add to an existing snapshot.")
    p.add_argument("--strict", action="store_true", help="Fail on the first malformed line.")
    p.add_argument("--no-ptr-rule", dest="no_ptr_rule", action="store_false", default=None,
                   help="Do not tag addresses without PTR record.")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("enrich", help="Attach enrichment records and context maps.")
    _add_config(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--enrichment")
    p.add_argument("--maps", help="Directory with the four context-map CSV files.")
    p.add_argument("--out", help="Output snapshot (default: overwrite --snapshot).")
    p.add_argument("--no-ptr-rule", dest="no_ptr_rule", action="store_false", default=None)
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("dataset", help="Build labelled feature vectors.")
    _add_config(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--category", choices=categories)
    p.add_argument("--t0", type=_t0, action="append", help="Prediction time (repeatable).")
    p.add_argument("--t0-list", dest="t0_list", help="File with one prediction time per line.")
    p.add_argument("--history-days", dest="history_days", type=int)
    p.add_argument("--prediction-days", dest="prediction_days", type=int)
    p.add_argument("--alpha", type=float, help="EWMA smoothing factor.")
    p.add_argument("--split", action="store_true", help="Write train/ and test/ subsets.")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="Train a model.")
    _add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=sorted(ESTIMATORS))
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lambda", dest="l2_lambda", type=float)
    p.add_argument("--min-leaf", dest="min_samples_leaf", type=int)
    p.add_argument("--row-subsample", dest="row_subsample", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--logreg-learning-rate", dest="logreg_learning_rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-subsample", dest="subsample", action="store_false", default=None,
                   help="Train on all negatives.")
    p.add_argument("--subsample-ratio", dest="subsample_ratio", type=float)
    p.add_argument("--disable", action="append", choices=ABLATION_GROUPS,
                   help="Leave out a feature group (repeatable).")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="Compute FMP scores.")
    _add_config(p)
    p.add_argument("--model", required=True)
    p.add_argument("--snapshot")
    p.add_argument("--t0", type=_t0)
    p.add_argument("--dataset", help="Score the samples of a dataset instead.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("blacklist", help="Blacklist from FMP scores.")
    _add_config(p)
    p.add_argument("--scores", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--topn", type=int)
    group.add_argument("--threshold", type=float)
    p.add_argument("--t0", type=_t0)
    p.add_argument("--category", choices=categories)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blacklist)

    p = sub.add_parser("gwol", help="Global worst offender list.")
    _add_config(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--t0", type=_t0, required=True)
    p.add_argument("--window", type=int, default=1, help="Days of history (1 or 7).")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--category", choices=categories)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gwol)

    p = sub.add_parser("eval", help="Brier score, calibration and ROC of scores.")
    _add_config(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--labels", required=True, help="Dataset directory with the true labels.")
    p.add_argument("--report", required=True)
    p.add_argument("--bins", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--points", help="Prefix for calibration/ROC CSV point lists.")
    p.add_argument("--gnuplot", help="Prefix for gnuplot .dat files.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("eval-blacklist", help="Hits of blacklists on their prediction day.")
    _add_config(p)
    p.add_argument("--list", action="append", required=True,
                   help="Blacklist file (repeatable); plain lists are read as third-party lists.")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--t0", type=_t0)
    p.add_argument("--category", choices=categories)
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval_blacklist)

    p = sub.add_parser("union", help="Union of blacklists.")
    _add_config(p)
    p.add_argument("--lists", nargs="+", required=True)
    p.add_argument("--category", choices=categories)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_union)

    p = sub.add_parser("ablation", help="Compare feature groups.")
    _add_config(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--model", choices=sorted(ESTIMATORS))
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--subsample-ratio", dest="subsample_ratio", type=float)
    p.add_argument("--groups", nargs="+", choices=ABLATION_GROUPS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    use_logging(args.log_level)
    try:
        return args.func(args)
    except FmpError as e:
        log_error(f"{type(e).__name__}: {e}", cmd=args.command)
        error = {"error": type(e).__name__, "message": str(e), "exit_code": e.exit_code}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        error = {"error": "IoError", "message": str(e), "exit_code": IoError.exit_code}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return IoError.exit_code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
