# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from .alerts import Alert, AlertReader, Category, WindowConfig, parse_alert, render_alert
from .blacklist import (
    Blacklist,
    HitReport,
    Policy,
    evaluate_blacklist,
    fmp_blacklist,
    gwol,
    read_blacklist,
    read_third_party,
    union_blacklists,
    write_blacklist,
)
from .config import RunConfig, write_manifest
from .dataset import Dataset, build, load_dataset, save_dataset, split, subsample_majority
from .evaluation import ablation_study, auc, brier, calibration_curve, evaluate, roc
from .features import (
    FEATURE_NAMES,
    FEATURE_SCHEMA_HASH,
    NUM_FEATURES,
    FeatureExtractor,
    FeatureVector,
    assemble_vector,
    ewma,
    expneg_transform,
    log1p_transform,
)
from .general import __version__, _pkg_root
from .model import (
    GbdtConfig,
    TrainedModel,
    fmp_score,
    load_model,
    predict_raw,
    recalibrate,
    save_model,
    train,
    train_gbdt,
    train_logreg,
)
from .simgen import SCENARIOS, ScenarioConfig, generate, oracle_scores, simulate, standard_scenario
from .store import AlertStore, ContextMaps, EnrichmentTags, load_context_maps
