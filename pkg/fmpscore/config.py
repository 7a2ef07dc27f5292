# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import json
from dataclasses import asdict, dataclass, field, fields

from xaux import FsPath

from .alerts import DEFAULT_HISTORY_DAYS, DEFAULT_PREDICTION_DAYS, Category
from .dataset import DEFAULT_SEED, DEFAULT_SUBSAMPLE_RATIO, DEFAULT_TEST_FRACTION
from .errors import ConfigError, IoError
from .evaluation import DEFAULT_MIN_COUNT, DEFAULT_N_BINS
from .features import ABLATION_GROUPS, DEFAULT_ALPHA
from .formats.version import app_version
from .general import __version__
from .model import ESTIMATORS, GbdtConfig
from .model.logreg import DEFAULT_EPOCHS
from .tools import sha256_file

MANIFEST_SUFFIX = ".manifest.json"
_GBDT = GbdtConfig()


@dataclass
class RunConfig:
    """
    Every setting a pipeline run can take from a config file or the command line.

    Precedence is command-line flag, then config file, then these defaults.
    """
    category: str = Category.SCAN.label
    w_h: int = DEFAULT_HISTORY_DAYS
    w_p: int = DEFAULT_PREDICTION_DAYS
    alpha: float = DEFAULT_ALPHA
    model: str = "gbdt"
    trees: int = _GBDT.n_trees
    depth: int = _GBDT.max_depth
    learning_rate: float = _GBDT.learning_rate
    l2_lambda: float = _GBDT.l2_lambda
    min_samples_leaf: int = _GBDT.min_samples_leaf
    row_subsample: float = _GBDT.subsample
    epochs: int = DEFAULT_EPOCHS
    logreg_learning_rate: float = None
    seed: int = DEFAULT_SEED
    subsample: bool = True
    subsample_ratio: float = DEFAULT_SUBSAMPLE_RATIO
    test_fraction: float = DEFAULT_TEST_FRACTION
    n_bins: int = DEFAULT_N_BINS
    min_count: int = DEFAULT_MIN_COUNT
    no_ptr_rule: bool = True
    disabled_groups: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.category = Category.from_label(self.category).label
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.model not in ESTIMATORS:
            raise ConfigError(f"Unknown model {self.model!r}; choose from {sorted(ESTIMATORS)}.")
        unknown = set(self.disabled_groups) - set(ABLATION_GROUPS)
        if unknown:
            raise ConfigError(f"Unknown feature groups {sorted(unknown)}.")
        self.disabled_groups = sorted(self.disabled_groups)
        if self.w_h < 1 or self.w_p < 1:
            raise ConfigError("Window lengths must be at least one day.")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}.")
        self.paths = {k: str(v) for k, v in self.paths.items() if v is not None}

    def gbdt_config(self):
        return GbdtConfig(n_trees=self.trees, max_depth=self.depth,
                          learning_rate=self.learning_rate, l2_lambda=self.l2_lambda,
                          min_samples_leaf=self.min_samples_leaf, subsample=self.row_subsample)

    def estimator_options(self):
        if self.model == "gbdt":
            return {"config": self.gbdt_config()}
        return {"epochs": self.epochs, "learning_rate": self.logreg_learning_rate}

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ConfigError(f"Unknown configuration keys {sorted(unknown)}.")
        return cls(**data)

    @classmethod
    def from_json(cls, filename):
        filename = FsPath(filename)
        try:
            with filename.open("r", encoding="utf-8") as fid:
                data = json.load(fid)
        except OSError as e:
            raise IoError(f"Cannot read config file {filename}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {filename} is not valid JSON: {e.msg}.") from None
        except UnicodeDecodeError as e:
            raise ConfigError(f"Config file {filename} is not UTF-8 text: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {filename} must hold a JSON object.")
        return cls.from_dict(data)

    @classmethod
    def resolve(cls, config_file=None, flags=None):
        """
        Merge defaults, an optional config file and command-line flags.

        Parameters
        ----------
        config_file : path, optional
        flags : dict, optional
            Values given on the command line; None means not given.

        Returns
        -------
        RunConfig
        """
        data = cls.from_json(config_file).as_dict() if config_file is not None else {}
        paths = dict(data.pop("paths", {}))
        for key, value in (flags or {}).items():
            if value is None:
                continue
            if key == "paths":
                paths.update({k: v for k, v in value.items() if v is not None})
            elif key in cls.field_names():
                data[key] = value
        data["paths"] = paths
        return cls.from_dict(data)


def manifest_path(artifact):
    """``<artifact>.manifest.json``, or ``manifest.json`` inside a directory artifact."""
    artifact = FsPath(artifact)
    if artifact.is_dir():
        return artifact / "manifest.json"
    return artifact.parent / (artifact.name + MANIFEST_SUFFIX)


def _checksums(files):
    out = {}
    for name in files:
        path = FsPath(name)
        if path.is_file():
            out[str(name)] = sha256_file(path)
        elif path.is_dir():
            for sub in sorted(p for p in path.rglob("*") if p.is_file()
                              and not p.name.endswith("manifest.json")):
                out[str(sub)] = sha256_file(sub)
    return out


def write_manifest(artifact, command, config, inputs=(), outputs=()):
    """
    Record how an artifact was made: fmpscore version, command, resolved
    configuration and SHA-256 of every input and output file. No wall-clock
    time is recorded, so identical runs give identical manifests.
    """
    manifest = {
        "fmpscore_version": __version__,
        "format_series": app_version,
        "command": command,
        "config": config.as_dict() if isinstance(config, RunConfig) else config,
        "inputs": _checksums(inputs),
        "outputs": _checksums(outputs),
    }
    path = manifest_path(artifact)
    try:
        with path.open("w", encoding="utf-8") as fid:
            json.dump(manifest, fid, indent=2, sort_keys=True)
            fid.write("\n")
    except OSError as e:
        raise IoError(f"Cannot write manifest {path}: {e}") from e
    return path
