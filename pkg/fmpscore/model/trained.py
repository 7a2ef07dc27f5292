# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import math
from dataclasses import dataclass, field

import numpy as np

from ..alerts import Category
from ..errors import CorruptModel, DomainError, SchemaMismatch
from ..features import FEATURE_SCHEMA_HASH, NUM_FEATURES, ablation_mask
from ..formats import read_container, write_container

_REQUIRED_ARRAYS = {
    "logreg": ("weights", "bias"),
    "gbdt": ("feature", "threshold", "left", "right", "value", "tree_start"),
}


def sigmoid(z):
    """Logistic function, evaluated without overflow."""
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return float(out) if out.ndim == 0 else out


@dataclass
class TrainedModel:
    """
    A trained class-probability estimator.

    Parameters
    ----------
    kind : str
        'logreg', 'gbdt' or a registered estimator kind.
    params : dict of str to numpy.ndarray
        logreg: ``weights`` (58,) and ``bias`` (1,). gbdt: the node arrays
        ``feature``, ``threshold``, ``left``, ``right``, ``value`` of all trees
        and ``tree_start``, the index of each tree's root.
    beta : float
        Recalibration factor: the fraction of negatives kept when the
        training set was subsampled, 1 otherwise.
    subsampled : bool
        Whether the training set was subsampled.
    target_category : Category
    metadata : dict
        Seed, feature parameters, feature schema hash, disabled feature
        groups, estimator settings and training curve.
    """
    kind: str
    params: dict
    beta: float
    subsampled: bool
    target_category: Category
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        from .registry import ESTIMATORS
        if self.kind not in ESTIMATORS:
            raise CorruptModel(f"Unknown model kind {self.kind!r}.")
        self.target_category = Category.from_label(self.target_category)
        self.metadata.setdefault("feature_schema", FEATURE_SCHEMA_HASH)
        self.metadata.setdefault("disabled_groups", [])

    @property
    def n_trees(self):
        return len(self.params["tree_start"]) if self.kind == "gbdt" else 0

    @property
    def disabled_groups(self):
        return list(self.metadata.get("disabled_groups", []))

    def raw_score(self, X):
        """Score before the sigmoid for a matrix of shape ``(n, 58)``."""
        from .registry import ESTIMATORS
        return ESTIMATORS[self.kind].raw_score(self.params, X)

    def __repr__(self):
        extra = f", trees={self.n_trees}" if self.kind == "gbdt" else ""
        return (f"TrainedModel({self.kind}, {self.target_category.label}{extra}, "
                + f"beta={self.beta:.6g}, subsampled={self.subsampled})")


def _as_matrix(model, x):
    if model.metadata.get("feature_schema") != FEATURE_SCHEMA_HASH:
        raise SchemaMismatch("The model was trained on another feature layout "
                             + f"({model.metadata.get('feature_schema')} != {FEATURE_SCHEMA_HASH}).")
    values = x.values if hasattr(x, "values") and not hasattr(x, "columns") else x
    X = np.asarray(values, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != NUM_FEATURES:
        raise SchemaMismatch(f"Expected feature vectors of length {NUM_FEATURES}, got shape {X.shape}.")
    mask = ablation_mask(model.disabled_groups, model.target_category)
    if mask.any():
        X = X.copy()
        X[:, mask] = 0.0
    return X, single


def predict_raw(model, x):
    """
    Estimated probability of the positive class, before recalibration.

    Parameters
    ----------
    model : TrainedModel
    x : FeatureVector, array_like of shape (58,) or (n, 58)

    Returns
    -------
    float or numpy.ndarray

    Raises
    ------
    SchemaMismatch
        If the vector length or the model's feature schema differ from the
        current feature layout.
    """
    X, single = _as_matrix(model, x)
    p = sigmoid(model.raw_score(X))
    p = np.atleast_1d(p)
    return float(p[0]) if single else p


def recalibrate(y_s, beta):
    """
    Undo the bias introduced by subsampling the negative class:
    ``beta * y_s / (beta * y_s - y_s + 1)``.

    Strictly increasing in ``y_s`` for any ``beta > 0``, with fixed points 0
    and 1, so rankings are unchanged.

    Parameters
    ----------
    y_s : float or array_like
        Probabilities in [0, 1] from a model trained on subsampled data.
    beta : float
        Positive recalibration factor.

    Returns
    -------
    float or numpy.ndarray

    Raises
    ------
    DomainError
        If ``beta`` is not a positive finite number or ``y_s`` is outside [0, 1].

    Examples
    --------
    >>> recalibrate(0.6, 0.2)
    0.23076923076923078
    """
    if not (isinstance(beta, (int, float, np.floating, np.integer))
            and math.isfinite(beta) and beta > 0):
        raise DomainError(f"Recalibration factor must be positive and finite, got {beta!r}.")
    ys = np.asarray(y_s, dtype=np.float64)
    if np.any(np.isnan(ys)) or np.any(ys < 0) or np.any(ys > 1):
        raise DomainError(f"Probabilities must be in [0, 1], got {y_s!r}.")
    bys = beta * ys
    out = np.clip(bys / (bys + (1.0 - ys)), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def fmp_score(model, x):
    """
    Future Maliciousness Probability: :func:`predict_raw`, recalibrated with
    the model's ``beta`` when it was trained on subsampled data.
    """
    raw = predict_raw(model, x)
    if model.subsampled:
        return recalibrate(raw, model.beta)
    return raw


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_model(model, filename):
    """
    Write a model container file (magic ``FMPM``). The same model always
    produces the same bytes.
    """
    meta = {
        "kind": model.kind,
        "beta": float(model.beta),
        "subsampled": bool(model.subsampled),
        "target_category": model.target_category.label,
        "metadata": _json_safe(model.metadata),
    }
    arrays = {name: model.params[name] for name in sorted(model.params)}
    write_container("model", filename, meta, arrays)


def load_model(filename):
    """
    Read a model written by :func:`save_model`.

    Raises
    ------
    IoError, VersionMismatch, CorruptModel
    """
    meta, arrays = read_container("model", filename)
    try:
        model = TrainedModel(kind=meta["kind"], params=arrays, beta=meta["beta"],
                             subsampled=meta["subsampled"],
                             target_category=meta["target_category"],
                             metadata=meta["metadata"])
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CorruptModel):
            raise
        raise CorruptModel(f"Model file {filename} has incomplete metadata: {e}") from e
    missing = [name for name in _REQUIRED_ARRAYS.get(model.kind, ()) if name not in arrays]
    if missing:
        raise CorruptModel(f"Model file {filename} lacks arrays {missing}.")
    return model
