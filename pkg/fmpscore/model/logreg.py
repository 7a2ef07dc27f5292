# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import math

import numpy as np
from tqdm.auto import tqdm

from ..errors import ConfigError, DegenerateData, EmptyDataset, NonFinite
from ..features import FEATURE_SCHEMA_HASH, apply_ablation
from .trained import TrainedModel, sigmoid

DEFAULT_EPOCHS = 300


def log_loss_and_gradient(w, b, X, y):
    """
    Mean log-loss of a linear logistic model and its gradient.

    Parameters
    ----------
    w : array_like of shape (d,)
    b : float
    X : array_like of shape (n, d)
    y : array_like of shape (n,)
        Labels in {0, 1}.

    Returns
    -------
    loss : float
    grad_w : numpy.ndarray of shape (d,)
    grad_b : float
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = X @ np.asarray(w, dtype=np.float64) + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    residual = sigmoid(z) - y
    return loss, X.T @ residual / len(y), float(np.mean(residual))


def linear_score(params, X):
    """Raw logistic-regression score ``X @ weights + bias``."""
    return X @ params["weights"] + params["bias"][0]


def check_trainable(ds):
    if len(ds) == 0:
        raise EmptyDataset("Cannot train on an empty dataset.")
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise DegenerateData(f"Training set has a single class ({ds.n_pos} positives, "
                             + f"{ds.n_neg} negatives).")


def recalibration_beta(ds):
    return ds.neg_rate if ds.subsampled else 1.0


def base_metadata(ds, seed, disabled):
    return {
        "seed": seed,
        "alpha": ds.alpha,
        "w_h": ds.w_h,
        "w_p": ds.w_p,
        "feature_schema": FEATURE_SCHEMA_HASH,
        "disabled_groups": sorted(disabled),
        "pool_beta": ds.beta,
        "n_pos": ds.n_pos,
        "n_neg": ds.n_neg,
    }


def train_logreg(train, epochs=DEFAULT_EPOCHS, learning_rate=None, seed=0, disabled=(),
                 silent=True):
    """
    Logistic regression fitted by full-batch gradient descent on the mean log-loss.

    Features are standardised internally and the fitted weights are mapped
    back to raw feature units. Starting from zero weights, the default step
    size ``1 / L`` (``L`` the Lipschitz constant of the gradient) decreases
    the loss at every epoch.

    Parameters
    ----------
    train : Dataset
    epochs : int, optional
    learning_rate : float, optional
        Step size on the standardised features. Defaults to ``1 / L``.
    seed : int, optional
        Recorded in the metadata; training itself is deterministic.
    disabled : iterable of str, optional
        Feature groups to leave out (see :func:`fmpscore.features.ablation_columns`).
    silent : bool, optional

    Returns
    -------
    TrainedModel

    Raises
    ------
    DegenerateData
        If the training set has a single class.
    NonFinite
        If the loss diverges (the learning rate is too high).
    """
    check_trainable(train)
    if epochs < 1:
        raise ConfigError(f"Number of epochs must be at least 1, got {epochs}.")
    if learning_rate is not None and not learning_rate > 0:
        raise ConfigError(f"Learning rate must be positive, got {learning_rate}.")
    disabled = list(disabled)
    X = apply_ablation(train.X, disabled, train.target_category)
    y = train.y.astype(np.float64)

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    if learning_rate is None:
        Za = np.hstack([Z, np.ones((len(Z), 1))])
        lipschitz = 0.25 * np.linalg.eigvalsh(Za.T @ Za / len(Za))[-1]
        learning_rate = 1.0 / lipschitz

    w = np.zeros(Z.shape[1])
    b = 0.0
    curve = []
    for _ in tqdm(range(epochs), desc="Training logreg", disable=silent):
        loss, grad_w, grad_b = log_loss_and_gradient(w, b, Z, y)
        if not math.isfinite(loss):
            raise NonFinite(f"Log-loss diverged at epoch {len(curve)}; lower the learning rate.")
        curve.append(loss)
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b
    loss, _, _ = log_loss_and_gradient(w, b, Z, y)
    if not (math.isfinite(loss) and np.all(np.isfinite(w)) and math.isfinite(b)):
        raise NonFinite("Log-loss diverged; lower the learning rate.")
    curve.append(loss)

    weights = w / sd
    bias = b - float(np.sum(w * mu / sd))
    metadata = base_metadata(train, seed, disabled)
    metadata.update({"epochs": epochs, "learning_rate": float(learning_rate),
                     "training_curve": curve})
    return TrainedModel(kind="logreg",
                        params={"weights": weights, "bias": np.array([bias])},
                        beta=recalibration_beta(train), subsampled=train.subsampled,
                        target_category=train.target_category, metadata=metadata)
