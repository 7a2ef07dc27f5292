# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from typing import Callable, NamedTuple

from ..errors import ConfigError
from .gbdt import GbdtConfig, ensemble_score, train_gbdt
from .logreg import linear_score, train_logreg


class Estimator(NamedTuple):
    """Training function and raw scoring function of one model kind."""
    trainer: Callable
    raw_score: Callable


ESTIMATORS = {
    "logreg": Estimator(train_logreg, linear_score),
    "gbdt": Estimator(train_gbdt, ensemble_score),
}


def register_estimator(kind, trainer, raw_score):
    """
    Make a new model kind available to :func:`train`, the prediction
    functions and :func:`load_model`.

    Parameters
    ----------
    kind : str
    trainer : callable
        ``trainer(dataset, seed=..., disabled=..., silent=..., **options)``
        returning a :class:`TrainedModel` of this ``kind`` whose ``params``
        are numpy arrays.
    raw_score : callable
        ``raw_score(params, X)``: scores before the sigmoid for a matrix of
        shape ``(n, 58)``.

    Raises
    ------
    ConfigError
        If ``kind`` is taken or a function is not callable.
    """
    if kind in ESTIMATORS:
        raise ConfigError(f"Estimator {kind!r} is already registered.")
    if not callable(trainer) or not callable(raw_score):
        raise ConfigError(f"Estimator {kind!r} needs a callable trainer and raw_score.")
    ESTIMATORS[kind] = Estimator(trainer, raw_score)


def estimator(kind):
    if kind not in ESTIMATORS:
        raise ConfigError(f"Unknown model kind {kind!r}; choose from {sorted(ESTIMATORS)}.")
    return ESTIMATORS[kind]


def train(kind, dataset, seed=0, disabled=(), silent=True, **options):
    """
    Train a model of the given kind.

    Parameters
    ----------
    kind : str
        'logreg', 'gbdt' or a kind added with :func:`register_estimator`.
    dataset : Dataset
    seed : int, optional
    disabled : iterable of str, optional
        Feature groups to leave out.
    silent : bool, optional
    **options
        logreg: ``epochs``, ``learning_rate``. gbdt: the :class:`GbdtConfig`
        fields, or ``config``.

    Returns
    -------
    TrainedModel
    """
    trainer = estimator(kind).trainer
    if kind == "gbdt" and "config" not in options:
        try:
            options = {"config": GbdtConfig(**options)}
        except TypeError as e:
            raise ConfigError(f"Bad GBDT option: {e}") from None
    return trainer(dataset, seed=seed, disabled=disabled, silent=silent, **options)
