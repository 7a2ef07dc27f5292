# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Gradient-boosted regression trees on the logistic loss (Newton boosting).

Each tree is grown level by level. For every node, the split maximising

    G_L² / (H_L + λ) + G_R² / (H_R + λ) - G² / (H + λ)

over all features and all cut points between distinct sorted values is
taken, where G and H are the sums of the per-sample gradients ``σ(F) - y``
and hessians ``σ(F)(1 - σ(F))``. Leaves output ``-G / (H + λ)`` scaled by
the learning rate. Samples go left when ``x[feature] <= threshold``.

The sort order of every feature is computed once. At each level it is
regrouped by node with a stable sort on the small-integer node ids, so the
samples of a node stay sorted by feature value without sorting again.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from tqdm.auto import tqdm

from ..errors import ConfigError, NonFinite
from ..features import apply_ablation
from .logreg import base_metadata, check_trainable, recalibration_beta
from .trained import TrainedModel, sigmoid

MAX_DEPTH = 15


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 200
    max_depth: int = 7
    learning_rate: float = 0.1
    l2_lambda: float = 1.0
    min_samples_leaf: int = 20
    subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}.")
        if not 1 <= self.max_depth <= MAX_DEPTH:
            raise ConfigError(f"max_depth must be in [1, {MAX_DEPTH}], got {self.max_depth}.")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}.")
        if self.l2_lambda < 0:
            raise ConfigError(f"l2_lambda must be non-negative, got {self.l2_lambda}.")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}.")
        if not 0 < self.subsample <= 1:
            raise ConfigError(f"subsample must be in (0, 1], got {self.subsample}.")

    def as_dict(self):
        return asdict(self)


def _score(G, H, lam):
    G, H = np.asarray(G, dtype=np.float64), np.asarray(H, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return G * G / (H + lam)


class _TreeBuilder:
    # Node arrays of one tree, in breadth-first order.
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def new_node(self):
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def arrays(self):
        return {
            "feature": np.array(self.feature, dtype=np.int32),
            "threshold": np.array(self.threshold, dtype=np.float64),
            "left": np.array(self.left, dtype=np.int32),
            "right": np.array(self.right, dtype=np.int32),
            "value": np.array(self.value, dtype=np.float64),
        }


def grow_tree(XT, order, g, h, config):
    """
    Grow one regression tree.

    Parameters
    ----------
    XT : numpy.ndarray of shape (d, n)
        Transposed feature matrix.
    order : numpy.ndarray of shape (d, m)
        For each feature, the indices of the m training rows sorted by that
        feature's value.
    g, h : numpy.ndarray of shape (n,)
        Gradients and hessians.
    config : GbdtConfig

    Returns
    -------
    dict of str to numpy.ndarray
        Node arrays with tree-local child indices.
    """
    key_dtype = np.uint8 if 2 ** config.max_depth < 255 else np.uint16
    sentinel = np.iinfo(key_dtype).max
    lam, min_leaf = config.l2_lambda, config.min_samples_leaf
    tree = _TreeBuilder()

    node_of = np.full(XT.shape[1], sentinel, dtype=key_dtype)
    node_of[order[0]] = 0
    level = [tree.new_node()]
    for depth in range(config.max_depth + 1):
        if not level:
            break
        keys = node_of[order]
        perm = np.argsort(keys, axis=1, kind="stable")
        order = np.take_along_axis(order, perm, axis=1)
        counts = np.bincount(keys[0][keys[0] != sentinel], minlength=len(level))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

        next_level = []
        for k, node in enumerate(level):
            rows = order[:, starts[k]:starts[k] + counts[k]]
            n_rows = rows.shape[1]
            G = float(np.sum(g[rows[0]]))
            H = float(np.sum(h[rows[0]]))
            best = None
            if depth < config.max_depth and n_rows >= 2 * min_leaf:
                best = _best_split(XT, rows, g, h, G, H, lam, min_leaf)
            if best is None:
                denom = H + lam
                tree.value[node] = -G / denom * config.learning_rate if denom > 0 else 0.0
                node_of[rows[0]] = sentinel
                continue
            feature, threshold = best
            tree.feature[node] = feature
            tree.threshold[node] = threshold
            tree.left[node] = left = tree.new_node()
            tree.right[node] = right = tree.new_node()
            goes_right = XT[feature, rows[0]] > threshold
            node_of[rows[0]] = np.where(goes_right, len(next_level) + 1, len(next_level))
            next_level += [left, right]
        level = next_level
    return tree.arrays()


def _best_split(XT, rows, g, h, G, H, lam, min_leaf):
    # rows: (d, n_rows) node rows sorted by each feature. Returns (feature, threshold) or None.
    n_rows = rows.shape[1]
    xs = np.take_along_axis(XT, rows, axis=1)
    gs = np.cumsum(g[rows], axis=1)
    hs = np.cumsum(h[rows], axis=1)
    gl, hl = gs[:, :-1], hs[:, :-1]
    gr, hr = gs[:, -1:] - gl, hs[:, -1:] - hl
    gain = _score(gl, hl, lam) + _score(gr, hr, lam) - _score(G, H, lam)
    n_left = np.arange(1, n_rows)
    valid = (xs[:, :-1] < xs[:, 1:]) & (n_left >= min_leaf) & (n_rows - n_left >= min_leaf)
    gain = np.where(valid & np.isfinite(gain), gain, -np.inf)
    flat = int(np.argmax(gain))
    feature, pos = divmod(flat, n_rows - 1)
    if not gain[feature, pos] > 0:
        return None
    lo, hi = xs[feature, pos], xs[feature, pos + 1]
    threshold = 0.5 * (lo + hi)
    if not lo <= threshold < hi:
        threshold = lo
    return feature, float(threshold)


def tree_score(tree, X, root=0):
    """Output of one tree (stored from index ``root`` in the node arrays) for each row of X."""
    feature, threshold = tree["feature"], tree["threshold"]
    left, right = tree["left"], tree["right"]
    node = np.full(len(X), root, dtype=np.int64)
    active = np.arange(len(X))
    while len(active):
        f = feature[node[active]]
        internal = f >= 0
        active, f = active[internal], f[internal]
        if not len(active):
            break
        current = node[active]
        go_left = X[active, f] <= threshold[current]
        node[active] = np.where(go_left, left[current], right[current])
    return tree["value"][node]


def ensemble_score(params, X):
    """Sum of the outputs of all trees (base score 0)."""
    F = np.zeros(len(X))
    for root in params["tree_start"]:
        F += tree_score(params, X, root=int(root))
    return F


def _log_loss(F, y):
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def train_gbdt(train, config=None, seed=0, disabled=(), silent=True):
    """
    Boosted trees on the logistic loss.

    Parameters
    ----------
    train : Dataset
    config : GbdtConfig, optional
        Defaults to 200 trees of depth 7, learning rate 0.1, λ = 1 and at
        least 20 samples per leaf.
    seed : int, optional
        Seeds the per-tree row subsample (only used when ``config.subsample < 1``).
    disabled : iterable of str, optional
        Feature groups to leave out.
    silent : bool, optional

    Returns
    -------
    TrainedModel
        The metadata holds the training log-loss after each tree.

    Raises
    ------
    DegenerateData
        If the training set has a single class.
    """
    check_trainable(train)
    config = GbdtConfig() if config is None else config
    if not isinstance(config, GbdtConfig):
        raise ConfigError("Expected a GbdtConfig.")
    disabled = list(disabled)
    X = apply_ablation(train.X, disabled, train.target_category)
    y = train.y.astype(np.float64)
    n, d = X.shape
    XT = np.ascontiguousarray(X.T)
    full_order = np.argsort(XT, axis=1, kind="stable")
    rng = np.random.default_rng(seed)

    F = np.zeros(n)
    parts = {name: [] for name in ("feature", "threshold", "left", "right", "value")}
    tree_start = []
    offset = 0
    curve = []
    for _ in tqdm(range(config.n_trees), desc="Boosting", disable=silent):
        p = sigmoid(F)
        g = p - y
        h = p * (1.0 - p)
        order = full_order
        if config.subsample < 1:
            m = max(1, int(math.floor(config.subsample * n + 0.5)))
            keep = np.zeros(n, dtype=bool)
            keep[rng.choice(n, size=m, replace=False)] = True
            order = full_order[keep[full_order]].reshape(d, m)
        tree = grow_tree(XT, order, g, h, config)
        F += tree_score(tree, X)
        loss = _log_loss(F, y)
        if not math.isfinite(loss):
            raise NonFinite("Training loss is no longer finite.")
        curve.append(loss)
        internal = tree["feature"] >= 0
        tree["left"] = np.where(internal, tree["left"] + offset, -1).astype(np.int32)
        tree["right"] = np.where(internal, tree["right"] + offset, -1).astype(np.int32)
        for name in parts:
            parts[name].append(tree[name])
        tree_start.append(offset)
        offset += len(tree["feature"])

    params = {name: np.concatenate(chunks) for name, chunks in parts.items()}
    params["tree_start"] = np.array(tree_start, dtype=np.int64)
    metadata = base_metadata(train, seed, disabled)
    metadata.update({"gbdt": config.as_dict(), "training_curve": curve})
    return TrainedModel(kind="gbdt", params=params, beta=recalibration_beta(train),
                        subsampled=train.subsampled, target_category=train.target_category,
                        metadata=metadata)
