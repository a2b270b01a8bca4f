'''Bagged Gini decision trees with flat node arrays'''

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..base import Serializable

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class ForestParams(Serializable):
    '''Forest hyperparameters

    ``max_features`` defaults to ⌈√d⌉ and ``max_bins`` caps the split points per feature.
    '''

    n_trees: int = 300
    max_depth: int = 24
    min_leaf: int = 2
    max_features: Optional[int] = None
    max_bins: int = 64

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1 or self.max_bins < 2:
            raise ValueError(f'invalid forest parameters: {self}')

    def features_per_split(self, d: int) -> int:
        m = self.max_features or math.ceil(math.sqrt(d))
        return max(1, min(d, m))

    @property
    def json(self) -> dict:
        return {
            'n_trees': self.n_trees,
            'max_depth': self.max_depth,
            'min_leaf': self.min_leaf,
            'max_features': self.max_features,
            'max_bins': self.max_bins,
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(**obj)


def gini(counts: np.ndarray) -> np.ndarray:
    '''Gini impurity of class-count rows'''
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)
    with np.errstate(invalid='ignore', divide='ignore'):
        p = counts / total[..., None]
    return np.where(total > 0, 1.0 - (p**2).sum(axis=-1), 0.0)


@dataclass
class Tree:
    '''Flat binary tree; ``feature == LEAF`` marks leaves, left is ``x <= threshold``'''

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance: np.ndarray

    @property
    def node_count(self) -> int:
        return int(len(self.feature))

    def apply(self, X: np.ndarray) -> np.ndarray:
        '''Leaf index reached by every row'''
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            internal = f != LEAF
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, f, 0)] <= self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def json(self) -> dict:
        return {
            'feature': self.feature.tolist(),
            'threshold': self.threshold.tolist(),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'value': self.value.tolist(),
            'importance': self.importance.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> 'Tree':
        return cls(
            np.asarray(obj['feature'], dtype=int),
            np.asarray(obj['threshold'], dtype=float),
            np.asarray(obj['left'], dtype=int),
            np.asarray(obj['right'], dtype=int),
            np.asarray(obj['value'], dtype=float),
            np.asarray(obj['importance'], dtype=float),
        )


def quantize(X: np.ndarray, max_bins: int) -> Tuple[np.ndarray, np.ndarray]:
    '''Rank-based bin codes and the split threshold after every bin

    A feature with at most ``max_bins`` distinct values gets one bin per
    value, so its splits are exact. Otherwise bins hold roughly equal
    numbers of distinct values. ``cuts[f, b]`` separates bin ``b`` from bin
    ``b + 1`` of feature ``f`` (midpoint, or the lower value when the
    midpoint rounds up to the upper one); NaN past the last bin.
    '''
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int64)
    cuts = np.full((d, max_bins), np.nan)
    for f in range(d):
        u = np.unique(X[:, f])
        if len(u) > max_bins:
            pos = np.unique(np.ceil(np.arange(1, max_bins + 1) * len(u) / max_bins).astype(int) - 1)
        else:
            pos = np.arange(len(u))
        upper = u[pos]
        codes[:, f] = np.searchsorted(upper, X[:, f], side='left')
        lo, hi = upper[:-1], u[pos[:-1] + 1]
        mid = (lo + hi) / 2.0
        cuts[f, : len(lo)] = np.where(mid < hi, mid, lo)
    return codes, cuts


def _class_groups(key: np.ndarray, cls: np.ndarray, n_keys: int, n_classes: int):
    '''Class counts of every occupied key, keys ascending'''
    if n_keys <= 4 * key.size:
        hist = np.bincount(key * n_classes + cls, minlength=n_keys * n_classes).reshape(n_keys, n_classes)
        keys = np.flatnonzero(hist.sum(axis=1))
        return keys, hist[keys]
    order = np.argsort(key, kind='stable')
    sk = key[order]
    new = np.r_[True, sk[1:] != sk[:-1]]
    group = np.cumsum(new) - 1
    counts = np.bincount(group * n_classes + cls[order], minlength=int(new.sum()) * n_classes)
    return sk[new], counts.reshape(-1, n_classes)


def best_splits(
    codes: np.ndarray,
    y: np.ndarray,
    node: np.ndarray,
    features: np.ndarray,
    totals: np.ndarray,
    n_bins: int,
    min_leaf: int,
):
    '''Lowest weighted child Gini for every node of one tree level

    ``node`` gives each row's position among the nodes being split and
    ``features[g]`` the candidate features of node ``g``. Ties keep the
    candidate listed first, then the lowest threshold.

    Returns
    -------
    (nodes, feature, bin, cost, left_counts)
        One entry per node that has a split leaving ``min_leaf`` rows on
        both sides; ``bin`` is the last bin sent left.
    '''
    n_nodes, m = features.shape
    n_classes = totals.shape[1]
    pair = node[:, None] * m + np.arange(m)
    key = (pair * n_bins + codes[np.arange(len(node))[:, None], features[node]]).ravel()
    keys, groups = _class_groups(key, np.repeat(y, m), n_nodes * m * n_bins, n_classes)

    pair_of = keys // n_bins
    node_of = pair_of // m
    first = np.r_[True, pair_of[1:] != pair_of[:-1]]
    cum = np.vstack([np.zeros((1, n_classes)), np.cumsum(groups, axis=0)])
    left = cum[1:] - cum[np.flatnonzero(first)[np.cumsum(first) - 1]]
    total = totals[node_of].astype(float)
    right = total - left
    n_left = left.sum(axis=1)
    n_node = total.sum(axis=1)
    n_right = n_node - n_left
    ok = (n_right > 0) & (n_left >= min_leaf) & (n_right >= min_leaf)
    with np.errstate(invalid='ignore'):
        cost = np.where(ok, (n_left * gini(left) + n_right * gini(right)) / n_node, np.inf)

    starts = np.flatnonzero(np.r_[True, node_of[1:] != node_of[:-1]])
    best = np.minimum.reduceat(cost, starts)
    hit = np.flatnonzero((cost == best[node_of]) & np.isfinite(cost))
    nodes, at = np.unique(node_of[hit], return_index=True)
    chosen = hit[at]
    return nodes, features[nodes, pair_of[chosen] % m], keys[chosen] % n_bins, cost[chosen], left[chosen]


def grow_tree(
    codes: np.ndarray,
    cuts: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    params: ForestParams,
    rng: np.random.Generator,
) -> Tree:
    '''Grow one tree a level at a time on binned features

    Nodes are numbered breadth first, left child before right. Sampled
    candidate features come in random order, so equal splits on different
    features are picked at random.
    '''
    n, d = codes.shape
    m = params.features_per_split(d)
    capacity = 2 * n + 1
    feature = np.full(capacity, LEAF)
    threshold = np.zeros(capacity)
    left = np.full(capacity, LEAF)
    right = np.full(capacity, LEAF)
    value = np.zeros((capacity, n_classes))
    importance = np.zeros(d)

    root = np.bincount(y, minlength=n_classes).astype(float)
    value[0] = root / root.sum()
    count = 1
    node_of = np.zeros(n, dtype=np.int64)
    frontier = np.array([0])
    depth = 0
    while frontier.size and depth < params.max_depth:
        rows = np.flatnonzero(node_of >= 0)
        local = np.full(count, -1)
        local[frontier] = np.arange(frontier.size)
        at = local[node_of[rows]]
        flat = at * n_classes + y[rows]
        totals = np.bincount(flat, minlength=frontier.size * n_classes).reshape(-1, n_classes)
        node_of[rows] = -1

        candidates = np.flatnonzero(
            (np.count_nonzero(totals, axis=1) >= 2) & (totals.sum(axis=1) >= 2 * params.min_leaf)
        )
        if candidates.size == 0:
            break
        position = np.full(frontier.size, -1)
        position[candidates] = np.arange(candidates.size)
        g = position[at]
        rows, g = rows[g >= 0], g[g >= 0]
        if m == d:
            features = np.broadcast_to(np.arange(d), (candidates.size, d))
        else:
            draw = rng.random((candidates.size, d))
            picked = np.argpartition(draw, m - 1, axis=1)[:, :m]
            order = np.argsort(np.take_along_axis(draw, picked, axis=1), axis=1)
            features = np.take_along_axis(picked, order, axis=1)

        split, f, b, cost, left_counts = best_splits(
            codes[rows], y[rows], g, features, totals[candidates], cuts.shape[1], params.min_leaf
        )
        if split.size == 0:
            break
        parents = frontier[candidates[split]]
        node_totals = totals[candidates[split]].astype(float)
        n_node = node_totals.sum(axis=1)
        np.add.at(importance, f, n_node * (gini(node_totals) - cost))

        left_ids = count + 2 * np.arange(split.size)
        right_ids = left_ids + 1
        feature[parents] = f
        threshold[parents] = cuts[f, b]
        left[parents] = left_ids
        right[parents] = right_ids
        right_counts = node_totals - left_counts
        value[left_ids] = left_counts / left_counts.sum(axis=1, keepdims=True)
        value[right_ids] = right_counts / right_counts.sum(axis=1, keepdims=True)
        count += 2 * split.size

        which = np.full(candidates.size, -1)
        which[split] = np.arange(split.size)
        j = which[g]
        routed, j = rows[j >= 0], j[j >= 0]
        go_left = codes[routed, f[j]] <= b[j]
        node_of[routed] = np.where(go_left, left_ids[j], right_ids[j])
        frontier = np.arange(left_ids[0], count)
        depth += 1

    total = importance.sum()
    return Tree(
        feature[:count].copy(),
        threshold[:count].copy(),
        left[:count].copy(),
        right[:count].copy(),
        value[:count].copy(),
        importance / total if total > 0 else importance,
    )


@dataclass
class ForestModel(Serializable):
    '''Bagged trees; prediction is the mean of per-tree leaf class distributions'''

    classes: List[str]
    params: ForestParams
    seed: int
    n_features: int
    trees: List[Tree] = field(default_factory=list)

    backend = 'forest'

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros((X.shape[0], len(self.classes)))
        for tree in self.trees:
            out += tree.predict_proba(X)
        return out / len(self.trees)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.classes)[np.argmax(self.scores(X), axis=1)]

    @property
    def importances(self) -> np.ndarray:
        '''Mean decrease in Gini impurity, normalized to sum to 1'''
        mean = np.mean([t.importance for t in self.trees], axis=0)
        total = mean.sum()
        return mean / total if total > 0 else mean

    @property
    def json(self) -> dict:
        return {
            'backend': self.backend,
            'classes': list(self.classes),
            'params': self.params.json,
            'seed': self.seed,
            'n_features': self.n_features,
            'trees': [t.json for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(
            classes=list(obj['classes']),
            params=ForestParams.from_json(obj['params']),
            seed=int(obj['seed']),
            n_features=int(obj['n_features']),
            trees=[Tree.from_json(t) for t in obj['trees']],
        )


def train_forest(
    X: np.ndarray, y: Sequence, params: Optional[ForestParams] = None, seed: int = 0
) -> ForestModel:
    '''Bootstrap one Gini tree per seed stream ``[seed, tree]``

    Features are binned once over all training rows. A single-class ``y``
    yields a constant model.
    '''
    params = params or ForestParams()
    X = np.asarray(X, dtype=float)
    classes, labels = np.unique(np.asarray(y), return_inverse=True)
    model = ForestModel([str(c) for c in classes], params, seed, X.shape[1])
    codes, cuts = quantize(X, params.max_bins)
    n = X.shape[0]
    for t in range(params.n_trees):
        rng = np.random.default_rng([seed, t])
        sample = rng.integers(0, n, size=n)
        model.trees.append(grow_tree(codes[sample], cuts, labels[sample], len(classes), params, rng))
    logger.debug(
        'forest: %d trees, %d classes, mean %.0f nodes',
        params.n_trees,
        len(classes),
        np.mean([t.node_count for t in model.trees]),
    )
    return model
