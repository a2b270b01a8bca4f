'''Fit-on-train preprocessing: impute, raw-variance filter, standardize, ANOVA selection'''

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..base import GroupError, PreprocessError, Serializable

logger = logging.getLogger(__name__)

# 40 mK NETD expressed as a variance in °C²
VARIANCE_THRESHOLD = 0.0016
MAX_SELECTED = 512


def _group_sums(X: np.ndarray, labels: Sequence) -> tuple:
    y = np.asarray(labels)
    groups, inverse = np.unique(y, return_inverse=True)
    if len(groups) < 2:
        raise GroupError(f'ANOVA needs >= 2 groups, got {len(groups)}')
    onehot = np.eye(len(groups))[inverse]  # (samples, groups)
    counts = onehot.sum(axis=0)
    means = (onehot.T @ X) / counts[:, None]
    return onehot, counts, means


def anova_f_scores(X: np.ndarray, labels: Sequence) -> np.ndarray:
    '''One-way ANOVA F per column

    F is 0 when the between-group mean square is 0 and ``math.inf`` when only
    the within-group mean square is 0.

    Raises
    ------
    GroupError
        Fewer than two label groups.
    '''
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    onehot, counts, means = _group_sums(X, labels)
    n, k = X.shape[0], len(counts)
    grand = X.mean(axis=0)
    ssb = (counts[:, None] * (means - grand) ** 2).sum(axis=0)
    ssw = ((X - onehot @ means) ** 2).sum(axis=0)
    # rounding noise on identical group means
    scale = np.maximum(ssb + ssw, 1.0)
    ssb = np.where(ssb <= 1e-12 * scale, 0.0, ssb)
    ssw = np.where(ssw <= 1e-12 * scale, 0.0, ssw)
    msb = ssb / (k - 1)
    msw = ssw / (n - k) if n > k else np.zeros_like(ssw)
    with np.errstate(divide='ignore', invalid='ignore'):
        f = msb / msw
    f = np.where(msb == 0, 0.0, f)
    f = np.where((msb > 0) & (msw == 0), math.inf, f)
    return f


def anova_f(column: Sequence[float], labels: Sequence) -> float:
    return float(anova_f_scores(np.asarray(column, dtype=float)[:, None], labels)[0])


@dataclass
class PreprocessState(Serializable):
    '''Frozen training-split transform

    Attributes
    ----------
    medians : np.ndarray
        Per-feature impute values over all input features.
    keep : np.ndarray
        Indices of features passing the raw variance filter.
    mean, std : np.ndarray
        Standardization over ``keep``.
    selected : np.ndarray
        Positions within ``keep`` of the top-K ANOVA features, ascending.
    '''

    medians: np.ndarray
    keep: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    selected: np.ndarray
    f_scores: np.ndarray
    threshold: float = VARIANCE_THRESHOLD

    @property
    def k(self) -> int:
        return int(len(self.selected))

    @property
    def n_inputs(self) -> int:
        return int(len(self.medians))

    @property
    def input_indices(self) -> np.ndarray:
        '''Original feature index of every output column'''
        return self.keep[self.selected]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise PreprocessError(f'expected {self.n_inputs} features, got shape {X.shape}')
        imputed = np.where(np.isfinite(X), X, self.medians)
        cols = self.input_indices
        return (imputed[:, cols] - self.mean[self.selected]) / self.std[self.selected]

    @property
    def json(self) -> dict:
        return {
            'medians': self.medians.tolist(),
            'keep': self.keep.tolist(),
            'mean': self.mean.tolist(),
            'std': self.std.tolist(),
            'selected': self.selected.tolist(),
            'f_scores': [None if not math.isfinite(f) else f for f in self.f_scores.tolist()],
            'threshold': self.threshold,
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(
            medians=np.asarray(obj['medians'], dtype=float),
            keep=np.asarray(obj['keep'], dtype=int),
            mean=np.asarray(obj['mean'], dtype=float),
            std=np.asarray(obj['std'], dtype=float),
            selected=np.asarray(obj['selected'], dtype=int),
            f_scores=np.asarray([math.inf if f is None else f for f in obj['f_scores']], dtype=float),
            threshold=float(obj['threshold']),
        )


def rank_features(f_scores: np.ndarray) -> np.ndarray:
    '''Descending F order, +inf first, ties by lower index'''
    return np.argsort(-np.nan_to_num(f_scores, nan=0.0, posinf=np.finfo(float).max), kind='stable')


def fit_preprocess(
    X: np.ndarray,
    labels: Sequence,
    k: Optional[int] = None,
    threshold: float = VARIANCE_THRESHOLD,
) -> PreprocessState:
    '''Fit impute → raw variance filter → standardize → ANOVA top-K on training rows only

    Parameters
    ----------
    X : np.ndarray
        (windows, features) training matrix with NaN for missing entries.
    labels : sequence
        Training labels used for ANOVA ranking.
    k : int, optional
        Features to keep; defaults to ``min(512, survivors)``.
    threshold : float
        Minimum raw variance in °C².

    Raises
    ------
    PreprocessError
        Empty matrix or every feature filtered out.
    '''
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise PreprocessError(f'training matrix must be nonempty 2-D, got shape {X.shape}')

    medians = pd.DataFrame(X).median(axis=0, skipna=True).fillna(0.0).to_numpy()
    imputed = np.where(np.isfinite(X), X, medians)
    variance = imputed.var(axis=0)
    keep = np.flatnonzero(variance >= threshold)
    if keep.size == 0:
        raise PreprocessError(f'all {X.shape[1]} features below variance threshold {threshold}')

    mean = imputed[:, keep].mean(axis=0)
    std = imputed[:, keep].std(axis=0)
    Z = (imputed[:, keep] - mean) / std

    k_max = min(MAX_SELECTED, keep.size) if k is None else k
    if k_max > keep.size:
        logger.warning('k=%d exceeds %d surviving features, clamping', k_max, keep.size)
        k_max = keep.size
    try:
        f_scores = anova_f_scores(Z, labels)
        order = rank_features(f_scores)
    except GroupError:
        # single-class training split: keep feature order
        f_scores = np.zeros(keep.size)
        order = np.arange(keep.size)
    selected = np.sort(order[:k_max])
    logger.info(
        'preprocess: %d features, %d pass variance filter, %d selected', X.shape[1], keep.size, selected.size
    )
    return PreprocessState(medians, keep, mean, std, selected, f_scores, threshold)
