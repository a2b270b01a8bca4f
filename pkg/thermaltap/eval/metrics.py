'''Confusion matrices, per-class precision/recall/F1 and fold summaries'''

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..base import MetricsError, Serializable


@dataclass(frozen=True)
class ConfusionMatrix(Serializable):
    '''Counts with rows as truth and columns as prediction'''

    classes: List[str]
    counts: np.ndarray

    @classmethod
    def from_labels(
        cls, truth: Sequence[str], pred: Sequence[str], classes: Optional[Sequence[str]] = None
    ) -> 'ConfusionMatrix':
        if len(truth) != len(pred):
            raise MetricsError(f'{len(truth)} truth labels but {len(pred)} predictions')
        labels = sorted(set(truth) | set(pred) | set(classes or ()))
        index = {c: i for i, c in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=int)
        np.add.at(counts, ([index[t] for t in truth], [index[p] for p in pred]), 1)
        return cls(labels, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        labels = sorted(set(self.classes) | set(other.classes))
        out = np.zeros((len(labels), len(labels)), dtype=int)
        for cm in (self, other):
            pos = [labels.index(c) for c in cm.classes]
            out[np.ix_(pos, pos)] += cm.counts
        return ConfusionMatrix(labels, out)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.counts,
            index=pd.Index(self.classes, name='truth'),
            columns=pd.Index(self.classes, name='predicted'),
        )

    @property
    def json(self) -> dict:
        return {'classes': list(self.classes), 'counts': self.counts.tolist()}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(list(obj['classes']), np.asarray(obj['counts'], dtype=int))


@dataclass(frozen=True)
class ClassificationMetrics(Serializable):
    classes: List[str]
    precision: Dict[str, float]
    recall: Dict[str, float]
    f1: Dict[str, float]
    support: Dict[str, int]
    accuracy: float
    weighted_f1: float
    confusion: ConfusionMatrix

    @property
    def json(self) -> dict:
        return {
            'accuracy': self.accuracy,
            'weighted_f1': self.weighted_f1,
            'per_class': {
                c: {
                    'precision': self.precision[c],
                    'recall': self.recall[c],
                    'f1': self.f1[c],
                    'support': self.support[c],
                }
                for c in self.classes
            },
            'confusion': self.confusion.json,
        }

    @classmethod
    def from_json(cls, obj: dict):
        confusion = ConfusionMatrix.from_json(obj['confusion'])
        return from_confusion(confusion)


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den else 0.0


def from_confusion(cm: ConfusionMatrix) -> ClassificationMetrics:
    if cm.total == 0:
        raise MetricsError('no predictions to score')
    tp = np.diag(cm.counts).astype(float)
    predicted = cm.counts.sum(axis=0)
    support = cm.counts.sum(axis=1)
    precision, recall, f1 = {}, {}, {}
    for i, c in enumerate(cm.classes):
        precision[c] = _ratio(tp[i], predicted[i])
        recall[c] = _ratio(tp[i], support[i])
        f1[c] = _ratio(2 * precision[c] * recall[c], precision[c] + recall[c])
    weighted = _ratio(sum(f1[c] * support[i] for i, c in enumerate(cm.classes)), support.sum())
    return ClassificationMetrics(
        list(cm.classes),
        precision,
        recall,
        f1,
        {c: int(support[i]) for i, c in enumerate(cm.classes)},
        cm.accuracy,
        weighted,
        cm,
    )


def classification_metrics(
    truth: Sequence[str], pred: Sequence[str], classes: Optional[Sequence[str]] = None
) -> ClassificationMetrics:
    '''Per-class precision/recall/F1, accuracy and support-weighted F1

    A zero denominator gives 0. Classes with no support do not enter the
    weighted mean.

    Raises
    ------
    MetricsError
        Empty or unequal-length inputs.
    '''
    if len(truth) == 0:
        raise MetricsError('no predictions to score')
    return from_confusion(ConfusionMatrix.from_labels(truth, pred, classes))


@dataclass(frozen=True)
class MeanStd:
    '''Across-fold mean and population standard deviation'''

    mean: float
    std: float
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> 'MeanStd':
        v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
        if v.size == 0:
            return cls(float('nan'), float('nan'), 0)
        return cls(float(v.mean()), float(v.std()), int(v.size))

    @property
    def json(self) -> dict:
        return {
            'mean': None if not np.isfinite(self.mean) else self.mean,
            'std': None if not np.isfinite(self.std) else self.std,
            'folds': self.n,
        }
