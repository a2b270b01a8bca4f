'''One-vs-rest linear hinge-loss classifier trained by stochastic subgradient'''

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..base import Serializable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarginParams(Serializable):
    lam: float = 1e-3
    epochs: int = 20

    def __post_init__(self) -> None:
        if self.lam <= 0 or self.epochs < 1:
            raise ValueError(f'invalid margin parameters: {self}')

    @property
    def json(self) -> dict:
        return {'lam': self.lam, 'epochs': self.epochs}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(float(obj['lam']), int(obj['epochs']))


@dataclass
class MarginModel(Serializable):
    '''Per-class weight rows and biases; prediction is the argmax score'''

    classes: List[str]
    weights: np.ndarray
    bias: np.ndarray
    params: MarginParams
    seed: int

    backend = 'margin'

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if len(self.classes) == 1:
            return np.ones((X.shape[0], 1))
        return X @ self.weights.T + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.classes)[np.argmax(self.scores(X), axis=1)]

    @property
    def json(self) -> dict:
        return {
            'backend': self.backend,
            'classes': list(self.classes),
            'weights': self.weights.tolist(),
            'bias': self.bias.tolist(),
            'params': self.params.json,
            'seed': self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(
            classes=list(obj['classes']),
            weights=np.asarray(obj['weights'], dtype=float),
            bias=np.asarray(obj['bias'], dtype=float),
            params=MarginParams.from_json(obj['params']),
            seed=int(obj['seed']),
        )


def _pegasos(X: np.ndarray, target: np.ndarray, lam: float, epochs: int, rng: np.random.Generator) -> np.ndarray:
    # constant column carries the bias inside the regularized weights
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    w = np.zeros(Xa.shape[1])
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(Xa.shape[0]):
            t += 1
            eta = 1.0 / (lam * t)
            violated = target[i] * (Xa[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * target[i] * Xa[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
    return w


def train_margin(X: np.ndarray, y: Sequence, params: Optional[MarginParams] = None, seed: int = 0) -> MarginModel:
    '''One hinge-loss model per class against the rest

    Each class draws its sample order from the stream ``[seed, class]`` so
    the result depends only on the data order and the seed.
    '''
    params = params or MarginParams()
    X = np.asarray(X, dtype=float)
    classes, codes = np.unique(np.asarray(y), return_inverse=True)
    labels = [str(c) for c in classes]
    if len(classes) == 1:
        return MarginModel(labels, np.zeros((1, X.shape[1])), np.zeros(1), params, seed)
    rows = []
    for c in range(len(classes)):
        target = np.where(codes == c, 1.0, -1.0)
        rows.append(_pegasos(X, target, params.lam, params.epochs, np.random.default_rng([seed, c])))
    w = np.stack(rows)
    logger.debug('margin: %d classes, %d samples, %d epochs', len(classes), X.shape[0], params.epochs)
    return MarginModel(labels, w[:, :-1], w[:, -1], params, seed)
