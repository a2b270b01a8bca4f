'''Idle/active gating followed by app recognition, with session-level voting'''

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..base import ConfigError, ModelVersionError, Serializable, SessionUnscorable
from ..documents import validate_document
from ..frame_store import IDLE_LABEL
from .forest import ForestModel, ForestParams, train_forest
from .margin import MarginModel, MarginParams, train_margin
from .preprocess import PreprocessState, fit_preprocess

logger = logging.getLogger(__name__)

MODEL_VERSION = 'thermaltap-model/1'
IDLE = 'idle'
ACTIVE = 'active'

Classifier = Union[ForestModel, MarginModel]
BACKENDS = {'forest': ForestModel, 'margin': MarginModel}


def train_backend(
    backend: str,
    X: np.ndarray,
    y: Sequence,
    seed: int,
    forest: Optional[ForestParams] = None,
    margin: Optional[MarginParams] = None,
) -> Classifier:
    if backend == 'forest':
        return train_forest(X, y, forest, seed)
    if backend == 'margin':
        return train_margin(X, y, margin, seed)
    raise ConfigError(f'unknown backend {backend!r}')


def classifier_from_json(obj: Optional[dict]) -> Optional[Classifier]:
    if obj is None:
        return None
    try:
        return BACKENDS[obj['backend']].from_json(obj)
    except KeyError:
        raise ConfigError(f'unknown backend {obj.get("backend")!r}') from None


@dataclass
class TwoStageModel(Serializable):
    '''Shared preprocessing plus a stage-1 idle/active model and a stage-2 app model

    With ``two_stage`` false, ``stage1`` is None and ``stage2`` covers every
    label including the idle one.
    '''

    preprocess: PreprocessState
    stage1: Optional[Classifier]
    stage2: Optional[Classifier]
    feature_names: List[str] = field(default_factory=list)
    two_stage: bool = True
    version: str = MODEL_VERSION

    def __post_init__(self) -> None:
        if self.two_stage and self.stage2 is not None and IDLE_LABEL in self.stage2.classes:
            raise ValueError(f'stage-2 labels must exclude {IDLE_LABEL!r}')

    @property
    def selected_names(self) -> List[str]:
        return [self.feature_names[i] for i in self.preprocess.input_indices]

    @property
    def json(self) -> dict:
        return {
            'version': self.version,
            'two_stage': self.two_stage,
            'feature_names': list(self.feature_names),
            'preprocess': self.preprocess.json,
            'stage1': None if self.stage1 is None else self.stage1.json,
            'stage2': None if self.stage2 is None else self.stage2.json,
        }

    @classmethod
    def from_json(cls, obj: dict):
        validate_document(obj, 'model')
        if obj['version'] != MODEL_VERSION:
            raise ModelVersionError(f'model version {obj["version"]!r} != {MODEL_VERSION!r}')
        return cls(
            preprocess=PreprocessState.from_json(obj['preprocess']),
            stage1=classifier_from_json(obj['stage1']),
            stage2=classifier_from_json(obj['stage2']),
            feature_names=list(obj.get('feature_names', [])),
            two_stage=bool(obj.get('two_stage', True)),
            version=obj['version'],
        )


def train_two_stage(
    X: np.ndarray,
    labels: Sequence[str],
    feature_names: Sequence[str] = (),
    backend: str = 'forest',
    seed: int = 0,
    k: Optional[int] = None,
    two_stage: bool = True,
    forest: Optional[ForestParams] = None,
    margin: Optional[MarginParams] = None,
) -> TwoStageModel:
    '''Fit the shared preprocessing, then stage 1 on idle/active and stage 2 on active windows'''
    y = np.asarray(labels)
    state = fit_preprocess(X, y, k)
    Z = state.transform(X)
    names = list(feature_names) or [f'f{i}' for i in range(np.shape(X)[1])]
    if not two_stage:
        flat = train_backend(backend, Z, y, seed, forest, margin)
        return TwoStageModel(state, None, flat, names, two_stage=False)

    gate = np.where(y == IDLE_LABEL, IDLE, ACTIVE)
    stage1 = train_backend(backend, Z, gate, seed, forest, margin)
    active = y != IDLE_LABEL
    stage2 = train_backend(backend, Z[active], y[active], seed + 1, forest, margin) if active.any() else None
    logger.info(
        'two-stage model: %d idle / %d active training windows, %d apps',
        int((~active).sum()),
        int(active.sum()),
        0 if stage2 is None else len(stage2.classes),
    )
    return TwoStageModel(state, stage1, stage2, names)


@dataclass(frozen=True)
class PredictionRecord:
    '''One window's verdicts; stage-2 fields are empty when the session is idle'''

    session_id: str
    window_start: int
    stage1: Optional[str]
    stage2: Optional[str]
    scores: Dict[str, float]
    window_label: str
    session_label: str


@dataclass(frozen=True)
class SessionPrediction:
    session_id: str
    label: str
    idle_votes: int
    active_votes: int
    records: Tuple[PredictionRecord, ...]


def plurality(labels: Sequence[str], classes: Sequence[str], scores: np.ndarray) -> str:
    '''Most frequent label; ties by higher mean score, then label order'''
    counts = Counter(labels)
    top = max(counts.values())
    tied = [c for c in counts if counts[c] == top]
    if len(tied) == 1:
        return tied[0]
    mean = scores.mean(axis=0)
    index = {c: i for i, c in enumerate(classes)}
    return sorted(tied, key=lambda c: (-mean[index[c]], c))[0]


def _records(
    session_id: str,
    starts: Sequence[int],
    stage1: Sequence[Optional[str]],
    stage2: Optional[Sequence[str]],
    scores: Optional[np.ndarray],
    classes: Sequence[str],
    window_labels: Sequence[str],
    session_label: str,
) -> Tuple[PredictionRecord, ...]:
    out = []
    for w, start in enumerate(starts):
        out.append(
            PredictionRecord(
                session_id,
                int(start),
                stage1[w],
                None if stage2 is None else str(stage2[w]),
                {} if scores is None else {c: float(s) for c, s in zip(classes, scores[w])},
                window_labels[w],
                session_label,
            )
        )
    return tuple(out)


def two_stage_infer(
    X: np.ndarray,
    model: TwoStageModel,
    session_id: str = '',
    window_starts: Optional[Sequence[int]] = None,
) -> SessionPrediction:
    '''Vote one session's windows through the model

    The session is idle iff idle votes outnumber active votes. Otherwise
    stage 2 labels every window and the session takes the plurality label.

    Raises
    ------
    SessionUnscorable
        No surviving windows.
    '''
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SessionUnscorable(f'session {session_id!r} has no surviving windows')
    if not model.two_stage:
        return flat_infer(X, model, session_id, window_starts)
    starts = list(window_starts) if window_starts is not None else list(range(X.shape[0]))
    Z = model.preprocess.transform(X)

    gate = [str(v) for v in model.stage1.predict(Z)]
    idle_votes = gate.count(IDLE)
    active_votes = len(gate) - idle_votes
    if idle_votes > active_votes or model.stage2 is None:
        labels = [IDLE_LABEL] * len(gate)
        records = _records(session_id, starts, gate, None, None, [], labels, IDLE_LABEL)
        return SessionPrediction(session_id, IDLE_LABEL, idle_votes, active_votes, records)

    scores = model.stage2.scores(Z)
    apps = [str(v) for v in np.asarray(model.stage2.classes)[np.argmax(scores, axis=1)]]
    label = plurality(apps, model.stage2.classes, scores)
    window_labels = [IDLE_LABEL if g == IDLE else a for g, a in zip(gate, apps)]
    records = _records(session_id, starts, gate, apps, scores, model.stage2.classes, window_labels, label)
    return SessionPrediction(session_id, label, idle_votes, active_votes, records)


def flat_infer(
    X: np.ndarray,
    model: TwoStageModel,
    session_id: str = '',
    window_starts: Optional[Sequence[int]] = None,
) -> SessionPrediction:
    '''Single-stage plurality over every label, idle included'''
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SessionUnscorable(f'session {session_id!r} has no surviving windows')
    starts = list(window_starts) if window_starts is not None else list(range(X.shape[0]))
    Z = model.preprocess.transform(X)
    scores = model.stage2.scores(Z)
    labels = [str(v) for v in np.asarray(model.stage2.classes)[np.argmax(scores, axis=1)]]
    label = plurality(labels, model.stage2.classes, scores)
    idle_votes = labels.count(IDLE_LABEL)
    records = _records(
        session_id, starts, [None] * len(labels), labels, scores, model.stage2.classes, labels, label
    )
    return SessionPrediction(session_id, label, idle_votes, len(labels) - idle_votes, records)


def predict_sessions(model: TwoStageModel, X: np.ndarray, meta: pd.DataFrame) -> List[SessionPrediction]:
    '''Score every session in a feature matrix; ``meta`` holds session_id and window_start'''
    out = []
    meta = meta.reset_index(drop=True)
    for session_id, rows in meta.groupby('session_id', sort=True):
        idx = rows.index.to_numpy()
        out.append(two_stage_infer(X[idx], model, str(session_id), rows['window_start'].tolist()))
    return out


def save_model(model: TwoStageModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(model.to_json(indent=2, sort_keys=True))
    return path


def load_model(path: Union[str, Path]) -> TwoStageModel:
    '''Load a model container, refusing other container versions'''
    return TwoStageModel.from_json(json.loads(Path(path).read_text()))
