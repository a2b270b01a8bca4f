'''Fold execution: extract, fit per-fold corrections, train, vote, collect'''

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import dask
import numpy as np
import pandas as pd

from ..base import ExperimentError, SchemaError, SessionUnscorable
from ..classify.importance import feature_importance
from ..classify.two_stage import IDLE, TwoStageModel, train_two_stage, two_stage_infer
from ..config import RunConfig
from ..features import (
    GRID_SWEEP,
    META_COLUMNS,
    FeatureVector,
    SessionFeatures,
    assemble_session_windows,
    extract_session,
    feature_matrix,
    feature_names,
)
from ..frame_store import IDLE_LABEL, SessionManifest, list_sessions, load_manifest, load_session, window_session
from ..normalize import (
    NormalizationState,
    SignatureRatio,
    build_delta_table,
    build_headset_baseline,
    fit_wind_coefficient,
    signature_ratio,
    wind_samples,
)
from ..parallel import compute
from ..roi import frame_mask, mask_geometry, segment_classical
from .folds import Fold, FoldPlan, plan_for
from .metrics import MeanStd, classification_metrics
from .segmentation import seg_metrics

logger = logging.getLogger(__name__)

WINDOW_SWEEP = (10, 20, 30, 60, 90, 120)
ENVIRONMENT_BINS = 5
ACTIVE = 'active'
WINDOW_COLUMNS = ['session_id', 'window_start', 'truth', 'pred', 'stage1', 'ambient_c_mean', 'distance_cm_mean']
SESSION_COLUMNS = ['session_id', 'device_model', 'truth', 'pred', 'idle_votes', 'active_votes']


@dataclass
class DatasetIndex:
    '''Manifests and directories of every session in a dataset'''

    root: Path
    manifests: Dict[str, SessionManifest]
    paths: Dict[str, Path]

    @classmethod
    def scan(cls, dataset: Union[str, Path]) -> 'DatasetIndex':
        root = Path(dataset)
        manifests, paths = {}, {}
        for path in list_sessions(root):
            manifest = load_manifest(path / 'manifest.json')
            if manifest.session_id in manifests:
                raise SchemaError(f'duplicate session id {manifest.session_id!r} under {root}')
            manifests[manifest.session_id] = manifest
            paths[manifest.session_id] = path
        if not manifests:
            raise SchemaError(f'no sessions under {root}')
        logger.info('%s: %d sessions, devices %s', root, len(manifests), sorted({m.device_model for m in manifests.values()}))
        return cls(root, manifests, paths)

    @property
    def sessions(self) -> List[SessionManifest]:
        return [self.manifests[sid] for sid in sorted(self.manifests)]


def _extract_one(path: Path, config: RunConfig) -> SessionFeatures:
    return extract_session(load_session(path, config.tolerance_ms), config.grid_spec, config.segmenter)


def extract_dataset(
    index: DatasetIndex, config: RunConfig, session_ids: Optional[Sequence[str]] = None
) -> Dict[str, SessionFeatures]:
    '''Per-frame grid features for every requested session, in parallel'''
    ids = sorted(session_ids if session_ids is not None else index.manifests)
    tasks = [dask.delayed(_extract_one)(index.paths[sid], config) for sid in ids]
    return dict(zip(ids, compute(tasks, config.jobs)))


def session_vectors(
    session: SessionFeatures, config: RunConfig, corrections: Optional[NormalizationState] = None
) -> List[FeatureVector]:
    windows = window_session(session, config.window_s, config.stride)
    return assemble_session_windows(session, windows, config.lags, corrections)


def build_matrix(
    vectors: Sequence[FeatureVector], config: RunConfig
) -> Tuple[np.ndarray, pd.DataFrame, List[str]]:
    '''Feature matrix, metadata frame and feature names'''
    df = feature_matrix(vectors)
    names = list(vectors[0].names) if vectors else feature_names(config.grid, config.lags)
    if not vectors:
        return np.empty((0, len(names))), pd.DataFrame(columns=META_COLUMNS), names
    return df[names].to_numpy(dtype=float), df[META_COLUMNS].copy(), names


def fit_normalization(config: RunConfig, train: Sequence[SessionFeatures]) -> Optional[NormalizationState]:
    '''Estimate the enabled corrections from training sessions only

    Headset baselines cover the devices with idle sessions in ``train``; a
    test session of any other device raises ``BaselineMissing`` when its
    windows are corrected.
    '''
    flags = config.normalization
    if not any(flags.values()):
        return None
    state = NormalizationState(ambient=flags['ambient'])
    if flags['wind']:
        lag = max(config.lags)
        deltas: List[float] = []
        velocities: List[float] = []
        groups: List[str] = []
        for s in train:
            d, v = wind_samples(s, window_session(s, config.window_s, config.stride), lag)
            deltas.extend(d)
            velocities.extend(v)
            groups.extend([s.label] * len(d))
        state.wind = fit_wind_coefficient(deltas, velocities, groups)
    if flags['headset_baseline']:
        state.baselines = build_headset_baseline(train, ambient=flags['ambient'])
    if flags['delta_residual']:
        state.delta_table = build_delta_table(train, config.lags)
    return state


@dataclass
class FoldResult:
    '''Window rows hold session_id, window_start, truth, pred, stage1, ambient and distance means'''

    fold_id: str
    train_device: Optional[str]
    test_device: Optional[str]
    n_train_windows: int
    windows: pd.DataFrame
    sessions: pd.DataFrame
    importances: Optional[Dict[str, float]] = None
    unscorable: Tuple[str, ...] = ()


def fold_model(
    fold: Fold,
    sessions: Mapping[str, SessionFeatures],
    config: RunConfig,
    cached: Optional[Mapping[str, List[FeatureVector]]] = None,
) -> Tuple[TwoStageModel, Optional[NormalizationState], int]:
    '''Fit corrections and both stages on the fold's training and adaptation sessions'''
    train = [sessions[sid] for sid in fold.fit_sessions]
    corrections = fit_normalization(config, train)
    vectors: List[FeatureVector] = []
    for s in train:
        if corrections is None and cached is not None:
            vectors.extend(cached[s.session_id])
        else:
            vectors.extend(session_vectors(s, config, corrections))
    X, meta, names = build_matrix(vectors, config)
    model = train_two_stage(
        X,
        meta['label'].to_numpy(),
        names,
        backend=config.backend,
        seed=config.seed,
        k=config.k_features,
        two_stage=config.two_stage,
        forest=config.forest_params,
        margin=config.margin_params,
    )
    return model, corrections, X.shape[0]


def run_fold(
    fold: Fold,
    sessions: Mapping[str, SessionFeatures],
    config: RunConfig,
    cached: Optional[Mapping[str, List[FeatureVector]]] = None,
) -> FoldResult:
    model, corrections, n_train = fold_model(fold, sessions, config, cached)
    window_rows, session_rows, unscorable = [], [], []
    for sid in fold.test:
        s = sessions[sid]
        if corrections is None and cached is not None:
            vectors = cached[sid]
        else:
            vectors = session_vectors(s, config, corrections)
        X, meta, names = build_matrix(vectors, config)
        try:
            prediction = two_stage_infer(X, model, sid, meta['window_start'].tolist())
        except SessionUnscorable as err:
            logger.warning('fold %s: %s', fold.fold_id, err)
            unscorable.append(sid)
            continue
        ambient = X[:, names.index('ambient_c_mean')]
        distance = X[:, names.index('distance_cm_mean')]
        for k, record in enumerate(prediction.records):
            window_rows.append(
                {
                    'session_id': sid,
                    'window_start': record.window_start,
                    'truth': s.label,
                    'pred': record.window_label,
                    'stage1': record.stage1,
                    'ambient_c_mean': float(ambient[k]),
                    'distance_cm_mean': float(distance[k]),
                }
            )
        session_rows.append(
            {
                'session_id': sid,
                'device_model': s.manifest.device_model,
                'truth': s.label,
                'pred': prediction.label,
                'idle_votes': prediction.idle_votes,
                'active_votes': prediction.active_votes,
            }
        )
    importances = None
    stage = model.stage2 if model.stage2 is not None else model.stage1
    if config.backend == 'forest' and stage is not None:
        importances = feature_importance(stage, model.selected_names)
    logger.info('fold %s: %d test windows over %d sessions', fold.fold_id, len(window_rows), len(session_rows))
    return FoldResult(
        fold.fold_id,
        fold.train_device,
        fold.test_device,
        n_train,
        pd.DataFrame(window_rows, columns=WINDOW_COLUMNS),
        pd.DataFrame(session_rows, columns=SESSION_COLUMNS),
        importances,
        tuple(unscorable),
    )


def _guarded_fold(
    fold: Fold,
    sessions: Mapping[str, SessionFeatures],
    config: RunConfig,
    cached: Optional[Mapping[str, List[FeatureVector]]],
) -> FoldResult:
    try:
        return run_fold(fold, sessions, config, cached)
    except Exception as err:
        raise ExperimentError(f'fold {fold.fold_id} failed: {type(err).__name__}: {err}') from err


@dataclass
class ExperimentResult:
    config: RunConfig
    plan: FoldPlan
    folds: List[FoldResult]
    signature: Optional[SignatureRatio] = None
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def windows(self) -> pd.DataFrame:
        frames = [f.windows.assign(fold_id=f.fold_id) for f in self.folds]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()

    @property
    def sessions(self) -> pd.DataFrame:
        frames = [f.sessions.assign(fold_id=f.fold_id) for f in self.folds]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def dataset_signature(
    vectors: Mapping[str, List[FeatureVector]], manifests: Mapping[str, SessionManifest]
) -> Optional[SignatureRatio]:
    '''Device-vs-app similarity ratio over imputed, standardized window vectors'''
    devices = {manifests[sid].device_model for sid in vectors}
    apps = {manifests[sid].app_label for sid in vectors}
    if len(devices) < 2 or len(apps) < 2:
        return None
    rows = [(sid, v) for sid in sorted(vectors) for v in vectors[sid]]
    if not rows:
        return None
    X = np.stack([v.values for _, v in rows])
    X = np.where(np.isfinite(X), X, pd.DataFrame(X).median(axis=0).fillna(0.0).to_numpy())
    std = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)
    groups: Dict[Tuple[str, str], List[np.ndarray]] = {}
    for (sid, _), x in zip(rows, X):
        key = (manifests[sid].app_label, manifests[sid].device_model)
        groups.setdefault(key, []).append(x)
    return signature_ratio({k: np.stack(v) for k, v in groups.items()})


def run_experiment(
    index: DatasetIndex,
    plan: FoldPlan,
    config: RunConfig,
    features: Optional[Mapping[str, SessionFeatures]] = None,
) -> ExperimentResult:
    '''Run every fold of ``plan``; any hard fold failure aborts with the fold id

    Raises
    ------
    ExperimentError
    '''
    needed = sorted({sid for f in plan.folds for sid in f.fit_sessions + f.test})
    if features is None:
        features = extract_dataset(index, config, needed)
    sessions = {sid: features[sid] for sid in needed}

    cached = None
    if not any(config.normalization.values()):
        cached = {sid: session_vectors(sessions[sid], config) for sid in needed}

    tasks = []
    for fold in plan.folds:
        fold_sessions = {sid: sessions[sid] for sid in fold.fit_sessions + fold.test}
        fold_cache = None if cached is None else {sid: cached[sid] for sid in fold_sessions}
        tasks.append(dask.delayed(_guarded_fold)(fold, fold_sessions, config, fold_cache))
    folds = list(compute(tasks, config.jobs))
    signature = dataset_signature(cached, index.manifests) if cached is not None else None
    return ExperimentResult(config, plan, folds, signature)


def run(config: RunConfig, index: Optional[DatasetIndex] = None, features=None) -> ExperimentResult:
    '''Plan and run the configured protocol on the configured dataset'''
    if index is None:
        if config.dataset is None:
            raise ExperimentError('no dataset configured')
        index = DatasetIndex.scan(config.dataset)
    plan = plan_for(config.protocol, index.sessions, config.few_shot_count, config.seed)
    logger.info('%s: %d folds', plan.protocol, len(plan))
    return run_experiment(index, plan, config, features)


def window_metrics(windows: pd.DataFrame, active_only: bool = False):
    if active_only:
        windows = windows[windows['truth'] != IDLE_LABEL]
    return classification_metrics(windows['truth'].tolist(), windows['pred'].tolist())


def activity_labels(windows: pd.DataFrame) -> Tuple[List[str], List[str]]:
    '''Idle/active truth and stage-1 verdicts; single-stage runs derive the verdict from the label'''
    truth = [IDLE if t == IDLE_LABEL else ACTIVE for t in windows['truth']]
    pred = [
        s if isinstance(s, str) else (IDLE if p == IDLE_LABEL else ACTIVE)
        for s, p in zip(windows['stage1'], windows['pred'])
    ]
    return truth, pred


def activity_report(result: ExperimentResult) -> dict:
    '''Window-level idle/active recall and precision, pooled and across folds'''
    per_fold: Dict[str, Dict[str, List[float]]] = {c: {'recall': [], 'precision': []} for c in (IDLE, ACTIVE)}
    for fold in result.folds:
        if fold.windows.empty:
            continue
        truth, pred = activity_labels(fold.windows)
        m = classification_metrics(truth, pred, (IDLE, ACTIVE))
        for c in (IDLE, ACTIVE):
            if m.support[c]:
                per_fold[c]['recall'].append(m.recall[c])
            if c in pred:
                per_fold[c]['precision'].append(m.precision[c])
    out: dict = {'per_fold': {c: {k: MeanStd.of(v).json for k, v in d.items()} for c, d in per_fold.items()}}
    windows = result.windows
    if not windows.empty:
        truth, pred = activity_labels(windows)
        out['pooled'] = classification_metrics(truth, pred, (IDLE, ACTIVE)).json
    return out


def _bins(values: np.ndarray, correct: np.ndarray, bins: int) -> List[dict]:
    ok = np.isfinite(values)
    values, correct = values[ok], correct[ok]
    if values.size == 0:
        return []
    lo, hi = float(values.min()), float(values.max())
    edges = np.linspace(lo, hi, bins + 1) if hi > lo else np.array([lo, hi])
    which = np.clip(np.searchsorted(edges, values, side='right') - 1, 0, len(edges) - 2)
    rows = []
    for b in range(len(edges) - 1):
        sel = which == b
        rows.append(
            {
                'lo': float(edges[b]),
                'hi': float(edges[b + 1]),
                'windows': int(sel.sum()),
                'accuracy': float(correct[sel].mean()) if sel.any() else None,
            }
        )
    return rows


def environment_breakdown(result: ExperimentResult, bins: int = ENVIRONMENT_BINS) -> dict:
    '''Window accuracy in equal-width bins of ambient temperature and camera distance'''
    windows = result.windows
    if windows.empty:
        return {'ambient_c': [], 'distance_cm': []}
    correct = (windows['truth'] == windows['pred']).to_numpy()
    return {
        'ambient_c': _bins(windows['ambient_c_mean'].to_numpy(dtype=float), correct, bins),
        'distance_cm': _bins(windows['distance_cm_mean'].to_numpy(dtype=float), correct, bins),
    }


def cross_device_matrix(result: ExperimentResult) -> dict:
    '''Window accuracy per (train device, test device) cell'''
    cells: Dict[Tuple[str, str], List[pd.DataFrame]] = {}
    for fold in result.folds:
        if fold.train_device is None or fold.test_device is None:
            continue
        cells.setdefault((fold.train_device, fold.test_device), []).append(fold.windows)
    devices = sorted({d for pair in cells for d in pair})
    matrix = []
    for src in devices:
        row = []
        for dst in devices:
            frames = [f for f in cells.get((src, dst), []) if not f.empty]
            if not frames:
                row.append(None)
                continue
            w = pd.concat(frames)
            row.append(float((w['truth'] == w['pred']).mean()))
        matrix.append(row)
    return {'devices': devices, 'accuracy': matrix}


def _summary(result: ExperimentResult) -> dict:
    windows = result.windows
    sessions = result.sessions
    row: dict = {'window_accuracy': None, 'window_weighted_f1': None, 'session_accuracy': None, 'per_class': {}}
    if not windows.empty:
        m = window_metrics(windows)
        row.update(window_accuracy=m.accuracy, window_weighted_f1=m.weighted_f1, per_class=m.recall)
    if not sessions.empty:
        row['session_accuracy'] = classification_metrics(sessions['truth'].tolist(), sessions['pred'].tolist()).accuracy
    return row


def sweep(
    config: RunConfig,
    grids: Sequence[int] = GRID_SWEEP,
    windows: Sequence[int] = WINDOW_SWEEP,
    index: Optional[DatasetIndex] = None,
) -> dict:
    '''Grid-resolution and window-length ablations

    The grid sweep holds the window fixed and the window sweep holds the grid
    fixed; per-class accuracy is reported for every grid size.
    '''
    if index is None:
        index = DatasetIndex.scan(config.dataset)
    grid_rows = []
    base_features = None
    for n in grids:
        cfg = config.updated(grid=n)
        features = extract_dataset(index, cfg)
        if n == config.grid:
            base_features = features
        grid_rows.append({'n': n, **_summary(run(cfg, index, features))})
    if base_features is None:
        base_features = extract_dataset(index, config)
    window_rows = []
    for w in windows:
        cfg = config.updated(window_s=w, stride_s=None)
        row = _summary(run(cfg, index, base_features))
        row.pop('per_class')
        window_rows.append({'window_s': w, **row})
    return {'grid': grid_rows, 'window': window_rows}


def _finite_mean(values: Sequence[float]) -> Optional[float]:
    finite = [v for v in values if np.isfinite(v)]
    return float(np.mean(finite)) if finite else None


def segmentation_report(index: DatasetIndex, config: RunConfig) -> dict:
    '''Score the classical segmenter against ingested masks, per session'''
    out = {}
    for sid in sorted(index.manifests):
        rec = load_session(index.paths[sid], config.tolerance_ms)
        valid = 0
        scores = []
        for k, frame in enumerate(rec.frames):
            if k in rec.gaps:
                continue
            valid += int(mask_geometry(frame_mask(rec, k, config.segmenter)).valid)
            if k in rec.masks:
                sample = rec.env[k]
                ambient = None if sample is None else sample.ambient_c
                predicted = segment_classical(frame, ambient, config.segmenter)
                scores.append(seg_metrics(predicted.bits, rec.masks[k]))
        entry: dict = {'frames': len(rec), 'valid_fraction': valid / len(rec) if len(rec) else 0.0}
        if scores:
            entry.update(
                scored_frames=len(scores),
                dice=float(np.mean([s.dice for s in scores])),
                iou=float(np.mean([s.iou for s in scores])),
                hd95=_finite_mean([s.hd95 for s in scores]),
                asd=_finite_mean([s.asd for s in scores]),
                unbounded=sum(1 for s in scores if not np.isfinite(s.hd95)),
            )
        out[sid] = entry
    return out
