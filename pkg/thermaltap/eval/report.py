'''report.json assembly plus CSV tables and SVG plots rendered from it'''

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .. import __version__  # noqa: E402
from ..classify.importance import map_to_grid  # noqa: E402
from ..documents import validate_document  # noqa: E402
from .experiment import (  # noqa: E402
    ExperimentResult,
    activity_report,
    cross_device_matrix,
    environment_breakdown,
    window_metrics,
)
from .metrics import ConfusionMatrix, MeanStd, classification_metrics  # noqa: E402

logger = logging.getLogger(__name__)

PathT = Union[str, Path]
REPORT_SCHEMA_VERSION = 1
REPORT_NAME = 'report.json'

# identical output for identical reports
plt.rcParams['svg.hashsalt'] = 'thermaltap'
plt.rcParams['svg.fonttype'] = 'none'
_SVG_METADATA = {'Date': None, 'Creator': None}


def _finite(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def _fold_row(fold) -> dict:
    row: dict = {
        'fold_id': fold.fold_id,
        'train_device': fold.train_device,
        'test_device': fold.test_device,
        'train_windows': fold.n_train_windows,
        'test_windows': int(len(fold.windows)),
        'test_sessions': fold.sessions['session_id'].tolist(),
        'unscorable': list(fold.unscorable),
        'window_accuracy': None,
        'window_weighted_f1': None,
        'session_accuracy': None,
    }
    if not fold.windows.empty:
        m = window_metrics(fold.windows)
        row['window_accuracy'] = m.accuracy
        row['window_weighted_f1'] = m.weighted_f1
    if not fold.sessions.empty:
        row['session_accuracy'] = float((fold.sessions['truth'] == fold.sessions['pred']).mean())
    return row


def _importance_block(result: ExperimentResult) -> Optional[dict]:
    maps = [f.importances for f in result.folds if f.importances]
    if not maps:
        return None
    names = sorted({name for m in maps for name in m})
    mean = {name: float(np.mean([m.get(name, 0.0) for m in maps])) for name in names}
    grid = map_to_grid(mean, result.config.grid)
    top = sorted(mean, key=lambda k: (-mean[k], k))[:20]
    return {
        'n': result.config.grid,
        'grid': grid.values.tolist(),
        'top': grid.top.tolist(),
        'bottom': grid.bottom.tolist(),
        'top_features': [{'name': k, 'importance': mean[k]} for k in top],
    }


def build_report(result: ExperimentResult) -> dict:
    '''Machine-readable summary; no wall-clock content so reruns are byte-identical'''
    folds = [_fold_row(f) for f in result.folds]
    windows = result.windows
    sessions = result.sessions
    report: dict = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'toolkit_version': __version__,
        'config': result.config.json,
        'protocol': result.plan.protocol,
        'folds': folds,
        'window': {
            'per_fold': {
                'accuracy': MeanStd.of([f['window_accuracy'] for f in folds]).json,
                'weighted_f1': MeanStd.of([f['window_weighted_f1'] for f in folds]).json,
            }
        },
        'session': {'per_fold': {'accuracy': MeanStd.of([f['session_accuracy'] for f in folds]).json}},
    }
    if not windows.empty:
        report['window']['pooled'] = window_metrics(windows).json
        active = windows[windows['truth'] != 'home']
        if not active.empty:
            report['window']['active'] = window_metrics(active).json
        report['activity'] = activity_report(result)
        report['environment'] = environment_breakdown(result)
    if not sessions.empty:
        report['session']['pooled'] = classification_metrics(
            sessions['truth'].tolist(), sessions['pred'].tolist()
        ).json
    importance = _importance_block(result)
    if importance is not None:
        report['importance'] = importance
    if result.plan.protocol == 'cross_device':
        report['cross_device'] = cross_device_matrix(result)
    if result.signature is not None:
        s = result.signature
        report['signature_ratio'] = {
            'sim_app': _finite(s.sim_app),
            'sim_dev': _finite(s.sim_dev),
            'ratio': None if s.ratio is None else _finite(s.ratio),
        }
    report.update(result.extra)
    validate_document(report, 'report')
    return report


def build_sweep_report(config, rows: Dict[str, List[dict]]) -> dict:
    '''Report document for grid and window ablations; carries no folds of its own'''
    report = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'toolkit_version': __version__,
        'config': config.json,
        'protocol': config.protocol,
        'folds': [],
        'sweep': rows,
    }
    validate_document(report, 'report')
    return report


def write_json(obj: dict, path: PathT) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + '\n')
    return path


def write_predictions(result: ExperimentResult, out: PathT) -> List[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / 'windows.csv', out / 'sessions.csv']
    result.windows.to_csv(paths[0], index=False, float_format='%.6g')
    result.sessions.to_csv(paths[1], index=False)
    return paths


def _per_class_frame(block: dict) -> pd.DataFrame:
    rows = [{'label': label, **values} for label, values in sorted(block['per_class'].items())]
    return pd.DataFrame(rows, columns=['label', 'precision', 'recall', 'f1', 'support'])


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format='svg', metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_per_app(block: dict, path: PathT, title: str = 'per-app window metrics') -> Path:
    '''Grouped bars of precision, recall and F1 per label'''
    df = _per_class_frame(block)
    fig, ax = plt.subplots(figsize=(8, 4))
    x = np.arange(len(df))
    for k, metric in enumerate(('precision', 'recall', 'f1')):
        ax.bar(x + (k - 1) * 0.27, df[metric], width=0.27, label=metric)
    ax.set_xticks(x)
    ax.set_xticklabels(df['label'], rotation=30, ha='right')
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(loc='lower right')
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_confusion(confusion: dict, path: PathT) -> Path:
    cm = ConfusionMatrix.from_json(confusion)
    fig, ax = plt.subplots(figsize=(6, 5))
    with np.errstate(invalid='ignore', divide='ignore'):
        rates = cm.counts / cm.counts.sum(axis=1, keepdims=True)
    ax.imshow(np.nan_to_num(rates), cmap='Blues', vmin=0, vmax=1)
    for (i, j), count in np.ndenumerate(cm.counts):
        ax.text(j, i, str(count), ha='center', va='center', fontsize=7)
    ax.set_xticks(range(len(cm.classes)))
    ax.set_yticks(range(len(cm.classes)))
    ax.set_xticklabels(cm.classes, rotation=45, ha='right')
    ax.set_yticklabels(cm.classes)
    ax.set_xlabel('predicted')
    ax.set_ylabel('truth')
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_importance(block: dict, path: PathT) -> Path:
    '''Headset-grid importance map; top cells ringed, bottom cells crossed'''
    grid = np.asarray(block['grid'])
    fig, ax = plt.subplots(figsize=(5, 5))
    image = ax.imshow(grid, cmap='inferno')
    top = np.argwhere(np.asarray(block['top']))
    bottom = np.argwhere(np.asarray(block['bottom']))
    ax.scatter(top[:, 1], top[:, 0], s=30, facecolors='none', edgecolors='lime', label='top 20%')
    ax.scatter(bottom[:, 1], bottom[:, 0], s=12, marker='x', color='grey', label='bottom 20%')
    fig.colorbar(image, ax=ax, fraction=0.046)
    ax.set_title(f'feature importance, {block["n"]}x{block["n"]} grid')
    ax.legend(loc='upper right', fontsize=7)
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_ablation(rows: List[dict], key: str, path: PathT, xlabel: str) -> Path:
    df = pd.DataFrame(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in ('window_accuracy', 'window_weighted_f1', 'session_accuracy'):
        if metric in df:
            ax.plot(df[key], df[metric].astype(float), marker='o', label=metric)
    ax.set_xlabel(xlabel)
    ax.set_ylim(0, 1.05)
    ax.legend(loc='lower right')
    fig.tight_layout()
    return _save(fig, Path(path))


def render_report(report: Union[dict, PathT], out: PathT) -> List[Path]:
    '''CSV tables and SVG plots for an experiment or sweep report'''
    if not isinstance(report, dict):
        report = json.loads(Path(report).read_text())
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    if 'folds' in report:
        path = out / 'folds.csv'
        pd.DataFrame(report['folds']).drop(columns=['test_sessions', 'unscorable'], errors='ignore').to_csv(
            path, index=False
        )
        written.append(path)
    for level in ('window', 'session'):
        pooled = report.get(level, {}).get('pooled')
        if pooled is None:
            continue
        path = out / f'{level}_per_class.csv'
        _per_class_frame(pooled).to_csv(path, index=False)
        written.append(path)
        path = out / f'{level}_confusion.csv'
        ConfusionMatrix.from_json(pooled['confusion']).to_frame().to_csv(path)
        written.append(path)
        written.append(plot_per_app(pooled, out / f'{level}_per_app.svg', f'per-app {level} metrics'))
        written.append(plot_confusion(pooled['confusion'], out / f'{level}_confusion.svg'))
    if 'importance' in report:
        written.append(plot_importance(report['importance'], out / 'importance_grid.svg'))
    if 'cross_device' in report:
        block = report['cross_device']
        path = out / 'cross_device.csv'
        pd.DataFrame(block['accuracy'], index=block['devices'], columns=block['devices']).to_csv(path)
        written.append(path)
    if 'sweep' in report:
        sweep: Dict[str, List[dict]] = report['sweep']
        for key, rows, label in (('n', sweep['grid'], 'grid side n'), ('window_s', sweep['window'], 'window (s)')):
            name = 'grid' if key == 'n' else 'window'
            path = out / f'sweep_{name}.csv'
            pd.DataFrame(rows).drop(columns=['per_class'], errors='ignore').to_csv(path, index=False)
            written.append(path)
            written.append(plot_ablation(rows, key, out / f'sweep_{name}.svg', label))
    logger.info('rendered %d files under %s', len(written), out)
    return written
