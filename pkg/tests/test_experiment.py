import json
from dataclasses import replace

import numpy as np
import pytest

from thermaltap.base import BaselineMissing, ExperimentError, SchemaError
from thermaltap.config import RunConfig
from thermaltap.eval.experiment import (
    WINDOW_COLUMNS,
    DatasetIndex,
    activity_report,
    build_matrix,
    environment_breakdown,
    extract_dataset,
    fit_normalization,
    fold_model,
    run,
    run_fold,
    segmentation_report,
    session_vectors,
    sweep,
)
from thermaltap.eval.folds import Fold
from thermaltap.eval.report import build_report, build_sweep_report, render_report, write_json, write_predictions
from thermaltap.features import GridSpec, extract_session, feature_names


@pytest.fixture(scope='module')
def extracted(tiny_dataset):
    config = RunConfig(dataset=str(tiny_dataset), grid=4, window_s=10, n_trees=10, max_depth=8, jobs=1)
    index = DatasetIndex.scan(tiny_dataset)
    return index, config, extract_dataset(index, config)


@pytest.fixture(scope='module')
def loso(extracted):
    index, config, features = extracted
    return run(config, index, features)


def test_dataset_index(tiny_dataset, tmp_path):
    index = DatasetIndex.scan(tiny_dataset)
    assert len(index.sessions) == 9
    assert index.sessions[0].session_id == 'quest3_home_indoor_00'
    assert {m.app_label for m in index.sessions} == {'home', 'youtube', 'vrfs'}
    with pytest.raises(SchemaError, match='no sessions'):
        DatasetIndex.scan(tmp_path)
    with pytest.raises(FileNotFoundError):
        DatasetIndex.scan(tmp_path / 'missing')


def test_session_vectors(extracted):
    index, config, features = extracted
    session = features['quest3_vrfs_indoor_01']
    vectors = session_vectors(session, config)
    assert [v.window_start for v in vectors] == [0, 10, 20, 30, 40, 50]
    X, meta, names = build_matrix(vectors, config)
    assert X.shape == (6, len(feature_names(4, (5, 30))))
    assert names == feature_names(4, (5, 30))
    assert set(meta['label']) == {'vrfs'}
    # the chassis warms while the app runs
    mean = names.index('cell_1_1_mean_mean')
    assert X[4, mean] > X[0, mean]


def test_fit_normalization_uses_training_sessions(extracted):
    index, config, features = extracted
    assert fit_normalization(config, list(features.values())) is None
    flags = {'ambient': True, 'wind': True, 'headset_baseline': True}
    state = fit_normalization(config.updated(normalization=flags), list(features.values()))
    assert state.ambient
    # indoor air barely moves, so no wind coefficient can be fitted
    assert state.wind.k == 0.0
    assert 'quest3' in state.baselines
    assert state.delta_table is None


def test_run_loso(loso):
    assert loso.plan.protocol == 'loso'
    assert len(loso.folds) == 9
    sessions = loso.sessions
    assert len(sessions) == 9
    assert sorted(sessions['session_id']) == sorted(f.test[0] for f in loso.plan.folds)
    assert list(loso.windows.columns[: len(WINDOW_COLUMNS)]) == WINDOW_COLUMNS
    assert len(loso.windows) == 54
    assert all(f.n_train_windows == 48 for f in loso.folds)
    assert loso.folds[0].importances
    assert loso.signature is None


def test_report(loso, tmp_path):
    report = build_report(loso)
    assert report['protocol'] == 'loso'
    assert report['config']['grid'] == 4
    assert len(report['folds']) == 9
    assert report['window']['per_fold']['accuracy']['folds'] == 9
    assert 0.0 <= report['window']['pooled']['accuracy'] <= 1.0
    assert set(report['session']['pooled']['per_class']) <= {'home', 'youtube', 'vrfs'}
    assert np.asarray(report['importance']['grid']).shape == (4, 4)
    assert 'cross_device' not in report

    path = write_json(report, tmp_path / 'report.json')
    assert json.loads(path.read_text()) == json.loads(json.dumps(report))
    names = {p.name for p in render_report(path, tmp_path / 'rendered')}
    assert {
        'folds.csv',
        'window_per_class.csv',
        'window_confusion.csv',
        'window_per_app.svg',
        'session_confusion.svg',
        'importance_grid.svg',
    } <= names
    windows, sessions = write_predictions(loso, tmp_path / 'predictions')
    assert len(sessions.read_text().strip().splitlines()) == 10


def test_report_is_reproducible(extracted, loso):
    index, config, features = extracted
    again = run(config, index, features)
    assert json.dumps(build_report(again), sort_keys=True) == json.dumps(build_report(loso), sort_keys=True)


def test_activity_and_environment(loso):
    activity = activity_report(loso)
    assert set(activity['per_fold']) == {'idle', 'active'}
    assert set(activity['pooled']['per_class']) == {'idle', 'active'}
    assert activity['pooled']['per_class']['idle']['support'] == 18

    env = environment_breakdown(loso, bins=3)
    assert len(env['ambient_c']) == 3
    assert sum(row['windows'] for row in env['distance_cm']) == 54


def test_failed_fold_names_the_fold(extracted):
    index, config, features = extracted
    # a window longer than every session leaves nothing to train on
    with pytest.raises(ExperimentError, match='fold quest3_'):
        run(config.updated(window_s=120), index, features)
    with pytest.raises(ExperimentError, match='no dataset'):
        run(RunConfig())


def test_segmentation_report(extracted):
    index, config, _ = extracted
    report = segmentation_report(index, config)
    assert len(report) == 9
    for entry in report.values():
        assert entry['frames'] == 60
        assert entry['scored_frames'] == 6
        assert entry['dice'] > 0.8
        assert entry['valid_fraction'] > 0.9


@pytest.mark.slow
def test_sweep(extracted, tmp_path):
    index, config, _ = extracted
    rows = sweep(config, grids=(2, 4), windows=(10, 20), index=index)
    assert [r['n'] for r in rows['grid']] == [2, 4]
    assert [r['window_s'] for r in rows['window']] == [10, 20]
    assert 'per_class' in rows['grid'][0] and 'per_class' not in rows['window'][0]
    report = build_sweep_report(config, rows)
    names = {p.name for p in render_report(report, tmp_path)}
    assert {'sweep_grid.csv', 'sweep_grid.svg', 'sweep_window.csv', 'sweep_window.svg'} <= names


@pytest.mark.slow
def test_loso_recognizes_apps(extracted):
    index, config, features = extracted
    result = run(config.updated(n_trees=50), index, features)
    sessions = result.sessions
    assert (sessions['truth'] == sessions['pred']).mean() >= 2 / 3


def test_fold_corrections_never_see_test_labels(make_recording):
    grid = GridSpec(4)
    sessions = {}
    for label, ramp in (('home', 0.0), ('youtube', 0.1), ('vrfs', 0.2)):
        rec = make_recording(label=label, ramp=ramp, session_id=f'quest3_{label}')
        sessions[rec.session_id] = extract_session(rec, grid)
    test = extract_session(make_recording(label='home', device='quest2', session_id='quest2_home'), grid)
    relabeled = replace(test, manifest=replace(test.manifest, app_label='youtube'))
    config = RunConfig(
        grid=4,
        window_s=10,
        lags=(5,),
        n_trees=5,
        max_depth=4,
        jobs=1,
        normalization={'ambient': True, 'headset_baseline': True},
    )
    fold = Fold('quest2', tuple(sorted(sessions)), ('quest2_home',), (), 'quest3', 'quest2')

    _, state, n_train = fold_model(fold, {**sessions, 'quest2_home': test}, config)
    _, other, _ = fold_model(fold, {**sessions, 'quest2_home': relabeled}, config)
    assert n_train == 6
    assert other.json == state.json
    assert list(state.baselines.json) == ['quest3']

    # a device with no idle training session has nothing to subtract
    with pytest.raises(BaselineMissing, match='quest2'):
        run_fold(fold, {**sessions, 'quest2_home': test}, config)
