'''End-to-end checks of recognition quality on reduced synthetic suites'''

import numpy as np
import pytest

from thermaltap.classify.forest import ForestParams
from thermaltap.classify.two_stage import train_two_stage, two_stage_infer
from thermaltap.cli import main
from thermaltap.config import RunConfig
from thermaltap.eval.experiment import (
    DatasetIndex,
    activity_report,
    build_matrix,
    extract_dataset,
    run,
    session_vectors,
    sweep,
    window_metrics,
)
from thermaltap.synth import SuiteSpec, generate_dataset

FAST = ['--grid', '4', '--n-trees', '10', '--max-depth', '8', '--jobs', '1']


def _dataset(tmp_path_factory, name, suite, seed=0):
    root = tmp_path_factory.mktemp(name)
    generate_dataset(suite, root, seed=seed)
    return DatasetIndex.scan(root)


@pytest.fixture(scope='module')
def apps_suite(tmp_path_factory):
    index = _dataset(tmp_path_factory, 'apps', SuiteSpec.light())
    config = RunConfig(dataset=str(index.root), grid=16, window_s=10)
    return index, config, extract_dataset(index, config)


@pytest.fixture(scope='module')
def apps_loso(apps_suite):
    index, config, features = apps_suite
    return run(config, index, features)


def test_eval_report_is_byte_identical_across_reruns(tiny_dataset, tmp_path):
    argv = ['eval', '--protocol', 'loso', '--dataset', str(tiny_dataset), '--out', str(tmp_path)] + FAST
    assert main(argv) == 0
    first = (tmp_path / 'report.json').read_bytes()
    assert main(argv) == 0
    assert (tmp_path / 'report.json').read_bytes() == first


@pytest.mark.slow
def test_loso_recognizes_active_apps(apps_loso):
    active = window_metrics(apps_loso.windows, active_only=True)
    assert active.accuracy >= 0.90
    assert active.weighted_f1 >= 0.88


@pytest.mark.slow
def test_stage_one_catches_active_windows(apps_loso):
    pooled = activity_report(apps_loso)['pooled']
    assert pooled['per_class']['active']['recall'] >= 0.95
    assert 'idle' in pooled['per_class']


@pytest.mark.slow
def test_grid_and_window_sweeps(apps_suite):
    index, config, _ = apps_suite
    rows = sweep(config.updated(n_trees=100), grids=(4, 16), windows=(10, 20, 30, 60, 90, 120), index=index)
    by_n = {r['n']: r['window_accuracy'] for r in rows['grid']}
    assert by_n[16] >= by_n[4]
    accuracy = [r['window_accuracy'] for r in rows['window']]
    assert len(accuracy) == 6
    assert max(accuracy) - min(accuracy) <= 0.08


@pytest.mark.slow
def test_shuffled_labels_score_chance(apps_suite):
    index, config, features = apps_suite
    active = [features[sid] for sid in sorted(features) if features[sid].label != 'home']
    vectors = [v for session in active for v in session_vectors(session, config)]
    X, meta, names = build_matrix(vectors, config)
    labels = np.random.default_rng(0).permutation(meta['label'].to_numpy())
    sessions = meta['session_id'].to_numpy()
    hits = []
    for sid in np.unique(sessions):
        test = sessions == sid
        model = train_two_stage(
            X[~test], labels[~test], names, two_stage=False, forest=ForestParams(n_trees=50), seed=0
        )
        prediction = two_stage_infer(X[test], model, sid)
        hits.extend(r.window_label == t for r, t in zip(prediction.records, labels[test]))
    n_classes = len(set(labels))
    assert n_classes == 6
    assert abs(np.mean(hits) - 1 / n_classes) <= 0.08


@pytest.mark.slow
def test_pooled_beats_zero_shot_across_devices(tmp_path_factory):
    suite = SuiteSpec.light(devices=('quest3', 'quest2', 'vive_focus'), sessions_per_app=3)
    index = _dataset(tmp_path_factory, 'devices', suite)
    config = RunConfig(dataset=str(index.root), grid=16, window_s=10, n_trees=100)
    features = extract_dataset(index, config)
    pooled = window_metrics(run(config, index, features).windows).accuracy
    lodo = window_metrics(run(config.updated(protocol='lodo'), index, features).windows).accuracy
    assert pooled - lodo >= 0.30


@pytest.mark.slow
def test_outdoor_adaptation_and_normalization(tmp_path_factory):
    suite = SuiteSpec.light(environments={'indoor': 4, 'outdoor': 4})
    index = _dataset(tmp_path_factory, 'outdoor', suite)
    config = RunConfig(dataset=str(index.root), grid=16, window_s=10, protocol='transfer', n_trees=100)
    features = extract_dataset(index, config)

    zero_shot = window_metrics(run(config, index, features).windows).accuracy
    adapted, plain, corrected = [], [], []
    for seed in range(5):
        few_shot = config.updated(few_shot_count=2, seed=seed)
        metrics = window_metrics(run(few_shot, index, features).windows)
        adapted.append(metrics.accuracy)
        plain.append(metrics.weighted_f1)
        normalized = few_shot.updated(normalization={'ambient': True, 'wind': True})
        corrected.append(window_metrics(run(normalized, index, features).windows).weighted_f1)
    assert zero_shot < np.mean(adapted)
    assert all(c >= p - 0.02 for p, c in zip(plain, corrected))
    assert np.mean(corrected) > np.mean(plain)


@pytest.mark.slow
def test_twin_apps_are_indistinguishable(tmp_path_factory):
    suite = SuiteSpec.light(apps=('arkio', 'arkio_twin'), aliases={'arkio_twin': 'arkio'})
    index = _dataset(tmp_path_factory, 'twins', suite)
    config = RunConfig(dataset=str(index.root), grid=16, window_s=10, two_stage=False, n_trees=100)
    accuracy = window_metrics(run(config, index).windows).accuracy
    assert abs(accuracy - 0.5) <= 0.15
