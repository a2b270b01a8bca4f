import json

import jsonschema
import pytest

from thermaltap.base import ConfigError
from thermaltap.config import SEED_ENV, RunConfig, load_config
from thermaltap.documents import RUN_CONFIG_SCHEMA


def test_defaults():
    config = RunConfig()
    assert config.grid == 16
    assert config.window_s == 10
    assert config.stride == 10
    assert config.lags == (5, 30)
    assert config.backend == 'forest'
    assert config.normalization == {
        'ambient': False,
        'wind': False,
        'delta_residual': False,
        'headset_baseline': False,
    }
    assert config.grid_spec.n == 16
    assert config.segmenter.contrast_c == 3.0
    assert config.forest_params.n_trees == 300
    assert config.margin_params.lam == pytest.approx(1e-3)
    jsonschema.validate(config.json, RUN_CONFIG_SCHEMA)


def test_json_round_trip():
    config = RunConfig(grid=8, lags=[5], normalization={'ambient': True}, stride_s=5, seed=3)
    loaded = RunConfig.from_json(json.loads(config.to_json()))
    assert loaded == config
    assert loaded.normalization['ambient'] and not loaded.normalization['wind']


@pytest.mark.parametrize(
    'kwargs, match',
    [
        ({'grid': 1}, 'grid'),
        ({'backend': 'svm'}, 'backend'),
        ({'protocol': 'kfold'}, 'protocol'),
        ({'few_shot_count': 2}, 'transfer'),
        ({'normalization': {'delta_residual': True}}, 'transfer'),
        ({'normalization': {'humidity': True}}, 'normalization'),
        ({'min_cell_coverage': 0.0}, 'min_cell_coverage'),
    ],
)
def test_invalid_configs(kwargs, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig(**kwargs)


def test_transfer_allows_few_shot_and_residuals():
    config = RunConfig(protocol='transfer', few_shot_count=2, normalization={'delta_residual': True})
    assert config.few_shot_count == 2


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match='unknown configuration keys'):
        RunConfig.from_json({'grid': 8, 'colour': 'red'})


def test_load_config_precedence(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'seed': 3, 'grid': 8, 'normalization': {'ambient': True}}))

    assert load_config(path, environ={}).seed == 3
    assert load_config(path, environ={SEED_ENV: '5'}).seed == 5
    config = load_config(path, {'seed': 7, 'grid': None, 'normalization': {'wind': True}}, environ={SEED_ENV: '5'})
    assert config.seed == 7
    assert config.grid == 8
    assert config.normalization['ambient'] and config.normalization['wind']
    assert load_config(environ={}) == RunConfig()


@pytest.mark.parametrize(
    'setup, match',
    [
        (lambda p: None, 'not found'),
        (lambda p: p.write_text('{grid: 8'), 'not JSON'),
    ],
)
def test_load_config_file_errors(tmp_path, setup, match):
    path = tmp_path / 'config.json'
    setup(path)
    with pytest.raises(ConfigError, match=match):
        load_config(path, environ={})


def test_load_config_bad_seed_env():
    with pytest.raises(ConfigError, match=SEED_ENV):
        load_config(environ={SEED_ENV: 'abc'})


def test_updated():
    config = RunConfig(grid=8)
    assert config.updated(window_s=30).window_s == 30
    assert config.updated(window_s=30).grid == 8
    with pytest.raises(ConfigError):
        config.updated(few_shot_count=1)
