'''``thermaltap`` command line: synth, segment, extract, train, infer, eval, report

Exit status is 0 on success, 1 on a usage or configuration error and 2 on a
data error.
'''

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from . import __version__
from .base import ConfigError, PlanError, ThermalTapError
from .classify.two_stage import SessionPrediction, load_model, predict_sessions, save_model, train_two_stage
from .config import NORMALIZATION_FLAGS, RunConfig, load_config
from .eval.experiment import (
    DatasetIndex,
    build_matrix,
    extract_dataset,
    fit_normalization,
    run,
    segmentation_report,
    session_vectors,
    sweep,
)
from .eval.report import build_report, build_sweep_report, render_report, write_json, write_predictions
from .features import FeatureVector, feature_matrix, write_feature_matrix
from .normalize import NormalizationState
from .synth import SuiteSpec, generate_dataset

logger = logging.getLogger('thermaltap')

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'
USAGE_ERROR = 1
DATA_ERROR = 2
MODEL_NAME = 'model.json'
NORMALIZATION_NAME = 'normalization.json'


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    '''Usage errors exit with status 1'''

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f'{self.prog}: error: {message}\n')


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='JSON run configuration; flags override it')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--seed', type=int, help='random seed (overrides THERMALTAP_SEED)')
    parser.add_argument('--jobs', type=int, help='worker processes (default: all cores)')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')


def _pipeline(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--dataset', help='dataset root holding one directory per session')
    parser.add_argument('--grid', type=int, help='grid side n')
    parser.add_argument('--window', dest='window_s', type=int, help='window length, s')
    parser.add_argument('--stride', dest='stride_s', type=int, help='window stride, s')
    parser.add_argument('--lags', type=int, nargs='+', help='temporal-delta lags, s')
    parser.add_argument('--min-cell-coverage', type=float)
    parser.add_argument('--contrast', dest='contrast_c', type=float, help='segmenter contrast, °C')
    parser.add_argument('--tolerance-ms', type=int, help='frame/sensor alignment tolerance')


def _model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--backend', choices=('forest', 'margin'))
    parser.add_argument('--k-features', type=int, help='features kept after ANOVA ranking')
    parser.add_argument('--n-trees', type=int)
    parser.add_argument('--max-depth', type=int)
    parser.add_argument('--min-leaf', type=int)
    parser.add_argument('--flat', action='store_true', help='single-stage classifier over every label')
    for flag in NORMALIZATION_FLAGS:
        parser.add_argument(f'--{flag.replace("_", "-")}', action='store_true', help=f'enable {flag} correction')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='thermaltap', description=__doc__.splitlines()[0])
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('synth', help='generate a synthetic dataset')
    _common(p)
    p.add_argument('--suite', help='suite JSON (default: built-in default suite)')
    p.add_argument('--light', action='store_true', help='reduced quick-run suite unless --suite is given')

    p = sub.add_parser('segment', help='score the classical segmenter against ingested masks')
    _common(p)
    _pipeline(p)

    p = sub.add_parser('extract', help='write the window feature matrix')
    _common(p)
    _pipeline(p)

    p = sub.add_parser('train', help='fit a model on every session of a dataset')
    _common(p)
    _pipeline(p)
    _model(p)

    p = sub.add_parser('infer', help='label the sessions of a dataset with a saved model')
    _common(p)
    _pipeline(p)
    p.add_argument('--model', required=True, help=f'{MODEL_NAME} written by train')

    p = sub.add_parser('eval', help='run a cross-validation protocol and write report.json')
    _common(p)
    _pipeline(p)
    _model(p)
    p.add_argument('--protocol', choices=('loso', 'lodo', 'pooled', 'transfer', 'cross_device'))
    p.add_argument('--few-shot', dest='few_shot_count', type=int, help='outdoor sessions per class in training')
    p.add_argument('--sweep', action='store_true', help='grid and window ablations instead of one run')

    p = sub.add_parser('report', help='render a report.json into CSV tables and SVG plots')
    _common(p)
    p.add_argument('report', help='report.json')
    return parser


_CONFIG_KEYS = (
    'dataset',
    'grid',
    'window_s',
    'stride_s',
    'lags',
    'min_cell_coverage',
    'contrast_c',
    'tolerance_ms',
    'backend',
    'k_features',
    'n_trees',
    'max_depth',
    'min_leaf',
    'protocol',
    'few_shot_count',
    'seed',
    'jobs',
    'out',
)


def config_from_args(args: argparse.Namespace, environ=None) -> RunConfig:
    '''RunConfig from ``--config``, the environment and flags, in rising precedence'''
    overrides: Dict[str, Any] = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    flags = {flag: True for flag in NORMALIZATION_FLAGS if getattr(args, flag, False)}
    if flags:
        overrides['normalization'] = flags
    if getattr(args, 'flat', False):
        overrides['two_stage'] = False
    return load_config(args.config, overrides, environ)


def _out(config: RunConfig) -> Path:
    if config.out is None:
        raise UsageError('--out is required')
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _index(config: RunConfig) -> DatasetIndex:
    if config.dataset is None:
        raise UsageError('--dataset is required')
    return DatasetIndex.scan(config.dataset)


def _write_config(config: RunConfig, out: Path) -> None:
    (out / 'config.json').write_text(config.to_json(indent=2, sort_keys=True) + '\n')


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> None:
    suite = SuiteSpec.light() if args.light else SuiteSpec()
    if args.suite:
        try:
            suite = SuiteSpec.from_json(json.loads(Path(args.suite).read_text()))
        except json.JSONDecodeError as err:
            raise ConfigError(f'suite {args.suite} is not JSON: {err}') from err
    paths = generate_dataset(suite, _out(config), config.seed, config.jobs)
    logger.info('wrote %d sessions', len(paths))


def cmd_segment(args: argparse.Namespace, config: RunConfig) -> None:
    index = _index(config)
    out = _out(config)
    report = {'toolkit_version': __version__, 'config': config.json, 'sessions': segmentation_report(index, config)}
    write_json(report, out / 'segmentation.json')


def _vectors(
    index: DatasetIndex, config: RunConfig, corrections: Optional[NormalizationState] = None
) -> List[FeatureVector]:
    features = extract_dataset(index, config)
    return [v for sid in sorted(features) for v in session_vectors(features[sid], config, corrections)]


def cmd_extract(args: argparse.Namespace, config: RunConfig) -> None:
    index = _index(config)
    out = _out(config)
    vectors = _vectors(index, config)
    write_feature_matrix(feature_matrix(vectors), out / 'features.csv')
    _write_config(config, out)
    logger.info('%d windows from %d sessions', len(vectors), len(index.manifests))


def cmd_train(args: argparse.Namespace, config: RunConfig) -> None:
    index = _index(config)
    out = _out(config)
    features = extract_dataset(index, config)
    corrections = fit_normalization(config, [features[sid] for sid in sorted(features)])
    vectors = [v for sid in sorted(features) for v in session_vectors(features[sid], config, corrections)]
    X, meta, names = build_matrix(vectors, config)
    model = train_two_stage(
        X,
        meta['label'].tolist(),
        names,
        config.backend,
        config.seed,
        config.k_features,
        config.two_stage,
        config.forest_params,
        config.margin_params,
    )
    save_model(model, out / MODEL_NAME)
    if corrections is not None:
        (out / NORMALIZATION_NAME).write_text(corrections.to_json(indent=2, sort_keys=True) + '\n')
    _write_config(config, out)


def prediction_frames(predictions: Sequence[SessionPrediction]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    '''Window and session tables of a batch of session predictions'''
    windows = pd.DataFrame(
        [
            {
                'session_id': r.session_id,
                'window_start': r.window_start,
                'stage1': r.stage1,
                'stage2': r.stage2,
                'pred': r.window_label,
            }
            for p in predictions
            for r in p.records
        ]
    )
    sessions = pd.DataFrame(
        [
            {'session_id': p.session_id, 'pred': p.label, 'idle_votes': p.idle_votes, 'active_votes': p.active_votes}
            for p in predictions
        ]
    )
    return windows, sessions


def cmd_infer(args: argparse.Namespace, config: RunConfig) -> None:
    model_path = Path(args.model)
    if not model_path.is_file():
        raise FileNotFoundError(f'no model at {model_path}')
    model = load_model(model_path)
    corrections = None
    if (model_path.parent / NORMALIZATION_NAME).is_file():
        corrections = NormalizationState.from_json(json.loads((model_path.parent / NORMALIZATION_NAME).read_text()))
    index = _index(config)
    out = _out(config)
    vectors = _vectors(index, config, corrections)
    X, meta, names = build_matrix(vectors, config)
    if model.feature_names and names != model.feature_names:
        raise ConfigError('feature layout differs from the model; use the grid, window and lags it was trained with')
    windows, sessions = prediction_frames(predict_sessions(model, X, meta))
    windows.to_csv(out / 'windows.csv', index=False)
    sessions.to_csv(out / 'sessions.csv', index=False)


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> None:
    index = _index(config)
    out = _out(config)
    if args.sweep:
        report = build_sweep_report(config, sweep(config, index=index))
    else:
        result = run(config, index)
        report = build_report(result)
        write_predictions(result, out)
    path = write_json(report, out / 'report.json')
    logger.info('wrote %s', path)


def cmd_report(args: argparse.Namespace, config: RunConfig) -> None:
    path = Path(args.report)
    if not path.is_file():
        raise FileNotFoundError(f'no report at {path}')
    out = Path(config.out) if config.out else path.parent
    render_report(path, out)


COMMANDS = {
    'synth': cmd_synth,
    'segment': cmd_segment,
    'extract': cmd_extract,
    'train': cmd_train,
    'infer': cmd_infer,
    'eval': cmd_eval,
    'report': cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        config = config_from_args(args)
        COMMANDS[args.command](args, config)
    except (UsageError, ConfigError, PlanError) as err:
        logger.error('%s', err)
        return USAGE_ERROR
    except (ThermalTapError, FileNotFoundError, ValueError) as err:
        logger.error('%s', err)
        return DATA_ERROR
    return 0


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
