'''Run configuration with JSON I/O and layered precedence'''

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .base import ConfigError, SchemaError, Serializable
from .classify.forest import ForestParams
from .classify.margin import MarginParams
from .documents import validate_document
from .features import DEFAULT_LAGS, GridSpec
from .frame_store import DEFAULT_TOLERANCE_MS
from .roi import SegmenterConfig

logger = logging.getLogger(__name__)

SEED_ENV = 'THERMALTAP_SEED'
NORMALIZATION_FLAGS = ('ambient', 'wind', 'delta_residual', 'headset_baseline')


def _no_normalization() -> Dict[str, bool]:
    return {flag: False for flag in NORMALIZATION_FLAGS}


@dataclass(frozen=True)
class RunConfig(Serializable):
    '''Everything an experiment needs; embedded verbatim in every report'''

    dataset: Optional[str] = None
    grid: int = 16
    min_cell_coverage: float = 0.5
    window_s: int = 10
    stride_s: Optional[int] = None
    lags: Tuple[int, ...] = DEFAULT_LAGS
    backend: str = 'forest'
    normalization: Dict[str, bool] = field(default_factory=_no_normalization)
    protocol: str = 'loso'
    few_shot_count: int = 0
    two_stage: bool = True
    seed: int = 0
    jobs: Optional[int] = None
    out: Optional[str] = None
    k_features: Optional[int] = None
    n_trees: int = 300
    max_depth: int = 24
    min_leaf: int = 2
    margin_lambda: float = 1e-3
    margin_epochs: int = 20
    tolerance_ms: int = DEFAULT_TOLERANCE_MS
    contrast_c: float = 3.0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'lags', tuple(int(x) for x in self.lags))
        object.__setattr__(self, 'normalization', {**_no_normalization(), **dict(self.normalization)})
        self.validate()

    def validate(self) -> None:
        '''Schema check plus cross-field constraints

        Raises
        ------
        ConfigError
        '''
        try:
            validate_document(self.json, 'run_config')
        except SchemaError as err:
            raise ConfigError(str(err)) from err
        if self.stride_s is not None and self.stride_s > self.window_s:
            logger.warning('stride %ds exceeds window %ds, frames will be skipped', self.stride_s, self.window_s)
        if self.few_shot_count and self.protocol != 'transfer':
            raise ConfigError(f'few_shot_count only applies to the transfer protocol, not {self.protocol!r}')
        if self.normalization['delta_residual'] and self.protocol != 'transfer':
            raise ConfigError('delta_residual normalization only applies to the transfer protocol')

    @property
    def stride(self) -> int:
        return self.stride_s or self.window_s

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid, self.min_cell_coverage)

    @property
    def segmenter(self) -> SegmenterConfig:
        return SegmenterConfig(contrast_c=self.contrast_c)

    @property
    def forest_params(self) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.min_leaf)

    @property
    def margin_params(self) -> MarginParams:
        return MarginParams(self.margin_lambda, self.margin_epochs)

    @property
    def json(self) -> dict:
        obj = asdict(self)
        obj['lags'] = list(self.lags)
        obj['normalization'] = dict(sorted(self.normalization.items()))
        return obj

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]):
        unknown = set(obj) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f'unknown configuration keys: {sorted(unknown)}')
        return cls(**obj)

    def updated(self, **changes) -> 'RunConfig':
        return replace(self, **changes)


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    '''Merge defaults < JSON file < ``THERMALTAP_SEED`` < explicit overrides

    ``None`` values in ``overrides`` mean "not given".
    '''
    environ = os.environ if environ is None else environ
    merged: Dict[str, Any] = {}
    if path is not None:
        try:
            merged.update(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise ConfigError(f'config file not found: {path}') from None
        except json.JSONDecodeError as err:
            raise ConfigError(f'config file {path} is not JSON: {err}') from err
    if SEED_ENV in environ:
        try:
            merged['seed'] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f'{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}') from None
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == 'normalization':
            merged['normalization'] = {**merged.get('normalization', {}), **value}
        else:
            merged[key] = value
    return RunConfig.from_json(merged)
