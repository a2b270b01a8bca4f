'''Spatiotemporal thermal signature: N×N cell statistics, gradients, deltas, window vectors'''

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import xarray as xr

from .base import ConfigError, Serializable, WindowDropped
from .frame_store import ObservationWindow, RadiometricFrame, SessionManifest, SessionRecording
from .roi import Mask, MaskQuality, SegmenterConfig, largest_component, mask_geometry, segment_session

if TYPE_CHECKING:  # pragma: no cover
    from .normalize import NormalizationState

logger = logging.getLogger(__name__)

STATS = ('min', 'max', 'mean', 'std')
CHANNELS = STATS + ('grad',)
AGGREGATES = ('mean', 'slope')
CONTEXT = ('ambient_c_mean', 'air_velocity_mean', 'distance_cm_mean')
DEFAULT_LAGS = (5, 30)
GRID_SWEEP = (4, 8, 12, 16, 20, 24)
MIN_VALID_FRACTION = 0.5
META_COLUMNS = ['session_id', 'window_start', 'label']


@dataclass(frozen=True)
class GridSpec(Serializable):
    '''N×N partition of the headset bounding box

    Parameters
    ----------
    n : int
        Grid side length.
    min_cell_coverage : float
        Minimum fraction of a cell's area that must lie on the mask.
    '''

    n: int = 16
    min_cell_coverage: float = 0.5

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f'grid side must be >= 2, got {self.n}')
        if not 0 < self.min_cell_coverage <= 1:
            raise ConfigError(f'min_cell_coverage must be in (0, 1], got {self.min_cell_coverage}')

    @property
    def json(self) -> dict:
        return {'n': self.n, 'min_cell_coverage': self.min_cell_coverage}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(**obj)


@dataclass(frozen=True)
class CellStats:
    min: float
    max: float
    mean: float
    std: float
    present: bool


@dataclass(frozen=True)
class CellGrid:
    '''Per-cell statistics of one frame; ``values`` is (stat, i, j), NaN when missing'''

    values: np.ndarray
    present: np.ndarray

    @classmethod
    def missing(cls, n: int) -> 'CellGrid':
        return cls(np.full((len(STATS), n, n), np.nan), np.zeros((n, n), dtype=bool))

    @property
    def n(self) -> int:
        return int(self.present.shape[0])

    @property
    def mean(self) -> np.ndarray:
        return self.values[STATS.index('mean')]

    def cell(self, i: int, j: int) -> CellStats:
        v = self.values[:, i, j]
        return CellStats(float(v[0]), float(v[1]), float(v[2]), float(v[3]), bool(self.present[i, j]))


@dataclass(frozen=True)
class FrameFeatures:
    '''Grid features of one valid frame; ``deltas`` maps each lag to its (i, j) Δ grid'''

    index: int
    timestamp: int
    stats: CellGrid
    gradient: np.ndarray
    deltas: Mapping[int, np.ndarray]


@dataclass(frozen=True)
class ThermalSignature:
    '''Frame features of the valid frames of one window, in time order'''

    window: ObservationWindow
    device_model: str
    sample_rate_hz: float
    frames: Tuple[FrameFeatures, ...]

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def positions(self) -> np.ndarray:
        '''Frame offsets from the window start'''
        return np.array([f.index - self.window.start_index for f in self.frames], dtype=int)

    def stack(self) -> Tuple[np.ndarray, np.ndarray]:
        '''(frame, stat, i, j) statistics and (frame, i, j) gradients'''
        return np.stack([f.stats.values for f in self.frames]), np.stack([f.gradient for f in self.frames])

    def delta_stack(self, lag_s: int) -> np.ndarray:
        try:
            return np.stack([f.deltas[lag_s] for f in self.frames])
        except KeyError:
            raise ValueError(f'signature of {self.window.session_id} carries no lag {lag_s}') from None


@dataclass(frozen=True)
class WindowEnv:
    '''Sensor columns over every frame of a window, NaN where no sample matched'''

    ambient_c: np.ndarray
    air_velocity_mps: np.ndarray
    distance_cm: np.ndarray


@dataclass(frozen=True)
class FeatureVector:
    session_id: str
    window_start: int
    label: str
    names: Tuple[str, ...]
    values: np.ndarray


def _cell_index(size: int, n: int) -> np.ndarray:
    # remainder pixels go to the last row/column cell
    base = size // n
    if base == 0:
        return np.full(size, n - 1)
    return np.minimum(np.arange(size) // base, n - 1)


def cell_stats(
    frame: RadiometricFrame, mask: Mask, grid: GridSpec, quality: Optional[MaskQuality] = None
) -> CellGrid:
    '''min/max/mean/population-std of the masked pixels of every grid cell

    The grid tiles the bounding box of the mask's largest component. A cell
    is present when its masked-pixel share of the cell area reaches
    ``grid.min_cell_coverage``. An invalid mask makes the whole frame missing.
    '''
    n = grid.n
    quality = quality if quality is not None else mask_geometry(mask)
    if not quality.valid:
        return CellGrid.missing(n)

    r0, c0, r1, c1 = quality.bbox
    component = largest_component(mask.bits)[r0 : r1 + 1, c0 : c1 + 1]
    temps = frame.temps[r0 : r1 + 1, c0 : c1 + 1]
    ids = _cell_index(temps.shape[0], n)[:, None] * n + _cell_index(temps.shape[1], n)[None, :]

    size = n * n
    area = np.bincount(ids.ravel(), minlength=size)
    on = component.ravel()
    cid = ids.ravel()[on]
    v = temps.ravel()[on]
    count = np.bincount(cid, minlength=size)

    with np.errstate(invalid='ignore', divide='ignore'):
        coverage = np.where(area > 0, count / area, 0.0)
        mean = np.bincount(cid, weights=v, minlength=size) / count
        # two-pass variance
        var = np.bincount(cid, weights=(v - mean[cid]) ** 2, minlength=size) / count
    mins = np.full(size, np.inf)
    maxs = np.full(size, -np.inf)
    np.minimum.at(mins, cid, v)
    np.maximum.at(maxs, cid, v)

    present = (count > 0) & (coverage >= grid.min_cell_coverage)
    values = np.stack([mins, maxs, mean, np.sqrt(var)])
    values[:, ~present] = np.nan
    return CellGrid(values.reshape(len(STATS), n, n), present.reshape(n, n))


def spatial_gradient(mean_grid: np.ndarray) -> np.ndarray:
    '''Cell mean minus the average of its valid cardinal neighbours

    Works on (..., n, n) stacks. Missing when the cell is missing or has no
    valid neighbour.
    '''
    mean_grid = np.asarray(mean_grid, dtype=float)
    pad = [(0, 0)] * (mean_grid.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(mean_grid, pad, constant_values=np.nan)
    neighbours = np.stack(
        [
            padded[..., :-2, 1:-1],
            padded[..., 2:, 1:-1],
            padded[..., 1:-1, :-2],
            padded[..., 1:-1, 2:],
        ]
    )
    ok = np.isfinite(neighbours)
    count = ok.sum(axis=0)
    total = np.where(ok, neighbours, 0.0).sum(axis=0)
    with np.errstate(invalid='ignore', divide='ignore'):
        grad = mean_grid - total / count
    grad[(count == 0) | ~np.isfinite(mean_grid)] = np.nan
    return grad


def temporal_delta(cell_mean_series: np.ndarray, lag_s: int, sample_rate_hz: float = 1.0) -> np.ndarray:
    '''Δ(t) = μ(t) − μ(t − ℓ) along the first axis; missing for t < ℓ'''
    if int(lag_s) != lag_s or lag_s < 1:
        raise ValueError(f'lag must be a positive whole number of seconds, got {lag_s}')
    series = np.asarray(cell_mean_series, dtype=float)
    lag = int(round(lag_s * sample_rate_hz))
    out = np.full_like(series, np.nan)
    if lag < len(series):
        out[lag:] = series[lag:] - series[:-lag]
    return out


def masked_mean(values: np.ndarray, axis: int = 0) -> np.ndarray:
    '''Mean over finite entries; NaN where none'''
    ok = np.isfinite(values)
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.where(ok, values, 0.0).sum(axis=axis) / ok.sum(axis=axis)


def drift_slope(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    '''Least-squares slope per channel over the first axis, ignoring missing entries'''
    t = np.asarray(t, dtype=float).reshape((-1,) + (1,) * (values.ndim - 1))
    ok = np.isfinite(values)
    count = ok.sum(axis=0)
    with np.errstate(invalid='ignore', divide='ignore'):
        t_mean = np.where(ok, t, 0.0).sum(axis=0) / count
        v_mean = np.where(ok, values, 0.0).sum(axis=0) / count
        dt = np.where(ok, t - t_mean, 0.0)
        num = (dt * np.where(ok, values - v_mean, 0.0)).sum(axis=0)
        den = (dt**2).sum(axis=0)
        slope = num / den
    slope[(count < 2) | (den == 0)] = np.nan
    return slope


def feature_names(n: int, lags: Sequence[int] = DEFAULT_LAGS) -> List[str]:
    '''Fixed feature ordering for a grid side and lag set'''
    names = [
        f'cell_{i}_{j}_{channel}_{agg}'
        for i in range(n)
        for j in range(n)
        for channel in CHANNELS
        for agg in AGGREGATES
    ]
    names += [f'delta{lag}_{i}_{j}' for lag in lags for i in range(n) for j in range(n)]
    names += list(CONTEXT)
    return names


@dataclass
class SessionFeatures:
    '''Per-frame grid channels of a whole session

    ``data`` holds ``stats`` (time, stat, i, j), ``grad`` (time, i, j),
    ``valid`` (time) and the joined sensor columns.
    '''

    manifest: SessionManifest
    grid: GridSpec
    data: xr.Dataset
    _deltas: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def session_id(self) -> str:
        return self.manifest.session_id

    @property
    def label(self) -> str:
        return self.manifest.app_label

    def __len__(self) -> int:
        return int(self.data.sizes['time'])

    def mean_series(self) -> np.ndarray:
        return self.data['stats'].sel(stat='mean').values

    def delta(self, lag_s: int) -> np.ndarray:
        if lag_s not in self._deltas:
            self._deltas[lag_s] = temporal_delta(
                self.mean_series(), lag_s, self.manifest.sample_rate_hz
            )
        return self._deltas[lag_s]

    def signature(self, window: ObservationWindow, lags: Sequence[int] = DEFAULT_LAGS) -> ThermalSignature:
        '''Features of the window's valid frames, with Δ taken from the session-long series'''
        valid = self.data['valid'].values
        stats = self.data['stats'].values
        grad = self.data['grad'].values
        times = self.data['time'].values
        deltas = {lag: self.delta(lag) for lag in lags}
        mean = STATS.index('mean')
        frames = tuple(
            FrameFeatures(
                k,
                int(times[k]),
                CellGrid(stats[k], np.isfinite(stats[k, mean])),
                grad[k],
                {lag: d[k] for lag, d in deltas.items()},
            )
            for k in window.frame_indices
            if valid[k]
        )
        return ThermalSignature(window, self.manifest.device_model, self.manifest.sample_rate_hz, frames)

    def env(self, window: ObservationWindow) -> WindowEnv:
        idx = np.asarray(window.frame_indices)
        return WindowEnv(
            self.data['ambient_c'].values[idx],
            self.data['air_velocity_mps'].values[idx],
            self.data['distance_cm'].values[idx],
        )


def extract_session(
    rec: SessionRecording, grid: GridSpec, segmenter: Optional[SegmenterConfig] = None
) -> SessionFeatures:
    '''Segment every frame and compute its cell statistics and gradients'''
    n = grid.n
    masks = segment_session(rec, segmenter)
    stats = np.full((len(rec), len(STATS), n, n), np.nan)
    valid = np.zeros(len(rec), dtype=bool)
    for k, (frame, (mask, quality)) in enumerate(zip(rec.frames, masks)):
        if not quality.valid:
            continue
        cells = cell_stats(frame, mask, grid, quality)
        stats[k] = cells.values
        valid[k] = cells.present.any()
    grad = spatial_gradient(stats[:, STATS.index('mean')])

    def column(name: str) -> np.ndarray:
        return np.array([np.nan if s is None else getattr(s, name) for s in rec.env], dtype=float)

    data = xr.Dataset(
        {
            'stats': (('time', 'stat', 'i', 'j'), stats),
            'grad': (('time', 'i', 'j'), grad),
            'valid': ('time', valid),
            'ambient_c': ('time', column('ambient_c')),
            'air_velocity_mps': ('time', column('air_velocity_mps')),
            'distance_cm': ('time', column('distance_cm')),
        },
        coords={'time': [f.timestamp for f in rec.frames], 'stat': list(STATS)},
        attrs={'session_id': rec.session_id, 'grid_n': n},
    )
    logger.debug('%s: %d/%d valid frames at n=%d', rec.session_id, int(valid.sum()), len(rec), n)
    return SessionFeatures(rec.manifest, grid, data)


def assemble_window_features(
    window: ObservationWindow,
    signature: ThermalSignature,
    env: WindowEnv,
    lags: Sequence[int] = DEFAULT_LAGS,
    corrections: Optional['NormalizationState'] = None,
) -> FeatureVector:
    '''Reduce one window's signature to a fixed-order feature vector

    For each of the 5n² per-frame channels: window mean and least-squares
    drift slope (°C/s). For each lag: window mean of Δ. Then the means of
    the sensor context over every frame of the window.

    Raises
    ------
    WindowDropped
        Fewer than half of the window's frames are valid.
    '''
    if len(signature) < math.ceil(MIN_VALID_FRACTION * window.length) or not len(signature):
        shown = f'{len(signature)}/{window.length}'
        raise WindowDropped(f'{window.session_id}@{window.start_index}: {shown} valid frames')

    stats, grad = signature.stack()
    n = stats.shape[-1]
    pos = signature.positions
    if corrections is not None:
        stats[:, :3] = corrections.correct_levels(stats[:, :3], env.ambient_c[pos], signature.device_model)

    channels = np.concatenate([stats, grad[:, None]], axis=1)
    means = masked_mean(channels)
    slopes = drift_slope(channels, pos / signature.sample_rate_hz)
    deltas = []
    for lag in lags:
        d = signature.delta_stack(lag)
        if corrections is not None:
            d = corrections.correct_deltas(d, env.air_velocity_mps[pos])
        deltas.append(masked_mean(d))
    if corrections is not None:
        slopes = corrections.correct_deltas(slopes[None], np.array([masked_mean(env.air_velocity_mps)]))[0]

    block = np.stack([means, slopes], axis=1)  # (channel, agg, i, j)
    values = [
        block.transpose(2, 3, 0, 1).ravel(),
        np.stack(deltas).ravel() if deltas else np.empty(0),
        np.array([masked_mean(c) for c in (env.ambient_c, env.air_velocity_mps, env.distance_cm)]),
    ]
    names = feature_names(n, lags)
    if corrections is not None:
        extra_names, extra_values = corrections.residual_features(np.stack(deltas) if deltas else None, lags)
        names += extra_names
        values.append(extra_values)
    return FeatureVector(
        window.session_id, window.start_index, window.label, tuple(names), np.concatenate(values)
    )


def assemble_session_windows(
    session: SessionFeatures,
    windows: Iterable[ObservationWindow],
    lags: Sequence[int] = DEFAULT_LAGS,
    corrections: Optional['NormalizationState'] = None,
) -> List[FeatureVector]:
    '''Feature vectors for every surviving window of a session'''
    out = []
    dropped = 0
    for window in windows:
        try:
            out.append(
                assemble_window_features(
                    window, session.signature(window, lags), session.env(window), lags, corrections
                )
            )
        except WindowDropped as err:
            dropped += 1
            logger.debug('window dropped: %s', err)
    if dropped:
        logger.info('%s: dropped %d windows with too many missing frames', session.session_id, dropped)
    return out


def feature_matrix(vectors: Sequence[FeatureVector]) -> pd.DataFrame:
    '''Stack feature vectors into a frame with the metadata columns last'''
    if not vectors:
        return pd.DataFrame(columns=META_COLUMNS)
    names = list(vectors[0].names)
    df = pd.DataFrame(np.stack([v.values for v in vectors]), columns=names)
    df['session_id'] = [v.session_id for v in vectors]
    df['window_start'] = [v.window_start for v in vectors]
    df['label'] = [v.label for v in vectors]
    return df


def write_feature_matrix(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, float_format='%.9g', na_rep='NaN')
