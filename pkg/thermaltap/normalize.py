'''Environmental and per-device corrections applied to grid features'''

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .base import BaselineMissing, Serializable
from .features import SessionFeatures, masked_mean
from .frame_store import ObservationWindow

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

MAX_WIND_K = 2.0
MIN_VELOCITY_SPREAD = 0.2


def _encode(values: np.ndarray) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float).ravel()]


def _decode(items: list, shape: Tuple[int, ...]) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in items], dtype=float).reshape(shape)


def ambient_correct(cell_temp: ArrayLike, ambient_c: ArrayLike) -> np.ndarray:
    '''Thermal load L = T − T_amb; cells with no ambient sample pass through'''
    cell_temp = np.asarray(cell_temp, dtype=float)
    ambient_c = np.asarray(ambient_c, dtype=float)
    return np.where(np.isfinite(ambient_c), cell_temp - ambient_c, cell_temp)


def wind_correct(delta: ArrayLike, air_velocity: ArrayLike, k: float) -> np.ndarray:
    '''ΔT′ = ΔT · (1 + k·v)

    Raises
    ------
    ValueError
        Negative air velocity.
    '''
    v = np.asarray(air_velocity, dtype=float)
    if np.any(v[np.isfinite(v)] < 0):
        raise ValueError(f'air velocity must be >= 0, got min {np.nanmin(v)}')
    v = np.where(np.isfinite(v), v, 0.0)
    return np.asarray(delta, dtype=float) * (1.0 + k * v)


@dataclass(frozen=True)
class WindModel(Serializable):
    k: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f'wind coefficient must be >= 0, got {self.k}')

    @property
    def json(self) -> dict:
        return {'k': self.k}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(float(obj['k']))


def fit_wind_coefficient(
    deltas: Sequence[float],
    velocities: Sequence[float],
    groups: Sequence[Hashable],
    bins: int = 5,
) -> WindModel:
    '''Least-squares k making wind-corrected deltas flat across velocity

    Deltas are averaged per (group, velocity bin), centered within each group,
    and k minimizes the residual variance of ΔT·(1 + k·v) in closed form.

    Parameters
    ----------
    deltas, velocities, groups : sequences
        One entry per training window; ``groups`` is usually the app label.
    bins : int
        Equal-width velocity bins.
    '''
    d = np.asarray(deltas, dtype=float)
    v = np.asarray(velocities, dtype=float)
    g = np.asarray(groups)
    ok = np.isfinite(d) & np.isfinite(v)
    d, v, g = d[ok], v[ok], g[ok]
    if v.size == 0 or np.ptp(v) < MIN_VELOCITY_SPREAD:
        logger.warning('velocity spread below %.1f m/s, wind coefficient set to 0', MIN_VELOCITY_SPREAD)
        return WindModel(0.0)

    edges = np.linspace(v.min(), v.max(), bins + 1)
    which = np.clip(np.searchsorted(edges, v, side='right') - 1, 0, bins - 1)
    a_parts, b_parts = [], []
    for group in np.unique(g):
        a, b = [], []
        for k in range(bins):
            sel = (g == group) & (which == k)
            if sel.any():
                a.append(d[sel].mean())
                b.append((d[sel] * v[sel]).mean())
        if len(a) < 2:
            continue
        a_parts.append(np.asarray(a) - np.mean(a))
        b_parts.append(np.asarray(b) - np.mean(b))
    if not a_parts:
        logger.warning('no group spans two velocity bins, wind coefficient set to 0')
        return WindModel(0.0)
    a_c = np.concatenate(a_parts)
    b_c = np.concatenate(b_parts)
    den = float(b_c @ b_c)
    k = 0.0 if den == 0 else -float(a_c @ b_c) / den
    k = float(np.clip(k, 0.0, MAX_WIND_K))
    logger.info('fitted wind coefficient k=%.4f from %d windows', k, d.size)
    return WindModel(k)


def wind_samples(
    session: SessionFeatures, windows: Sequence[ObservationWindow], lag_s: int
) -> Tuple[np.ndarray, np.ndarray]:
    '''Per-window cell-averaged Δ and mean air velocity, for fitting k'''
    delta = session.delta(lag_s)
    velocity = session.data['air_velocity_mps'].values
    valid = session.data['valid'].values
    out_d, out_v = [], []
    for window in windows:
        idx = np.asarray(window.frame_indices)
        idx = idx[valid[idx]]
        if idx.size == 0:
            continue
        out_d.append(float(masked_mean(delta[idx].ravel())))
        out_v.append(float(masked_mean(velocity[idx])))
    return np.asarray(out_d), np.asarray(out_v)


@dataclass
class DeltaBaselineTable(Serializable):
    '''Expected indoor Δ per (app, cell, lag); ``profiles[app]`` is (lag, i, j)'''

    n: int
    lags: Tuple[int, ...]
    profiles: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def apps(self) -> List[str]:
        return sorted(self.profiles)

    def lookup(self, app_label: str, cell: Tuple[int, int], lag: int) -> float:
        if app_label not in self.profiles or lag not in self.lags:
            return math.nan
        i, j = cell
        if not (0 <= i < self.n and 0 <= j < self.n):
            return math.nan
        return float(self.profiles[app_label][self.lags.index(lag), i, j])

    @property
    def json(self) -> dict:
        return {
            'n': self.n,
            'lags': list(self.lags),
            'profiles': {app: _encode(self.profiles[app]) for app in self.apps},
        }

    @classmethod
    def from_json(cls, obj: dict):
        n, lags = int(obj['n']), tuple(int(x) for x in obj['lags'])
        shape = (len(lags), n, n)
        return cls(n, lags, {app: _decode(v, shape) for app, v in obj['profiles'].items()})


def build_delta_table(sessions: Sequence[SessionFeatures], lags: Sequence[int]) -> DeltaBaselineTable:
    '''Mean Δ per app, cell and lag over the valid frames of indoor sessions'''
    if not sessions:
        raise ValueError('no sessions to build a delta table from')
    n = sessions[0].grid.n
    lags = tuple(int(x) for x in lags)
    sums: Dict[str, np.ndarray] = {}
    counts: Dict[str, np.ndarray] = {}
    for s in sessions:
        if s.manifest.environment != 'indoor':
            continue
        valid = s.data['valid'].values
        stack = np.stack([s.delta(lag)[valid] for lag in lags])  # (lag, t, i, j)
        ok = np.isfinite(stack)
        app = s.label
        sums[app] = sums.get(app, 0.0) + np.where(ok, stack, 0.0).sum(axis=1)
        counts[app] = counts.get(app, 0) + ok.sum(axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        profiles = {app: sums[app] / counts[app] for app in sums}
    logger.info('delta table over %d indoor apps, lags %s', len(profiles), lags)
    return DeltaBaselineTable(n, lags, profiles)


def delta_residual(
    observed: float, table: DeltaBaselineTable, app_label: str, cell: Tuple[int, int], lag: int
) -> float:
    '''Δ_obs − Δ_table; missing when the table has no entry'''
    return float(observed) - table.lookup(app_label, cell, lag)


@dataclass
class HeadsetBaseline(Serializable):
    '''Mean idle cell temperature for one headset model'''

    device_model: str
    values: np.ndarray
    counts: np.ndarray

    @property
    def missing(self) -> np.ndarray:
        return self.counts == 0

    @property
    def json(self) -> dict:
        return {
            'device_model': self.device_model,
            'n': int(self.values.shape[0]),
            'values': _encode(self.values),
            'counts': [int(c) for c in self.counts.ravel()],
        }

    @classmethod
    def from_json(cls, obj: dict):
        n = int(obj['n'])
        return cls(
            obj['device_model'],
            _decode(obj['values'], (n, n)),
            np.asarray(obj['counts'], dtype=int).reshape(n, n),
        )


@dataclass
class BaselineStore(Serializable):
    baselines: Dict[str, HeadsetBaseline] = field(default_factory=dict)

    def get(self, device_model: str) -> HeadsetBaseline:
        try:
            return self.baselines[device_model]
        except KeyError:
            raise BaselineMissing(f'no idle baseline for device {device_model!r}') from None

    def __contains__(self, device_model: str) -> bool:
        return device_model in self.baselines

    @property
    def json(self) -> dict:
        return {device: self.baselines[device].json for device in sorted(self.baselines)}

    @classmethod
    def from_json(cls, obj: dict):
        return cls({device: HeadsetBaseline.from_json(b) for device, b in obj.items()})


def build_headset_baseline(sessions: Sequence[SessionFeatures], ambient: bool = False) -> BaselineStore:
    '''Per-device mean of idle (home) cell means over valid frames

    With ``ambient`` the baseline is built on ambient-corrected levels so it
    can be subtracted after ambient correction.
    '''
    sums: Dict[str, np.ndarray] = {}
    counts: Dict[str, np.ndarray] = {}
    for s in sessions:
        if not s.manifest.is_idle:
            continue
        valid = s.data['valid'].values
        means = s.mean_series()[valid]
        if ambient:
            amb = s.data['ambient_c'].values[valid]
            means = ambient_correct(means, amb[:, None, None])
        ok = np.isfinite(means)
        device = s.manifest.device_model
        sums[device] = sums.get(device, 0.0) + np.where(ok, means, 0.0).sum(axis=0)
        counts[device] = counts.get(device, 0) + ok.sum(axis=0)
    store = BaselineStore()
    for device in sums:
        with np.errstate(invalid='ignore', divide='ignore'):
            values = sums[device] / counts[device]
        store.baselines[device] = HeadsetBaseline(device, values, np.asarray(counts[device]))
    logger.info('idle baselines for %s', sorted(store.baselines))
    return store


def apply_headset_baseline(cell_mean_series: np.ndarray, baseline: HeadsetBaseline) -> np.ndarray:
    '''T′ = T − B per cell; cells without idle samples pass through unmodified'''
    missing = baseline.missing | ~np.isfinite(baseline.values)
    if missing.any():
        logger.debug('%s: %d baseline cells missing, left uncorrected', baseline.device_model, int(missing.sum()))
    offset = np.where(missing, 0.0, baseline.values)
    return np.asarray(cell_mean_series, dtype=float) - offset


@dataclass(frozen=True)
class SignatureRatio:
    sim_app: float
    sim_dev: float
    ratio: Optional[float]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def signature_ratio(groups: Mapping[Tuple[str, str], np.ndarray]) -> SignatureRatio:
    '''R = Sim_app / Sim_dev over per-(app, device) centroid vectors

    ``ratio`` is None when Sim_dev is 0.

    Raises
    ------
    ValueError
        Fewer than two devices or two apps, or missing values in the vectors.
    '''
    centroids = {key: np.asarray(v, dtype=float).reshape(-1, np.shape(v)[-1]).mean(axis=0) for key, v in groups.items()}
    if any(not np.all(np.isfinite(c)) for c in centroids.values()):
        raise ValueError('signature ratio needs imputed vectors without missing values')
    apps = {app for app, _ in centroids}
    devices = {device for _, device in centroids}
    if len(apps) < 2 or len(devices) < 2:
        raise ValueError(f'need >= 2 apps and >= 2 devices, got {len(apps)} apps and {len(devices)} devices')

    same_app, same_dev = [], []
    for (a1, d1), (a2, d2) in itertools.combinations(sorted(centroids), 2):
        sim = _cosine(centroids[(a1, d1)], centroids[(a2, d2)])
        if a1 == a2 and d1 != d2:
            same_app.append(sim)
        elif a1 != a2 and d1 == d2:
            same_dev.append(sim)
    sim_app = float(np.mean(same_app)) if same_app else math.nan
    sim_dev = float(np.mean(same_dev)) if same_dev else math.nan
    ratio = None if sim_dev == 0 or not np.isfinite(sim_dev) else sim_app / sim_dev
    return SignatureRatio(sim_app, sim_dev, ratio)


@dataclass
class NormalizationState(Serializable):
    '''Fitted corrections applied during window assembly

    Order: ambient, then wind, then the headset baseline. ``delta_table``
    adds indoor-residual features.
    '''

    ambient: bool = False
    wind: Optional[WindModel] = None
    baselines: Optional[BaselineStore] = None
    delta_table: Optional[DeltaBaselineTable] = None

    @property
    def json(self) -> dict:
        return {
            'ambient': self.ambient,
            'wind': None if self.wind is None else self.wind.json,
            'baselines': None if self.baselines is None else self.baselines.json,
            'delta_table': None if self.delta_table is None else self.delta_table.json,
        }

    @classmethod
    def from_json(cls, obj: dict):
        return cls(
            ambient=bool(obj.get('ambient', False)),
            wind=None if obj.get('wind') is None else WindModel.from_json(obj['wind']),
            baselines=None if obj.get('baselines') is None else BaselineStore.from_json(obj['baselines']),
            delta_table=None if obj.get('delta_table') is None else DeltaBaselineTable.from_json(obj['delta_table']),
        )

    def correct_levels(self, levels: np.ndarray, ambient_c: np.ndarray, device_model: str) -> np.ndarray:
        '''Correct (time, [min, max, mean], i, j) level channels'''
        out = levels
        if self.ambient:
            missing = ~np.isfinite(ambient_c)
            if missing.any():
                logger.debug('%d frames without ambient left uncorrected', int(missing.sum()))
            out = ambient_correct(out, ambient_c.reshape(-1, 1, 1, 1))
        if self.baselines is not None:
            out = apply_headset_baseline(out, self.baselines.get(device_model))
        return out

    def correct_deltas(self, deltas: np.ndarray, air_velocity: np.ndarray) -> np.ndarray:
        '''Wind-correct (time, ...) delta or slope channels'''
        if self.wind is None or self.wind.k == 0:
            return deltas
        v = np.asarray(air_velocity, dtype=float).reshape((-1,) + (1,) * (deltas.ndim - 1))
        return wind_correct(deltas, v, self.wind.k)

    def residual_features(
        self, window_deltas: Optional[np.ndarray], lags: Sequence[int]
    ) -> Tuple[List[str], np.ndarray]:
        '''Mean absolute residual against each indoor app profile, per lag'''
        if self.delta_table is None:
            return [], np.empty(0)
        names, values = [], []
        for li, lag in enumerate(lags):
            for app in self.delta_table.apps:
                names.append(f'resid{lag}_{app}')
                if window_deltas is None or lag not in self.delta_table.lags:
                    values.append(math.nan)
                    continue
                profile = self.delta_table.profiles[app][self.delta_table.lags.index(lag)]
                resid = np.abs(window_deltas[li] - profile).ravel()
                values.append(float(masked_mean(resid)))
        return names, np.asarray(values, dtype=float)


__all__ = [
    'ambient_correct',
    'wind_correct',
    'WindModel',
    'fit_wind_coefficient',
    'wind_samples',
    'DeltaBaselineTable',
    'build_delta_table',
    'delta_residual',
    'HeadsetBaseline',
    'BaselineStore',
    'build_headset_baseline',
    'apply_headset_baseline',
    'SignatureRatio',
    'signature_ratio',
    'NormalizationState',
]
