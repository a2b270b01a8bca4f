'''On-disk recording format: frames, sensor logs, manifests, windows

Dataset layout::

    <dataset>/<session_id>/manifest.json
                          /frames/frame_<epochms>.csv
                          /sensors.csv
                          /masks/mask_<epochms>.csv   (optional)
'''

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import xarray as xr

from .base import (
    EmptySessionError,
    OrderError,
    ParseError,
    SchemaError,
    Serializable,
)
from .dataarray import frame_schema
from .documents import validate_document

logger = logging.getLogger(__name__)

PathT = Union[str, Path]

IDLE_LABEL = 'home'
PHASES = ('baseline', 'heat_up', 'steady', 'cool_down')
SENSOR_COLUMNS = ['timestamp_ms', 'ambient_c', 'humidity_pct', 'air_velocity_mps', 'distance_cm']
DEFAULT_TOLERANCE_MS = 500
FRAME_DECIMALS = 6

_FRAME_NAME = re.compile(r'^frame_(\d+)\.csv$')
_MASK_NAME = re.compile(r'^mask_(\d+)\.csv$')


@dataclass(frozen=True)
class RadiometricFrame:
    '''One timestamped matrix of absolute per-pixel temperatures (°C)'''

    timestamp: int
    temps: np.ndarray
    frame_index: int = 0
    flags: Tuple[str, ...] = ()

    @property
    def height(self) -> int:
        return int(self.temps.shape[0])

    @property
    def width(self) -> int:
        return int(self.temps.shape[1])

    def to_dataarray(self) -> xr.DataArray:
        return xr.DataArray(
            self.temps,
            dims=('y', 'x'),
            name='temperature',
            attrs={'timestamp_ms': self.timestamp, 'units': 'degC'},
        )


@dataclass(frozen=True)
class SensorSample:
    timestamp: int
    ambient_c: float
    humidity_pct: float
    air_velocity_mps: float
    distance_cm: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise SchemaError(f'humidity {self.humidity_pct} outside [0, 100]')
        if self.air_velocity_mps < 0:
            raise SchemaError(f'air velocity {self.air_velocity_mps} < 0')
        if self.distance_cm <= 0:
            raise SchemaError(f'distance {self.distance_cm} <= 0')


@dataclass(frozen=True)
class SessionManifest(Serializable):
    session_id: str
    device_model: str
    app_label: str
    environment: str
    phase_marks: Tuple[int, int, int, int]
    sample_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        if not self.app_label:
            raise SchemaError('app_label must be nonempty')
        if self.environment not in ('indoor', 'outdoor'):
            raise SchemaError(f'environment {self.environment!r} not in (indoor, outdoor)')
        if len(self.phase_marks) != 4 or any(
            a >= b for a, b in zip(self.phase_marks, self.phase_marks[1:])
        ):
            raise SchemaError(f'phase marks must be four increasing timestamps: {self.phase_marks}')
        if self.sample_rate_hz <= 0:
            raise SchemaError(f'sample rate {self.sample_rate_hz} <= 0')

    @property
    def is_idle(self) -> bool:
        return self.app_label == IDLE_LABEL

    @property
    def json(self) -> dict:
        return {
            'session_id': self.session_id,
            'device_model': self.device_model,
            'app_label': self.app_label,
            'environment': self.environment,
            'phase_marks': dict(zip(PHASES, (int(t) for t in self.phase_marks))),
            'sample_rate_hz': self.sample_rate_hz,
        }

    @classmethod
    def from_json(cls, obj: dict):
        validate_document(obj, 'manifest')
        marks = obj['phase_marks']
        return cls(
            session_id=obj['session_id'],
            device_model=obj['device_model'],
            app_label=obj['app_label'],
            environment=obj['environment'],
            phase_marks=tuple(int(marks[p]) for p in PHASES),  # type: ignore[arg-type]
            sample_rate_hz=float(obj.get('sample_rate_hz', 1.0)),
        )


@dataclass(frozen=True)
class SessionRecording:
    '''Frames of one session joined to their nearest sensor sample

    ``env[k]`` is None exactly when ``k`` is in ``gaps``. ``masks`` holds
    ingested masks keyed by frame position.
    '''

    manifest: SessionManifest
    frames: Tuple[RadiometricFrame, ...]
    env: Tuple[Optional[SensorSample], ...]
    gaps: FrozenSet[int] = frozenset()
    masks: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def session_id(self) -> str:
        return self.manifest.session_id

    @property
    def label(self) -> str:
        return self.manifest.app_label

    def to_dataset(self) -> xr.Dataset:
        '''Stack the session into a (time, y, x) Dataset with per-frame sensor columns'''
        times = np.array([f.timestamp for f in self.frames], dtype=np.int64)

        def column(name: str) -> np.ndarray:
            return np.array(
                [np.nan if s is None else getattr(s, name) for s in self.env], dtype=float
            )

        return xr.Dataset(
            {
                'temperature': (('time', 'y', 'x'), np.stack([f.temps for f in self.frames])),
                'ambient_c': ('time', column('ambient_c')),
                'humidity_pct': ('time', column('humidity_pct')),
                'air_velocity_mps': ('time', column('air_velocity_mps')),
                'distance_cm': ('time', column('distance_cm')),
                'gap': ('time', np.array([k in self.gaps for k in range(len(self))])),
            },
            coords={'time': times},
            attrs=self.manifest.json | {'phase_marks': list(self.manifest.phase_marks)},
        )


@dataclass(frozen=True)
class ObservationWindow:
    session_id: str
    start_index: int
    length: int
    label: str

    @property
    def frame_indices(self) -> range:
        return range(self.start_index, self.start_index + self.length)

    def frames(self, rec: SessionRecording) -> Tuple[RadiometricFrame, ...]:
        return rec.frames[self.start_index : self.start_index + self.length]


def _read_matrix(path: Path) -> np.ndarray:
    text = path.read_text()
    if not text.strip():
        raise ParseError(f'{path}: empty frame file')
    try:
        return np.loadtxt(text.splitlines(), delimiter=',', ndmin=2, dtype=np.float64)
    except ValueError as err:
        raise ParseError(f'{path}: malformed matrix, ragged rows or non-numeric cells ({err})') from err


def timestamp_from_name(path: PathT, pattern: re.Pattern = _FRAME_NAME) -> int:
    match = pattern.match(Path(path).name)
    if match is None:
        raise ParseError(f'{path}: file name does not carry an epoch-ms timestamp')
    return int(match.group(1))


def load_frame(path: PathT, frame_index: int = 0, timestamp: Optional[int] = None) -> RadiometricFrame:
    '''Parse one ``frame_<epochms>.csv`` file

    Parameters
    ----------
    path : path-like
        Rectangular CSV of °C values, one line per pixel row.
    frame_index : int
        Ordinal within the session.
    timestamp : int, optional
        Epoch milliseconds; parsed from the file name when omitted.

    Raises
    ------
    ParseError
        Empty file, ragged rows or non-numeric cells.
    NonFiniteError
        A NaN/inf cell (also a ``ValueError``), reported by (row, col).
    '''
    path = Path(path)
    if timestamp is None:
        timestamp = timestamp_from_name(path)
    frame = RadiometricFrame(int(timestamp), _read_matrix(path), frame_index)
    flags = frame_schema().validate(frame.to_dataarray())
    return replace(frame, flags=tuple(flags))


def write_frame(frame: RadiometricFrame, directory: PathT, decimals: int = FRAME_DECIMALS) -> Path:
    path = Path(directory) / f'frame_{frame.timestamp}.csv'
    np.savetxt(path, frame.temps, fmt=f'%.{decimals}f', delimiter=',')
    return path


def load_mask_bits(path: PathT) -> np.ndarray:
    bits = _read_matrix(Path(path))
    if ((bits != 0) & (bits != 1)).any():
        raise ParseError(f'{path}: mask values must be 0 or 1')
    return bits.astype(bool)


def write_mask_bits(bits: np.ndarray, timestamp: int, directory: PathT) -> Path:
    path = Path(directory) / f'mask_{timestamp}.csv'
    np.savetxt(path, bits.astype(np.uint8), fmt='%d', delimiter=',')
    return path


def load_sensor_log(path: PathT) -> List[SensorSample]:
    '''Read ``sensors.csv``; timestamps must be strictly increasing'''
    df = pd.read_csv(path)
    missing = set(SENSOR_COLUMNS) - set(df.columns)
    if missing:
        raise ParseError(f'{path}: sensor log lacks columns {sorted(missing)}')
    if df[SENSOR_COLUMNS].isna().any().any():
        raise ParseError(f'{path}: sensor log has empty cells')
    ts = df['timestamp_ms'].to_numpy()
    if len(ts) > 1 and (np.diff(ts) <= 0).any():
        row = int(np.argmax(np.diff(ts) <= 0)) + 1
        raise OrderError(f'{path}: sensor timestamps not strictly increasing at row {row}')
    return [
        SensorSample(
            int(r.timestamp_ms),
            float(r.ambient_c),
            float(r.humidity_pct),
            float(r.air_velocity_mps),
            float(r.distance_cm),
        )
        for r in df.itertuples(index=False)
    ]


def write_sensor_log(samples: Sequence[SensorSample], path: PathT) -> Path:
    df = pd.DataFrame(
        {
            'timestamp_ms': [s.timestamp for s in samples],
            'ambient_c': [s.ambient_c for s in samples],
            'humidity_pct': [s.humidity_pct for s in samples],
            'air_velocity_mps': [s.air_velocity_mps for s in samples],
            'distance_cm': [s.distance_cm for s in samples],
        }
    )
    df.to_csv(path, index=False, float_format='%.4f')
    return Path(path)


def load_manifest(path: PathT) -> SessionManifest:
    with open(path) as f:
        return SessionManifest.from_json(json.load(f))


def write_manifest(manifest: SessionManifest, path: PathT) -> Path:
    Path(path).write_text(manifest.to_json(indent=2, sort_keys=True) + '\n')
    return Path(path)


def align_session(
    frames: Sequence[RadiometricFrame],
    sensor_log: Sequence[SensorSample],
    manifest: SessionManifest,
    tolerance_ms: int = DEFAULT_TOLERANCE_MS,
    masks: Optional[Mapping[int, np.ndarray]] = None,
) -> SessionRecording:
    '''Join every frame to its nearest sensor sample

    Ties go to the earlier sample. Frames without a sample within
    ``tolerance_ms`` are recorded in ``gaps``.

    Parameters
    ----------
    masks : mapping, optional
        Ingested masks keyed by frame timestamp.

    Raises
    ------
    EmptySessionError
    OrderError
        Frame timestamps not strictly increasing.
    '''
    if not frames:
        raise EmptySessionError(f'session {manifest.session_id} has no frames')
    if not sensor_log:
        raise EmptySessionError(f'session {manifest.session_id} has no sensor samples')

    frame_ts = np.array([f.timestamp for f in frames], dtype=np.int64)
    if len(frame_ts) > 1 and (np.diff(frame_ts) <= 0).any():
        k = int(np.argmax(np.diff(frame_ts) <= 0)) + 1
        raise OrderError(f'frame timestamps not increasing at position {k}: {frame_ts[k]}')
    sample_ts = np.array([s.timestamp for s in sensor_log], dtype=np.int64)

    # candidates: the sample at or before each frame and the one after it
    right = np.searchsorted(sample_ts, frame_ts, side='left')
    env: List[Optional[SensorSample]] = []
    gaps = set()
    for k, (t, r) in enumerate(zip(frame_ts, right)):
        best = None
        if r < len(sample_ts) and sample_ts[r] == t:
            best = r
        else:
            before = r - 1 if r > 0 else None
            after = r if r < len(sample_ts) else None
            if before is None:
                best = after
            elif after is None:
                best = before
            else:
                best = before if t - sample_ts[before] <= sample_ts[after] - t else after
        if best is None or abs(int(sample_ts[best]) - int(t)) > tolerance_ms:
            env.append(None)
            gaps.add(k)
        else:
            env.append(sensor_log[best])

    if gaps:
        logger.debug('%s: %d frames without a sensor sample', manifest.session_id, len(gaps))

    indexed = tuple(
        f if f.frame_index == k else RadiometricFrame(f.timestamp, f.temps, k, f.flags)
        for k, f in enumerate(frames)
    )
    by_position: Dict[int, np.ndarray] = {}
    if masks:
        position = {int(t): k for k, t in enumerate(frame_ts)}
        for t, bits in masks.items():
            if int(t) in position:
                by_position[position[int(t)]] = bits
    return SessionRecording(manifest, indexed, tuple(env), frozenset(gaps), by_position)


def load_session(session_dir: PathT, tolerance_ms: int = DEFAULT_TOLERANCE_MS) -> SessionRecording:
    '''Load and align one session directory'''
    session_dir = Path(session_dir)
    if not session_dir.is_dir():
        raise FileNotFoundError(f'no session directory at {session_dir}')
    manifest = load_manifest(session_dir / 'manifest.json')
    frame_paths = sorted(
        (session_dir / 'frames').glob('frame_*.csv'), key=lambda p: timestamp_from_name(p)
    )
    frames = [load_frame(p, k) for k, p in enumerate(frame_paths)]
    for frame in frames:
        if (frame.height, frame.width) != (frames[0].height, frames[0].width):
            raise SchemaError(
                f'{session_dir}: frame {frame.timestamp} is {frame.height}x{frame.width}, '
                f'expected {frames[0].height}x{frames[0].width}'
            )
    sensors = load_sensor_log(session_dir / 'sensors.csv')

    masks = {}
    mask_dir = session_dir / 'masks'
    if mask_dir.is_dir():
        for p in mask_dir.glob('mask_*.csv'):
            bits = load_mask_bits(p)
            if frames and bits.shape != frames[0].temps.shape:
                raise SchemaError(f'{p}: mask shape {bits.shape} != frame shape')
            masks[timestamp_from_name(p, _MASK_NAME)] = bits
    return align_session(frames, sensors, manifest, tolerance_ms, masks)


def list_sessions(dataset: PathT) -> List[Path]:
    '''Session directories of a dataset, sorted by name'''
    dataset = Path(dataset)
    if not dataset.is_dir():
        raise FileNotFoundError(f'no dataset directory at {dataset}')
    return sorted(p for p in dataset.iterdir() if (p / 'manifest.json').is_file())


class Timeline(Protocol):
    manifest: SessionManifest

    @property
    def session_id(self) -> str: ...

    @property
    def label(self) -> str: ...

    def __len__(self) -> int: ...


def window_session(
    rec: Timeline, window_s: int, stride_s: Optional[int] = None
) -> List[ObservationWindow]:
    '''Cut a session into fixed-length windows

    Windows never span sessions and a trailing partial window is dropped.
    A window longer than the session yields no windows.
    '''
    stride_s = window_s if stride_s is None else stride_s
    if window_s < 1 or stride_s < 1:
        raise ValueError(f'window ({window_s}) and stride ({stride_s}) must be >= 1 s')
    rate = rec.manifest.sample_rate_hz
    length = max(1, int(round(window_s * rate)))
    step = max(1, int(round(stride_s * rate)))
    return [
        ObservationWindow(rec.session_id, start, length, rec.label)
        for start in range(0, len(rec) - length + 1, step)
    ]
