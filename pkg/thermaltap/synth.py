'''Labeled synthetic recordings from 2D heat diffusion over a headset chassis

Each session integrates, on chassis pixels only,

    dT/dt = alpha * lap(T) + S(t) - (h + c_v * v(t)) * (T - T_amb) - fan(t)

with an insulated chassis edge, an explicit five-point stencil and enough
internal substeps per 1 s output frame to keep the scheme stable. Background
pixels sit at ambient. Output follows the frame_store directory layout.
'''

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import dask
import numpy as np

from .base import ConfigError, SchemaError, Serializable
from .documents import validate_document
from .frame_store import (
    IDLE_LABEL,
    RadiometricFrame,
    SensorSample,
    SessionManifest,
    write_frame,
    write_manifest,
    write_mask_bits,
    write_sensor_log,
)
from .parallel import compute

logger = logging.getLogger(__name__)

PathT = Union[str, Path]

STABILITY_LIMIT = 0.2
PHASE_FRACTIONS = (0.05, 0.25, 0.50, 0.20)
NOISE_STD = 0.04
START_MS = 1_700_000_000_000

# overrides of the full-resolution suite defaults for fast runs
LIGHT_SUITE = {'frame_shape': (64, 96), 'decimals': 2, 'duration_s': 300, 'sessions_per_app': 4}


@dataclass(frozen=True)
class HeatSource:
    '''Gaussian footprint in chassis coordinates (u across, v down, both in [0, 1])

    ``power`` is the peak heating rate in °C/s at full load. Sources sharing a
    ``group`` share one workload schedule.
    '''

    name: str
    center: Tuple[float, float]
    sigma: Tuple[float, float]
    power: float
    group: str = ''

    @property
    def load_group(self) -> str:
        return self.group or self.name


@dataclass(frozen=True)
class FanCurve:
    '''Pulsed convective sink over the vent once the chassis maximum passes ``trigger_c``'''

    trigger_c: float = math.inf
    amplitude: float = 0.0
    period_s: float = 20.0
    vent: Tuple[float, float] = (0.5, 0.1)
    sigma: Tuple[float, float] = (0.3, 0.1)

    def active(self, t: int, max_temp: float) -> bool:
        return max_temp > self.trigger_c and (t % self.period_s) < self.period_s / 2


@dataclass(frozen=True)
class DeviceProfile:
    '''Chassis geometry, heat sources and thermal constants of one headset model

    Parameters
    ----------
    aspect : float
        Width over height of the chassis bounding box.
    width_frac : float
        Chassis width as a fraction of the frame width.
    alpha : float
        Diffusivity on the unit pixel grid, 1/s.
    h : float
        Coupling to ambient, 1/s.
    c_v : float
        Extra convective loss per m/s of air velocity, 1/s.
    resting_load : float
        Uniform heating from the wearer's face, °C/s.
    idle_loads : dict
        Load per source group that is always on while the headset is awake.
    offset_amplitude, offset_gradient, offset_bump
        Static resting pattern added to observed chassis temperatures.
    '''

    name: str
    sources: Tuple[HeatSource, ...]
    fan: FanCurve = field(default_factory=FanCurve)
    aspect: float = 2.0
    width_frac: float = 0.6
    alpha: float = 0.2
    h: float = 0.02
    c_v: float = 0.012
    resting_load: float = 0.16
    idle_loads: Mapping[str, float] = field(default_factory=lambda: {'soc': 0.15, 'display': 0.25})
    offset_amplitude: float = 0.0
    offset_gradient: Tuple[float, float] = (0.0, 0.0)
    offset_bump: Tuple[float, float] = (0.5, 0.5)

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ConfigError(f'{self.name}: diffusivity must be > 0, got {self.alpha}')
        if self.h < 0 or self.c_v < 0:
            raise ConfigError(f'{self.name}: loss coefficients must be >= 0')
        if not 1.3 <= self.aspect <= 2.8:
            raise ConfigError(f'{self.name}: chassis aspect {self.aspect} outside [1.3, 2.8]')
        for source in self.sources:
            if not all(0.0 <= c <= 1.0 for c in source.center):
                raise ConfigError(f'{self.name}: source {source.name} centered off the chassis')

    def chassis(self, shape: Tuple[int, int]) -> np.ndarray:
        '''Rounded-rectangle face with a nose-bridge notch, centered in the frame'''
        u, v = self.coordinates(shape)
        x, y = 2 * u - 1, 2 * v - 1
        bits = x**4 + y**4 <= 1.0
        notch = (np.abs(x) < 0.2) & (y > 0.55)
        return bits & ~notch

    def coordinates(self, shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
        height, width = shape
        half_w = self.width_frac * width / 2
        half_h = half_w / self.aspect
        rows, cols = np.mgrid[0:height, 0:width].astype(float)
        u = (cols + 0.5 - width / 2) / (2 * half_w) + 0.5
        v = (rows + 0.5 - height / 2) / (2 * half_h) + 0.5
        return u, v

    def footprint(self, center: Tuple[float, float], sigma: Tuple[float, float], shape: Tuple[int, int]) -> np.ndarray:
        u, v = self.coordinates(shape)
        g = np.exp(-0.5 * (((u - center[0]) / sigma[0]) ** 2 + ((v - center[1]) / sigma[1]) ** 2))
        return np.where(self.chassis(shape), g, 0.0)

    def offset_field(self, shape: Tuple[int, int]) -> np.ndarray:
        if self.offset_amplitude == 0:
            return np.zeros(shape)
        u, v = self.coordinates(shape)
        gu, gv = self.offset_gradient
        ramp = gu * (u - 0.5) + gv * (v - 0.5)
        bump = 0.5 * self.footprint(self.offset_bump, (0.2, 0.3), shape)
        return self.offset_amplitude * np.where(self.chassis(shape), ramp + bump, 0.0)


def _face_sources(
    soc: Tuple[float, float] = (0.5, 0.45),
    soc_power: float = 0.10,
    battery_power: float = 0.04,
) -> Tuple[HeatSource, ...]:
    return (
        HeatSource('soc', soc, (0.12, 0.2), soc_power),
        HeatSource('display_left', (0.27, 0.5), (0.12, 0.25), 0.05, 'display'),
        HeatSource('display_right', (0.73, 0.5), (0.12, 0.25), 0.05, 'display'),
        HeatSource('battery', (0.5, 0.85), (0.25, 0.1), battery_power),
        HeatSource('radio', (0.15, 0.2), (0.08, 0.12), 0.06),
        HeatSource('camera_left', (0.1, 0.75), (0.07, 0.12), 0.04, 'cameras'),
        HeatSource('camera_right', (0.9, 0.75), (0.07, 0.12), 0.04, 'cameras'),
    )


DEVICE_PRESETS: Dict[str, DeviceProfile] = {
    'quest3': DeviceProfile(
        'quest3',
        _face_sources(),
        FanCurve(trigger_c=33.0, amplitude=0.03, period_s=20.0),
        aspect=2.0,
        alpha=0.20,
        h=0.020,
        c_v=0.012,
        offset_amplitude=0.8,
        offset_gradient=(1.0, 0.0),
        offset_bump=(0.3, 0.4),
    ),
    'quest2': DeviceProfile(
        'quest2',
        _face_sources(soc=(0.45, 0.5), soc_power=0.115),
        FanCurve(trigger_c=32.5, amplitude=0.025, period_s=30.0, vent=(0.5, 0.9)),
        aspect=1.8,
        alpha=0.15,
        h=0.025,
        c_v=0.010,
        resting_load=0.18,
        offset_amplitude=1.5,
        offset_gradient=(0.0, 1.0),
        offset_bump=(0.7, 0.3),
    ),
    # battery sits in the rear strap, so the front face barely sees it
    'vive_focus': DeviceProfile(
        'vive_focus',
        _face_sources(soc=(0.55, 0.4), battery_power=0.012),
        FanCurve(trigger_c=34.0, amplitude=0.04, period_s=15.0),
        aspect=2.2,
        alpha=0.25,
        h=0.018,
        c_v=0.015,
        resting_load=0.15,
        offset_amplitude=1.2,
        offset_gradient=(-1.0, 0.5),
        offset_bump=(0.5, 0.7),
    ),
}


@dataclass(frozen=True)
class AppWorkloadProfile:
    '''Per-group load while the app runs, with periodic and random modulation

    Loads apply from the start of heat-up until cool-down; the baseline phase
    carries the device's idle loads only. ``residual_c`` is extra heat left on
    the SoC at session start.
    '''

    app_label: str
    loads: Mapping[str, float] = field(default_factory=dict)
    jitter: float = 0.05
    period_s: float = 60.0
    pulse_depth: float = 0.0
    residual_c: Tuple[float, float] = (0.0, 0.0)

    def schedule(self, duration: int, marks: Sequence[int], rng: np.random.Generator) -> Dict[str, np.ndarray]:
        '''Per-second load of every group for one session'''
        t = np.arange(duration)
        running = (t >= marks[1]) & (t < marks[3])
        phase = rng.uniform(0, 2 * np.pi)
        pulse = 1 + self.pulse_depth * np.sin(2 * np.pi * t / self.period_s + phase)
        out = {}
        for group in sorted(self.loads):
            noise = rng.normal(0.0, self.jitter, duration)
            smooth = np.empty(duration)
            acc = 0.0
            for k, e in enumerate(noise):
                acc = 0.9 * acc + e
                smooth[k] = acc
            modulation = np.clip(pulse * (1 + 0.3 * smooth), 0.0, None)
            out[group] = np.where(running, self.loads[group] * modulation, 0.0)
        return out


APP_PROFILES: Dict[str, AppWorkloadProfile] = {
    IDLE_LABEL: AppWorkloadProfile(IDLE_LABEL, {}, residual_c=(1.0, 3.0)),
    'youtube': AppWorkloadProfile('youtube', {'soc': 0.35, 'display': 0.55, 'radio': 0.3}),
    'media_player': AppWorkloadProfile('media_player', {'soc': 0.3, 'display': 0.5, 'battery': 0.35}),
    'zoom_web': AppWorkloadProfile(
        'zoom_web', {'soc': 0.5, 'radio': 0.9, 'cameras': 0.4}, period_s=40.0, pulse_depth=0.2
    ),
    'arkio': AppWorkloadProfile('arkio', {'soc': 0.75, 'display': 0.6, 'cameras': 0.7}),
    'first_hand': AppWorkloadProfile(
        'first_hand', {'soc': 1.0, 'display': 0.5, 'cameras': 1.2}, period_s=25.0, pulse_depth=0.25
    ),
    'vrfs': AppWorkloadProfile('vrfs', {'soc': 1.25, 'display': 0.9, 'battery': 0.5, 'radio': 0.2}),
}


@dataclass(frozen=True)
class SimConfig(Serializable):
    '''Settings of one simulated session

    ``ambient`` and ``wind`` are optional per-second trajectories; when absent
    they are drawn for the environment. ``substeps`` fixes the internal step
    count; when None the smallest stable count is used.
    '''

    frame_shape: Tuple[int, int] = (192, 256)
    duration_s: int = 600
    environment: str = 'indoor'
    ambient: Optional[Tuple[float, ...]] = None
    wind: Optional[Tuple[float, ...]] = None
    noise_std: float = NOISE_STD
    seed: int = 0
    substeps: Optional[int] = None
    decimals: int = 6
    mask_every: int = 10
    start_ms: Optional[int] = None

    def __post_init__(self) -> None:
        if self.environment not in ('indoor', 'outdoor'):
            raise ConfigError(f'environment {self.environment!r} not in (indoor, outdoor)')
        if self.duration_s < 4:
            raise ConfigError(f'duration {self.duration_s}s too short for four phases')
        for name in ('ambient', 'wind'):
            series = getattr(self, name)
            if series is not None and len(series) != self.duration_s:
                raise ConfigError(f'{name} trajectory has {len(series)} samples, expected {self.duration_s}')

    def stable_substeps(self, alpha: float) -> int:
        '''Internal steps per output second

        Raises
        ------
        ConfigError
            A fixed ``substeps`` whose step exceeds ``0.2 / alpha``.
        '''
        if self.substeps is None:
            return max(1, math.ceil(alpha / STABILITY_LIMIT - 1e-12))
        if self.substeps < 1 or 1.0 / self.substeps > STABILITY_LIMIT / alpha + 1e-12:
            raise ConfigError(
                f'{self.substeps} substeps per second is unstable for alpha={alpha} '
                f'(need dt_sub <= {STABILITY_LIMIT / alpha:.4g} s)'
            )
        return self.substeps

    def phase_marks(self) -> Tuple[int, int, int, int]:
        '''Start second of each phase'''
        starts = np.concatenate([[0], np.cumsum(PHASE_FRACTIONS[:-1])]) * self.duration_s
        marks = tuple(int(round(s)) for s in starts)
        if any(a >= b for a, b in zip(marks, marks[1:])):
            raise ConfigError(f'duration {self.duration_s}s too short for four phases')
        return marks  # type: ignore[return-value]

    @property
    def json(self) -> dict:
        return {
            'frame_shape': list(self.frame_shape),
            'duration_s': self.duration_s,
            'environment': self.environment,
            'ambient': None if self.ambient is None else list(self.ambient),
            'wind': None if self.wind is None else list(self.wind),
            'noise_std': self.noise_std,
            'seed': self.seed,
            'substeps': self.substeps,
            'decimals': self.decimals,
            'mask_every': self.mask_every,
            'start_ms': self.start_ms,
        }

    @classmethod
    def from_json(cls, obj: dict):
        obj = dict(obj)
        obj['frame_shape'] = tuple(obj.get('frame_shape', (192, 256)))
        for key in ('ambient', 'wind'):
            if obj.get(key) is not None:
                obj[key] = tuple(obj[key])
        return cls(**obj)


@dataclass(frozen=True)
class Environment:
    '''Per-second ambient, wind, humidity and camera distance of one session'''

    ambient: np.ndarray
    wind: np.ndarray
    humidity: np.ndarray
    distance: np.ndarray


def _gusts(duration: int, mean: float, rng: np.random.Generator) -> np.ndarray:
    # mean-reverting gusts, clipped at still air
    v = np.empty(duration)
    x = mean
    for k in range(duration):
        x += 0.05 * (mean - x) + rng.normal(0.0, 0.25)
        v[k] = x
    return np.clip(v, 0.0, None)


def draw_environment(config: SimConfig, rng: np.random.Generator) -> Environment:
    d = config.duration_s
    t = np.arange(d)
    if config.environment == 'outdoor':
        base = rng.uniform(15.0, 32.0)
        drift = rng.uniform(2.0, 4.0) * np.sin(2 * np.pi * t / rng.uniform(600, 1200) + rng.uniform(0, 2 * np.pi))
        ambient = base + drift
        wind = _gusts(d, 1.5, rng)
        humidity = np.full(d, rng.uniform(30.0, 75.0))
    else:
        ambient = rng.uniform(20.5, 24.5) + 0.2 * np.sin(2 * np.pi * t / 900 + rng.uniform(0, 2 * np.pi))
        wind = np.abs(rng.normal(0.0, 0.03, d))
        humidity = np.full(d, rng.uniform(35.0, 50.0))
    if config.ambient is not None:
        ambient = np.asarray(config.ambient, dtype=float)
    if config.wind is not None:
        wind = np.asarray(config.wind, dtype=float)
    distance = np.full(d, rng.uniform(35.0, 60.0))
    return Environment(ambient, wind, humidity, distance)


def laplacian(T: np.ndarray, chassis: np.ndarray) -> np.ndarray:
    '''Five-point Laplacian with zero flux across the chassis edge

    Only chassis neighbours contribute, so pairwise exchanges cancel and the
    chassis total is conserved.
    '''
    Tp = np.pad(T, 1, mode='edge')
    Cp = np.pad(chassis, 1)
    lap = np.zeros_like(T)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        neighbour = Tp[1 + dr : Tp.shape[0] - 1 + dr, 1 + dc : Tp.shape[1] - 1 + dc]
        inside = Cp[1 + dr : Cp.shape[0] - 1 + dr, 1 + dc : Cp.shape[1] - 1 + dc]
        lap += np.where(inside, neighbour - T, 0.0)
    return np.where(chassis, lap, 0.0)


@dataclass(frozen=True)
class SimulatedSession:
    '''Noise-free ``truth`` plus observed ``frames``, both (time, y, x) in °C'''

    truth: np.ndarray
    frames: np.ndarray
    chassis: np.ndarray
    env: Environment
    phase_marks: Tuple[int, int, int, int]


def simulate(
    device: DeviceProfile,
    app: AppWorkloadProfile,
    config: SimConfig,
    rng: Optional[np.random.Generator] = None,
    initial: Optional[np.ndarray] = None,
) -> SimulatedSession:
    '''Integrate one session and add sensor noise

    Parameters
    ----------
    initial : ndarray, optional
        Starting field; defaults to the local equilibrium of the resting and
        idle loads plus the app's residual heat.

    Raises
    ------
    ConfigError
        Unstable substep count, checked before any integration.
    '''
    substeps = config.stable_substeps(device.alpha)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    shape = tuple(config.frame_shape)
    dt = 1.0 / substeps
    chassis = device.chassis(shape)
    marks = config.phase_marks()
    env = draw_environment(config, rng)
    loads = app.schedule(config.duration_s, marks, rng)

    groups: Dict[str, np.ndarray] = {}
    for source in device.sources:
        fp = source.power * device.footprint(source.center, source.sigma, shape)
        groups[source.load_group] = groups.get(source.load_group, 0.0) + fp
    idle = device.resting_load * chassis.astype(float)
    for group, load in device.idle_loads.items():
        idle = idle + load * groups.get(group, 0.0)
    vent = device.footprint(device.fan.vent, device.fan.sigma, shape)

    solar = None
    if config.environment == 'outdoor':
        power = rng.uniform(0.02, 0.05)
        side = rng.choice([0.15, 0.85])
        solar = (power, side)

    if initial is None:
        loss = device.h + device.c_v * env.wind[0]
        rise = idle / loss if loss > 0 else np.zeros(shape)
        lo, hi = app.residual_c
        residual = rng.uniform(lo, hi) if hi > 0 else 0.0
        soc = next((s for s in device.sources if s.load_group == 'soc'), None)
        if residual and soc is not None:
            rise = rise + residual * device.footprint(soc.center, (0.2, 0.3), shape)
        T = env.ambient[0] + np.where(chassis, rise, 0.0)
    else:
        T = np.array(initial, dtype=float)

    truth = np.empty((config.duration_s,) + shape)
    for t in range(config.duration_s):
        amb = env.ambient[t]
        S = idle.copy()
        for group, series in loads.items():
            if group in groups:
                S = S + series[t] * groups[group]
        if solar is not None:
            power, side = solar
            drift = 0.2 * t / config.duration_s
            centre = (side + (drift if side < 0.5 else -drift), 0.35)
            S = S + power * device.footprint(centre, (0.15, 0.2), shape)
        loss = device.h + device.c_v * env.wind[t]
        fan_on = chassis.any() and device.fan.active(t, float(T[chassis].max()))
        sink = loss + (device.fan.amplitude * vent if fan_on else 0.0)
        for _ in range(substeps):
            T = T + dt * (device.alpha * laplacian(T, chassis) + S - sink * (T - amb))
            T[~chassis] = amb
        truth[t] = T

    offset = device.offset_field(shape)
    frames = truth + offset
    if config.noise_std > 0:
        frames = frames + rng.normal(0.0, config.noise_std, frames.shape)
    return SimulatedSession(truth, frames, chassis, env, marks)


def session_rng(seed: int, session_id: str) -> np.random.Generator:
    '''Independent stream per (suite seed, session id)'''
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(session_id.encode())]))


def simulate_session(
    device: DeviceProfile,
    app: AppWorkloadProfile,
    config: SimConfig,
    out_dir: PathT,
    session_id: Optional[str] = None,
    app_label: Optional[str] = None,
) -> Path:
    '''Simulate one session and write it in the frame_store layout

    Returns the session directory ``out_dir/<session_id>``.
    '''
    session_id = session_id or f'{device.name}_{app.app_label}_{config.environment}_{config.seed:04d}'
    rng = session_rng(config.seed, session_id)
    start = config.start_ms if config.start_ms is not None else START_MS + 1000 * int(rng.integers(0, 10**6))
    sim = simulate(device, app, config, rng)

    root = Path(out_dir) / session_id
    (root / 'frames').mkdir(parents=True, exist_ok=True)
    if config.mask_every:
        (root / 'masks').mkdir(exist_ok=True)
    for t in range(config.duration_s):
        ts = start + 1000 * t
        write_frame(RadiometricFrame(ts, sim.frames[t], t), root / 'frames', config.decimals)
        if config.mask_every and t % config.mask_every == 0:
            write_mask_bits(sim.chassis, ts, root / 'masks')

    # sensor clock runs slightly behind the camera
    samples = [
        SensorSample(
            start + 1000 * t + 120,
            float(sim.env.ambient[t] + rng.normal(0.0, 0.05)),
            float(np.clip(sim.env.humidity[t] + rng.normal(0.0, 0.5), 0.0, 100.0)),
            float(sim.env.wind[t]),
            float(sim.env.distance[t] + rng.normal(0.0, 0.3)),
        )
        for t in range(config.duration_s)
    ]
    write_sensor_log(samples, root / 'sensors.csv')
    manifest = SessionManifest(
        session_id,
        device.name,
        app_label or app.app_label,
        config.environment,
        tuple(start + 1000 * m for m in sim.phase_marks),  # type: ignore[arg-type]
    )
    write_manifest(manifest, root / 'manifest.json')
    logger.debug('simulated %s (%d frames)', session_id, config.duration_s)
    return root


@dataclass(frozen=True)
class SuiteSpec(Serializable):
    '''Devices × apps × sessions × environments of a synthetic dataset

    ``environments`` maps environment to sessions per (device, app); when
    empty every session is indoor and ``sessions_per_app`` applies.
    ``aliases`` labels a session with one name while simulating another
    app's profile.
    '''

    devices: Tuple[str, ...] = ('quest3',)
    apps: Tuple[str, ...] = tuple(APP_PROFILES)
    sessions_per_app: int = 8
    environments: Mapping[str, int] = field(default_factory=dict)
    duration_s: int = 600
    frame_shape: Tuple[int, int] = (192, 256)
    decimals: int = 6
    noise_std: float = NOISE_STD
    write_masks: bool = False
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            validate_document(self.json, 'suite')
        except SchemaError as err:
            raise ConfigError(str(err)) from err
        unknown = set(self.devices) - set(DEVICE_PRESETS)
        if unknown:
            raise ConfigError(f'unknown device presets {sorted(unknown)}')
        missing = {self.aliases.get(a, a) for a in self.apps} - set(APP_PROFILES)
        if missing:
            raise ConfigError(f'unknown app profiles {sorted(missing)}')

    @property
    def counts(self) -> Dict[str, int]:
        return dict(self.environments) if self.environments else {'indoor': self.sessions_per_app}

    @classmethod
    def light(cls, **overrides) -> 'SuiteSpec':
        '''Coarser frames, two decimals and shorter sessions for quick runs'''
        return cls(**{**LIGHT_SUITE, **overrides})

    def session_plan(self) -> List[Tuple[str, str, str, str]]:
        '''(session_id, device, app label, environment) for every session, in order'''
        out = []
        for device in self.devices:
            for app in self.apps:
                for environment, count in sorted(self.counts.items()):
                    for k in range(count):
                        out.append((f'{device}_{app}_{environment}_{k:02d}', device, app, environment))
        return out

    @property
    def json(self) -> dict:
        return {
            'devices': list(self.devices),
            'apps': list(self.apps),
            'sessions_per_app': self.sessions_per_app,
            'environments': dict(self.environments),
            'duration_s': self.duration_s,
            'frame_shape': list(self.frame_shape),
            'decimals': self.decimals,
            'noise_std': self.noise_std,
            'write_masks': self.write_masks,
            'aliases': dict(self.aliases),
        }

    @classmethod
    def from_json(cls, obj: dict):
        try:
            validate_document(obj, 'suite')
        except SchemaError as err:
            raise ConfigError(str(err)) from err
        obj = dict(obj)
        for key in ('devices', 'apps', 'frame_shape'):
            if key in obj:
                obj[key] = tuple(obj[key])
        return cls(**obj)


def _simulate_planned(suite: SuiteSpec, seed: int, entry: Tuple[str, str, str, str], out: Path) -> Path:
    session_id, device, app, environment = entry
    config = SimConfig(
        frame_shape=suite.frame_shape,
        duration_s=suite.duration_s,
        environment=environment,
        noise_std=suite.noise_std,
        seed=seed,
        decimals=suite.decimals,
        mask_every=10 if suite.write_masks else 0,
    )
    profile = APP_PROFILES[suite.aliases.get(app, app)]
    return simulate_session(DEVICE_PRESETS[device], profile, config, out, session_id, app_label=app)


def generate_dataset(suite: SuiteSpec, out: PathT, seed: int = 0, jobs: Optional[int] = None) -> List[Path]:
    '''Write every session of a suite under ``out``; deterministic under ``seed``'''
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    plan = suite.session_plan()
    logger.info('generating %d sessions under %s (seed %d)', len(plan), out, seed)
    tasks = [dask.delayed(_simulate_planned)(suite, seed, entry, out) for entry in plan]
    return list(compute(tasks, jobs))