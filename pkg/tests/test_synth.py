import json
from pathlib import Path

import numpy as np
import pytest

from thermaltap.base import ConfigError
from thermaltap.frame_store import list_sessions, load_session
from thermaltap.synth import (
    APP_PROFILES,
    DEVICE_PRESETS,
    AppWorkloadProfile,
    DeviceProfile,
    HeatSource,
    SimConfig,
    SuiteSpec,
    generate_dataset,
    laplacian,
    simulate,
    simulate_session,
)

SUITES = Path(__file__).parents[1] / 'suites'
SHAPE = (32, 48)
NO_LOAD = AppWorkloadProfile('noop', {})


def _still(duration, ambient=22.0, wind=0.0):
    return dict(ambient=(ambient,) * duration, wind=(wind,) * duration)


def test_unloaded_device_stays_at_ambient():
    device = DeviceProfile('bare', (), resting_load=0.0, idle_loads={})
    config = SimConfig(frame_shape=SHAPE, duration_s=20, noise_std=0.0, **_still(20))
    sim = simulate(device, NO_LOAD, config)
    np.testing.assert_allclose(sim.truth, 22.0)
    np.testing.assert_allclose(sim.frames, 22.0)


def test_uniform_source_reaches_equilibrium():
    source = HeatSource('heat', (0.5, 0.5), (1e3, 1e3), 0.1)
    device = DeviceProfile('plate', (source,), resting_load=0.0, idle_loads={'heat': 1.0}, h=0.05, c_v=0.0)
    config = SimConfig(frame_shape=SHAPE, duration_s=300, noise_std=0.0, **_still(300))
    sim = simulate(device, NO_LOAD, config, initial=np.full(SHAPE, 22.0))
    last = sim.truth[-1]
    np.testing.assert_allclose(last[sim.chassis], 22.0 + 0.1 / 0.05, atol=1e-3)
    np.testing.assert_allclose(last[~sim.chassis], 22.0)


def test_insulated_chassis_conserves_heat():
    device = DeviceProfile('closed', (), resting_load=0.0, idle_loads={}, h=0.0, c_v=0.0)
    config = SimConfig(frame_shape=SHAPE, duration_s=40, noise_std=0.0, **_still(40))
    chassis = device.chassis(SHAPE)
    initial = np.where(chassis, 22.0 + np.random.default_rng(0).uniform(0.0, 5.0, SHAPE), 22.0)
    sim = simulate(device, NO_LOAD, config, initial=initial)
    totals = sim.truth[:, chassis].sum(axis=1)
    np.testing.assert_allclose(totals, initial[chassis].sum(), rtol=1e-10)
    # diffusion alone never creates new extremes
    assert sim.truth[:, chassis].max() <= initial[chassis].max() + 1e-9
    assert sim.truth[:, chassis].min() >= initial[chassis].min() - 1e-9
    # and it smooths
    assert sim.truth[-1, chassis].std() < initial[chassis].std()


def test_laplacian_has_zero_flux_edge():
    chassis = np.zeros((5, 5), dtype=bool)
    chassis[1:4, 1:4] = True
    T = np.where(chassis, 1.0, 50.0)
    T[2, 2] = 5.0
    lap = laplacian(T, chassis)
    assert lap[2, 2] == pytest.approx(-16.0)
    assert lap[1, 2] == pytest.approx(4.0)
    assert lap[0, 0] == 0.0
    assert lap.sum() == pytest.approx(0.0)


def test_wind_cools_the_chassis():
    device = DeviceProfile('fanless', DEVICE_PRESETS['quest3'].sources)
    app = APP_PROFILES['youtube']
    calm = SimConfig(frame_shape=SHAPE, duration_s=200, noise_std=0.0, seed=3, **_still(200))
    windy = SimConfig(
        frame_shape=SHAPE,
        duration_s=200,
        noise_std=0.0,
        seed=3,
        ambient=(22.0,) * 200,
        wind=(0.0,) * 100 + (5.0,) * 100,
    )
    a = simulate(device, app, calm)
    b = simulate(device, app, windy)
    np.testing.assert_allclose(a.truth[:100], b.truth[:100])
    assert b.truth[130].max() < a.truth[130].max() - 0.5


def test_sensor_noise_level():
    device = DEVICE_PRESETS['quest3']
    config = SimConfig(frame_shape=SHAPE, duration_s=20, noise_std=0.5, **_still(20))
    sim = simulate(device, APP_PROFILES['vrfs'], config)
    residual = sim.frames - sim.truth - device.offset_field(SHAPE)
    assert abs(residual.std() - 0.5) < 0.02


def test_substep_stability():
    with pytest.raises(ConfigError, match='unstable'):
        SimConfig(substeps=1).stable_substeps(0.5)
    assert SimConfig().stable_substeps(0.5) == 3
    assert SimConfig().stable_substeps(0.2) == 1
    assert SimConfig(substeps=3).stable_substeps(0.5) == 3
    device = DeviceProfile('fast', (), alpha=0.5)
    with pytest.raises(ConfigError):
        simulate(device, NO_LOAD, SimConfig(frame_shape=SHAPE, duration_s=20, substeps=1))


def test_phase_marks():
    assert SimConfig(duration_s=600).phase_marks() == (0, 30, 180, 480)
    with pytest.raises(ConfigError, match='too short'):
        SimConfig(duration_s=8).phase_marks()


@pytest.mark.parametrize(
    'kwargs, match',
    [
        ({'environment': 'space'}, 'environment'),
        ({'duration_s': 20, 'ambient': (22.0,) * 5}, 'ambient trajectory'),
    ],
)
def test_sim_config_rejects(kwargs, match):
    with pytest.raises(ConfigError, match=match):
        SimConfig(**kwargs)


@pytest.mark.parametrize(
    'kwargs, match',
    [
        ({'alpha': 0.0}, 'diffusivity'),
        ({'h': -0.1}, 'loss coefficients'),
        ({'aspect': 4.0}, 'aspect'),
        ({'sources': (HeatSource('soc', (1.5, 0.5), (0.1, 0.1), 0.1),)}, 'off the chassis'),
    ],
)
def test_device_profile_rejects(kwargs, match):
    kwargs = {'sources': (), **kwargs}
    with pytest.raises(ConfigError, match=match):
        DeviceProfile('bad', **kwargs)


def test_chassis_is_a_plausible_face():
    for device in DEVICE_PRESETS.values():
        chassis = device.chassis((64, 96))
        rows, cols = np.nonzero(chassis)
        aspect = (cols.max() - cols.min() + 1) / (rows.max() - rows.min() + 1)
        assert 1.3 <= aspect <= 2.8
        assert not chassis[0].any() and not chassis[:, 0].any()


def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob('*')) if p.is_file()}


def test_simulate_session_is_deterministic(tmp_path):
    config = SimConfig(frame_shape=SHAPE, duration_s=20, seed=1, decimals=2, mask_every=5)
    device, app = DEVICE_PRESETS['quest2'], APP_PROFILES['zoom_web']
    a = simulate_session(device, app, config, tmp_path / 'a', 's0')
    b = simulate_session(device, app, config, tmp_path / 'b', 's0')
    assert _tree(a) == _tree(b)
    assert len(list((a / 'masks').iterdir())) == 4

    rec = load_session(a)
    assert len(rec) == 20
    assert rec.manifest.device_model == 'quest2'
    assert rec.manifest.app_label == 'zoom_web'
    assert not rec.gaps
    assert len(rec.masks) == 4
    # frames are stored with two decimals
    assert np.allclose(rec.frames[3].temps, np.round(rec.frames[3].temps, 2))


def test_suite_sizes():
    assert len(SuiteSpec().session_plan()) == 56
    outdoor = SuiteSpec.from_json(json.loads((SUITES / 'outdoor.json').read_text()))
    plan = outdoor.session_plan()
    assert len(plan) == 7 * 12
    assert sum(1 for entry in plan if entry[3] == 'outdoor') == 7 * 4
    assert plan[0] == ('quest3_home_indoor_00', 'quest3', 'home', 'indoor')


def test_suite_defaults_and_light_preset():
    full = SuiteSpec()
    assert (full.frame_shape, full.decimals) == ((192, 256), 6)
    assert full == SuiteSpec.from_json(json.loads((SUITES / 'default.json').read_text()))
    light = SuiteSpec.light(apps=('home', 'vrfs'))
    assert (light.frame_shape, light.decimals, light.duration_s) == ((64, 96), 2, 300)
    assert len(light.session_plan()) == 8
    assert SuiteSpec.from_json(light.json) == light


def test_suite_files_load():
    for path in SUITES.glob('*.json'):
        SuiteSpec.from_json(json.loads(path.read_text()))


@pytest.mark.parametrize(
    'kwargs, match',
    [
        ({'devices': ('pico4',)}, 'unknown device'),
        ({'apps': ('tetris',)}, 'unknown app'),
        ({'sessions_per_app': 0}, 'sessions_per_app'),
    ],
)
def test_suite_rejects(kwargs, match):
    with pytest.raises(ConfigError, match=match):
        SuiteSpec(**kwargs)


def test_generate_dataset_with_aliases(tmp_path):
    suite = SuiteSpec(
        apps=('arkio', 'arkio_twin'),
        sessions_per_app=1,
        duration_s=20,
        frame_shape=SHAPE,
        aliases={'arkio_twin': 'arkio'},
    )
    paths = generate_dataset(suite, tmp_path, seed=2, jobs=1)
    assert [p.name for p in paths] == ['quest3_arkio_indoor_00', 'quest3_arkio_twin_indoor_00']
    assert list_sessions(tmp_path) == sorted(paths)
    assert load_session(paths[1]).manifest.app_label == 'arkio_twin'
