import numpy as np
import pytest

from thermaltap.config import RunConfig
from thermaltap.frame_store import RadiometricFrame, SensorSample, SessionManifest, align_session
from thermaltap.synth import SuiteSpec, generate_dataset

FRAME_SHAPE = (32, 48)
WARM = (slice(10, 22), slice(12, 36))
AMBIENT = 22.0
START = 1_700_000_000_000


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow end-to-end tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


def warm_temps(hot=30.0, ambient=AMBIENT):
    '''32x48 frame at ambient with a 12x24 warm rectangle'''
    temps = np.full(FRAME_SHAPE, ambient)
    temps[WARM] = hot
    return temps


def manifest_for(session_id, device='quest3', label='youtube', environment='indoor', n_frames=20):
    q = max(1, n_frames // 4)
    marks = tuple(START + 1000 * m for m in (0, q, 2 * q, 3 * q))
    return SessionManifest(session_id, device, label, environment, marks)


@pytest.fixture
def make_recording():
    def make(
        n_frames=20,
        label='youtube',
        device='quest3',
        environment='indoor',
        ramp=0.0,
        cold=(),
        velocity=0.1,
        session_id=None,
    ):
        frames = []
        for k in range(n_frames):
            hot = AMBIENT if k in cold else 30.0 + ramp * k
            frames.append(RadiometricFrame(START + 1000 * k, warm_temps(hot), k))
        samples = [SensorSample(START + 1000 * k, AMBIENT, 40.0, velocity, 45.0) for k in range(n_frames)]
        sid = session_id or f'{device}_{label}_{environment}'
        return align_session(frames, samples, manifest_for(sid, device, label, environment, n_frames))

    return make


@pytest.fixture(scope='session')
def tiny_dataset(tmp_path_factory):
    suite = SuiteSpec(
        devices=('quest3',),
        apps=('home', 'youtube', 'vrfs'),
        sessions_per_app=3,
        duration_s=60,
        frame_shape=FRAME_SHAPE,
        decimals=2,
        write_masks=True,
    )
    root = tmp_path_factory.mktemp('dataset')
    generate_dataset(suite, root, seed=0, jobs=1)
    return root


@pytest.fixture
def fast_config(tiny_dataset):
    return RunConfig(dataset=str(tiny_dataset), grid=4, window_s=10, n_trees=10, max_depth=8, jobs=1)
