import numpy as np
import pytest

from thermaltap.base import SchemaError, ShapeError
from thermaltap.frame_store import RadiometricFrame
from thermaltap.roi import (
    CLASSICAL,
    INGESTED,
    GeometryLimits,
    Mask,
    MaskQuality,
    SegmenterConfig,
    frame_mask,
    hull_area,
    ingest_mask,
    largest_component,
    mask_geometry,
    segment_classical,
    segment_session,
    validate_mask,
)

from .conftest import WARM, warm_temps


@pytest.fixture
def warm_frame():
    return RadiometricFrame(1000, warm_temps(), 0)


def _rect(shape, rows, cols):
    bits = np.zeros(shape, dtype=bool)
    bits[rows, cols] = True
    return bits


def test_segment_classical_finds_warm_region(warm_frame):
    mask = segment_classical(warm_frame, 22.0)
    assert mask.source == CLASSICAL
    assert mask.area == 12 * 24
    assert mask.bits[WARM].all()


def test_segment_classical_falls_back_to_frame_median(warm_frame):
    with_ambient = segment_classical(warm_frame, 22.0)
    without = segment_classical(warm_frame, None)
    np.testing.assert_array_equal(with_ambient.bits, without.bits)


def test_segment_classical_contrast(warm_frame):
    # warm region is 8 °C above ambient
    assert segment_classical(warm_frame, 22.0, SegmenterConfig(contrast_c=9.0)).area == 0


def test_segment_classical_opening_removes_specks():
    temps = warm_temps()
    temps[2, 2] = 40.0
    mask = segment_classical(RadiometricFrame(0, temps), 22.0)
    assert not mask.bits[2, 2]
    assert mask.area == 12 * 24


def test_largest_component_keeps_bigger_blob():
    bits = _rect((20, 20), slice(0, 3), slice(0, 3)) | _rect((20, 20), slice(10, 15), slice(10, 15))
    kept = largest_component(bits)
    assert kept.sum() == 25
    assert kept[12, 12] and not kept[1, 1]


def test_largest_component_of_empty_mask():
    assert not largest_component(np.zeros((4, 4), dtype=bool)).any()


@pytest.mark.parametrize(
    'bits, area',
    [
        (_rect((5, 5), slice(2, 3), slice(2, 3)), 1.0),
        (_rect((20, 30), slice(2, 8), slice(3, 15)), 72.0),
        (np.zeros((3, 3), dtype=bool), 0.0),
    ],
)
def test_hull_area(bits, area):
    assert hull_area(bits) == pytest.approx(area)


def test_rectangle_geometry(warm_frame):
    q = mask_geometry(Mask(_rect((32, 48), *WARM)))
    assert q.component_area == 288
    assert q.bbox == (10, 12, 21, 35)
    assert q.aspect_ratio == pytest.approx(2.0)
    assert q.solidity == pytest.approx(1.0)
    assert q.valid


@pytest.mark.parametrize(
    'rows, cols, reason',
    [
        (slice(0, 20), slice(0, 20), 'square'),
        (slice(0, 5), slice(0, 40), 'too wide'),
    ],
)
def test_geometry_rejects_bad_aspect(rows, cols, reason):
    q = mask_geometry(Mask(_rect((48, 48), rows, cols)))
    assert not q.valid, reason


def test_geometry_rejects_low_solidity():
    # L shape 30 wide, 15 tall
    bits = _rect((40, 40), slice(0, 15), slice(0, 3)) | _rect((40, 40), slice(12, 15), slice(0, 30))
    q = mask_geometry(Mask(bits))
    assert 1.3 <= q.aspect_ratio <= 2.8
    assert q.solidity < 0.8
    assert not q.valid


def test_empty_mask_is_invalid():
    q = mask_geometry(Mask(np.zeros((8, 8), dtype=bool)))
    assert q == MaskQuality.empty()
    assert not validate_mask(q)


def test_validate_mask_limits():
    q = MaskQuality(100, (0, 0, 9, 14), 1.5, 0.85, False)
    assert validate_mask(q)
    assert not validate_mask(q, GeometryLimits(min_solidity=0.9))


def test_mask_rejects_unknown_source():
    with pytest.raises(ValueError, match='unknown mask source'):
        Mask(np.zeros((2, 2), dtype=bool), 'oracle')


def test_ingest_mask(warm_frame):
    bits = _rect((32, 48), *WARM).astype(np.uint8)
    mask = ingest_mask(bits, warm_frame)
    assert mask.source == INGESTED
    assert mask.bits.dtype == bool
    with pytest.raises(ShapeError):
        ingest_mask(np.ones((16, 16)), warm_frame)


def test_ingest_mask_rejects_non_binary(warm_frame):
    bits = np.zeros((32, 48))
    bits[0, 0] = 2
    with pytest.raises(SchemaError, match='non-binary'):
        ingest_mask(bits, warm_frame)


def test_frame_mask_prefers_ingested(make_recording):
    rec = make_recording(n_frames=4)
    bits = _rect((32, 48), slice(5, 15), slice(5, 25))
    rec = type(rec)(rec.manifest, rec.frames, rec.env, rec.gaps, {1: bits})
    assert frame_mask(rec, 1).source == INGESTED
    np.testing.assert_array_equal(frame_mask(rec, 1).bits, bits)
    assert frame_mask(rec, 0).source == CLASSICAL


def test_segment_session_marks_gap_frames(make_recording):
    rec = make_recording(n_frames=4)
    rec = type(rec)(rec.manifest, rec.frames, (rec.env[0], None, rec.env[2], rec.env[3]), frozenset({1}))
    out = segment_session(rec)
    assert len(out) == 4
    assert not out[1][1].valid
    assert out[1][0].area == 0
    assert all(q.valid for _, q in (out[0], out[2], out[3]))


def test_segment_session_cold_frames_are_missing(make_recording):
    rec = make_recording(n_frames=4, cold=(2,))
    assert [q.valid for _, q in segment_session(rec)] == [True, True, False, True]


def test_plus_shape_solidity():
    # arms two pixels long; the hull cuts a 2x2 triangle off every corner
    bits = _rect((7, 7), slice(1, 6), slice(3, 4)) | _rect((7, 7), slice(3, 4), slice(1, 6))
    assert hull_area(bits) == pytest.approx(17.0)
    q = mask_geometry(Mask(bits))
    assert q.component_area == 9
    assert q.solidity == pytest.approx(9 / 17)


def test_geometry_follows_translation_and_scale():
    rng = np.random.default_rng(0)
    for _ in range(100):
        h, w = rng.integers(2, 12, size=2)
        r, c = rng.integers(0, 8, size=2)
        bits = _rect((40, 40), slice(r, r + h), slice(c, c + w))
        base = mask_geometry(Mask(bits))

        dr, dc = rng.integers(0, 10, size=2)
        moved = mask_geometry(Mask(np.roll(bits, (dr, dc), axis=(0, 1))))
        assert moved.component_area == base.component_area
        assert moved.bbox == (base.bbox[0] + dr, base.bbox[1] + dc, base.bbox[2] + dr, base.bbox[3] + dc)
        assert moved.aspect_ratio == pytest.approx(base.aspect_ratio)
        assert moved.solidity == pytest.approx(base.solidity)

        k = int(rng.integers(2, 4))
        scaled = mask_geometry(Mask(np.kron(bits, np.ones((k, k))).astype(bool)))
        assert scaled.component_area == k * k * base.component_area
        r0, c0, r1, c1 = base.bbox
        assert scaled.bbox == (k * r0, k * c0, k * r1 + k - 1, k * c1 + k - 1)
        assert scaled.aspect_ratio == pytest.approx(base.aspect_ratio)
        assert scaled.solidity == pytest.approx(base.solidity)
        assert scaled.valid == base.valid
