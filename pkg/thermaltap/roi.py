'''Headset masks: ingestion, classical contrast segmentation, geometric validity'''

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import xarray as xr
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .base import Serializable, ShapeError
from .dataarray import mask_schema
from .frame_store import RadiometricFrame, SessionRecording
from .types import BBoxT

logger = logging.getLogger(__name__)

INGESTED = 'ingested'
CLASSICAL = 'classical_segmenter'

# 4-connectivity for components and for boundaries
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SegmenterConfig(Serializable):
    '''Classical contrast segmenter settings

    Parameters
    ----------
    contrast_c : float
        Foreground threshold above ambient, °C.
    structure_size : int
        Side of the square structuring element for open/close.
    '''

    contrast_c: float = 3.0
    structure_size: int = 3

    @property
    def json(self) -> dict:
        return {'contrast_c': self.contrast_c, 'structure_size': self.structure_size}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(**obj)


@dataclass(frozen=True)
class GeometryLimits:
    min_aspect: float = 1.3
    max_aspect: float = 2.8
    min_solidity: float = 0.80


@dataclass(frozen=True)
class Mask:
    bits: np.ndarray
    source: str = INGESTED

    def __post_init__(self) -> None:
        if self.source not in (INGESTED, CLASSICAL):
            raise ValueError(f'unknown mask source {self.source!r}')

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def area(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class MaskQuality:
    component_area: int
    bbox: BBoxT
    aspect_ratio: float
    solidity: float
    valid: bool

    @classmethod
    def empty(cls) -> 'MaskQuality':
        return cls(0, (0, 0, 0, 0), 0.0, 0.0, False)


def largest_component(bits: np.ndarray) -> np.ndarray:
    '''Largest 4-connected foreground component; ties keep the first in raster order'''
    labels, count = ndimage.label(bits, structure=FOUR_CONNECTED)
    if count == 0:
        return np.zeros_like(bits, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def segment_classical(
    frame: RadiometricFrame, ambient_c: Optional[float], config: Optional[SegmenterConfig] = None
) -> Mask:
    '''Threshold on contrast to ambient, open/close, keep the largest component

    When no ambient sample is available the frame median stands in for it.
    '''
    config = config or SegmenterConfig()
    if ambient_c is None or not np.isfinite(ambient_c):
        ambient_c = float(np.median(frame.temps))
        logger.debug('frame %d: no ambient sample, using frame median', frame.timestamp)
    foreground = (frame.temps - ambient_c) >= config.contrast_c
    structure = np.ones((config.structure_size, config.structure_size), dtype=bool)
    foreground = ndimage.binary_opening(foreground, structure=structure)
    foreground = ndimage.binary_closing(foreground, structure=structure)
    return Mask(largest_component(foreground), CLASSICAL)


def _pixel_corners(bits: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(bits)
    corners = np.concatenate(
        [
            np.stack([rows + dr, cols + dc], axis=1)
            for dr, dc in ((0, 0), (0, 1), (1, 0), (1, 1))
        ]
    )
    return np.unique(corners, axis=0).astype(float)


def hull_area(bits: np.ndarray) -> float:
    '''Convex-hull area over the unit-square corners of every foreground pixel'''
    if not bits.any():
        return 0.0
    points = _pixel_corners(bits)
    try:
        # in 2-D ConvexHull.volume is the enclosed area
        return float(ConvexHull(points).volume)
    except QhullError:  # pragma: no cover
        return float(bits.sum())


def mask_geometry(mask: Mask) -> MaskQuality:
    '''Bounding box, aspect ratio and solidity of the largest component'''
    component = largest_component(mask.bits)
    area = int(component.sum())
    if area == 0:
        return MaskQuality.empty()
    rows = np.flatnonzero(component.any(axis=1))
    cols = np.flatnonzero(component.any(axis=0))
    bbox = (int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))
    height = bbox[2] - bbox[0] + 1
    width = bbox[3] - bbox[1] + 1
    aspect = width / height
    solidity = min(1.0, area / hull_area(component))
    quality = MaskQuality(area, bbox, aspect, solidity, False)
    return MaskQuality(area, bbox, aspect, solidity, validate_mask(quality))


def validate_mask(q: MaskQuality, limits: GeometryLimits = GeometryLimits()) -> bool:
    '''Aspect ratio within [1.3, 2.8] and solidity of at least 0.80'''
    if q.component_area == 0:
        return False
    return bool(
        limits.min_aspect <= q.aspect_ratio <= limits.max_aspect
        and q.solidity >= limits.min_solidity
    )


def ingest_mask(bits: np.ndarray, frame: RadiometricFrame) -> Mask:
    if bits.shape != frame.temps.shape:
        raise ShapeError(f'mask shape {bits.shape} != frame shape {frame.temps.shape}')
    mask_schema(frame.temps.shape).validate(xr.DataArray(bits.astype(np.uint8), dims=('y', 'x')))
    return Mask(bits.astype(bool), INGESTED)


def frame_mask(
    rec: SessionRecording, index: int, config: Optional[SegmenterConfig] = None
) -> Mask:
    '''Ingested mask for the frame when present, else the classical segmenter'''
    frame = rec.frames[index]
    if index in rec.masks:
        return ingest_mask(rec.masks[index], frame)
    sample = rec.env[index]
    return segment_classical(frame, None if sample is None else sample.ambient_c, config)


def segment_session(
    rec: SessionRecording, config: Optional[SegmenterConfig] = None
) -> List[Tuple[Mask, MaskQuality]]:
    '''Mask and geometry for every frame; gap frames get an empty, invalid mask'''
    out = []
    # ingested masks are often static across a session
    seen: Dict[bytes, MaskQuality] = {}
    for k, frame in enumerate(rec.frames):
        if k in rec.gaps:
            out.append((Mask(np.zeros_like(frame.temps, dtype=bool), CLASSICAL), MaskQuality.empty()))
            continue
        mask = frame_mask(rec, k, config)
        key = np.packbits(mask.bits).tobytes()
        if key not in seen:
            seen[key] = mask_geometry(mask)
        out.append((mask, seen[key]))
    invalid = sum(not q.valid for _, q in out)
    if invalid:
        logger.info('%s: %d of %d frames missing after mask validation', rec.session_id, invalid, len(out))
    return out
