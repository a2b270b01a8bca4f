'''Mask overlap and boundary-distance metrics'''

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..base import ShapeError
from ..roi import FOUR_CONNECTED


@dataclass(frozen=True)
class SegMetrics:
    dice: float
    iou: float
    hd95: float
    asd: float

    @property
    def json(self) -> dict:
        return {
            k: (None if math.isinf(v) else v)
            for k, v in (('dice', self.dice), ('iou', self.iou), ('hd95', self.hd95), ('asd', self.asd))
        }


def boundary(mask: np.ndarray) -> np.ndarray:
    '''Foreground pixels 4-adjacent to background; outside the image counts as background'''
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndimage.binary_erosion(mask, structure=FOUR_CONNECTED, border_value=0)


def surface_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    '''Nearest-boundary distances from a to b and from b to a, concatenated'''
    pa = np.argwhere(boundary(a)).astype(float)
    pb = np.argwhere(boundary(b)).astype(float)
    d_ab, _ = cKDTree(pb).query(pa)
    d_ba, _ = cKDTree(pa).query(pb)
    return np.concatenate([d_ab, d_ba])


def seg_metrics(pred_mask: np.ndarray, true_mask: np.ndarray) -> SegMetrics:
    '''Dice, IoU, 95th-percentile and mean symmetric boundary distance (pixels)

    Two empty masks score perfectly. One empty mask gives 0 overlap and
    infinite distances.

    Raises
    ------
    ShapeError
        Masks of different shape.
    '''
    a = np.asarray(pred_mask, dtype=bool)
    b = np.asarray(true_mask, dtype=bool)
    if a.shape != b.shape:
        raise ShapeError(f'mask shape mismatch: {a.shape} != {b.shape}')
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 and nb == 0:
        return SegMetrics(1.0, 1.0, 0.0, 0.0)
    if na == 0 or nb == 0:
        return SegMetrics(0.0, 0.0, math.inf, math.inf)
    inter = int((a & b).sum())
    union = int((a | b).sum())
    distances = surface_distances(a, b)
    return SegMetrics(
        dice=2.0 * inter / (na + nb),
        iou=inter / union,
        hd95=float(np.percentile(distances, 95)),
        asd=float(distances.mean()),
    )
