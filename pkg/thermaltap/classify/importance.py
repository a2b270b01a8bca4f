'''Forest feature importances and their projection onto the headset grid'''

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np

from .forest import ForestModel

_CELL = re.compile(r'^(?:cell|delta\d+)_(\d+)_(\d+)(?:_|$)')
FLAG_FRACTION = 0.2


def feature_importance(forest: ForestModel, feature_names: Sequence[str]) -> Dict[str, float]:
    '''Mean Gini decrease per input feature, summing to 1'''
    if len(feature_names) != forest.n_features:
        raise ValueError(f'{len(feature_names)} names for {forest.n_features} forest inputs')
    return dict(zip(feature_names, forest.importances.tolist()))


@dataclass(frozen=True)
class ImportanceGrid:
    values: np.ndarray
    top: np.ndarray
    bottom: np.ndarray


def map_to_grid(importances: Mapping[str, float], n: int) -> ImportanceGrid:
    '''Sum every cell's channel importances into an n×n map

    The top and bottom 20% of cells by summed importance are flagged; ranks
    break ties in raster order.
    '''
    grid = np.zeros((n, n))
    for name, value in importances.items():
        match = _CELL.match(name)
        if match is None:
            continue
        i, j = int(match.group(1)), int(match.group(2))
        if i < n and j < n:
            grid[i, j] += value
    flagged = math.ceil(FLAG_FRACTION * n * n)
    order = np.argsort(-grid.ravel(), kind='stable')
    top = np.zeros(n * n, dtype=bool)
    bottom = np.zeros(n * n, dtype=bool)
    top[order[:flagged]] = True
    bottom[order[-flagged:]] = True
    return ImportanceGrid(grid, top.reshape(n, n), bottom.reshape(n, n))
