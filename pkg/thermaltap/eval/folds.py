'''Fold planners: leave-one-session-out, leave-one-device-out, pooled, transfer, cross-device'''

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..base import PlanError, Serializable
from ..frame_store import SessionManifest

logger = logging.getLogger(__name__)

PROTOCOLS = ('loso', 'lodo', 'pooled', 'transfer', 'cross_device')


@dataclass(frozen=True)
class Fold:
    fold_id: str
    train: Tuple[str, ...]
    test: Tuple[str, ...]
    adaptation: Tuple[str, ...] = ()
    train_device: Optional[str] = None
    test_device: Optional[str] = None

    @property
    def fit_sessions(self) -> Tuple[str, ...]:
        '''Sessions the models see: training plus few-shot adaptation'''
        return tuple(sorted(set(self.train) | set(self.adaptation)))


@dataclass(frozen=True)
class FoldPlan(Serializable):
    protocol: str
    folds: Tuple[Fold, ...]

    def __len__(self) -> int:
        return len(self.folds)

    @property
    def json(self) -> dict:
        return {
            'protocol': self.protocol,
            'folds': [
                {
                    'fold_id': f.fold_id,
                    'train': list(f.train),
                    'test': list(f.test),
                    'adaptation': list(f.adaptation),
                    'train_device': f.train_device,
                    'test_device': f.test_device,
                }
                for f in self.folds
            ],
        }

    @classmethod
    def from_json(cls, obj: dict):
        folds = tuple(
            Fold(
                f['fold_id'],
                tuple(f['train']),
                tuple(f['test']),
                tuple(f.get('adaptation', ())),
                f.get('train_device'),
                f.get('test_device'),
            )
            for f in obj['folds']
        )
        return check_hygiene(cls(obj['protocol'], folds))


def check_hygiene(plan: FoldPlan) -> FoldPlan:
    '''No test session may appear among a fold's training or adaptation sessions'''
    for fold in plan.folds:
        if not fold.test:
            raise PlanError(f'fold {fold.fold_id}: empty test set')
        if not fold.fit_sessions:
            raise PlanError(f'fold {fold.fold_id}: empty training set')
        leaked = set(fold.test) & set(fold.fit_sessions)
        if leaked:
            raise PlanError(f'fold {fold.fold_id}: test sessions also used for training: {sorted(leaked)}')
    return plan


def _ids(sessions: Sequence[SessionManifest]) -> List[str]:
    ids = sorted(s.session_id for s in sessions)
    if len(set(ids)) != len(ids):
        raise PlanError('duplicate session ids')
    return ids


def _by_device(sessions: Sequence[SessionManifest]) -> Dict[str, List[str]]:
    out: Dict[str, List[str]] = defaultdict(list)
    for s in sessions:
        out[s.device_model].append(s.session_id)
    return {device: sorted(ids) for device, ids in sorted(out.items())}


def plan_loso(sessions: Sequence[SessionManifest], protocol: str = 'loso') -> FoldPlan:
    '''One fold per session, the rest train'''
    ids = _ids(sessions)
    if len(ids) < 2:
        raise PlanError(f'leave-one-session-out needs >= 2 sessions, got {len(ids)}')
    folds = tuple(Fold(sid, tuple(i for i in ids if i != sid), (sid,)) for sid in ids)
    return check_hygiene(FoldPlan(protocol, folds))


def plan_pooled(sessions: Sequence[SessionManifest]) -> FoldPlan:
    '''Leave-one-session-out over the sessions of every device together'''
    devices = _by_device(sessions)
    if len(devices) < 2:
        raise PlanError(f'pooled protocol needs >= 2 device models, got {len(devices)}')
    return plan_loso(sessions, protocol='pooled')


def plan_lodo(sessions: Sequence[SessionManifest]) -> FoldPlan:
    '''One fold per device model, trained on the others'''
    _ids(sessions)
    devices = _by_device(sessions)
    if len(devices) < 2:
        raise PlanError(f'leave-one-device-out needs >= 2 device models, got {len(devices)}')
    folds = []
    for device, test in devices.items():
        train = sorted(sid for other, ids in devices.items() if other != device for sid in ids)
        folds.append(Fold(device, tuple(train), tuple(test), test_device=device))
    return check_hygiene(FoldPlan('lodo', tuple(folds)))


def plan_transfer(
    indoor: Sequence[SessionManifest],
    outdoor: Sequence[SessionManifest],
    few_shot_count: int = 0,
    seed: int = 0,
) -> FoldPlan:
    '''Indoor training, outdoor testing, optionally adapted with a few outdoor sessions per class

    Adaptation sessions are drawn per class from the id-sorted outdoor
    sessions with a generator seeded by ``seed``.
    '''
    if few_shot_count < 0:
        raise PlanError(f'few_shot_count must be >= 0, got {few_shot_count}')
    train = _ids(indoor)
    if not train:
        raise PlanError('transfer protocol needs indoor sessions')
    if not outdoor:
        raise PlanError('transfer protocol needs outdoor sessions')
    per_class: Dict[str, List[str]] = defaultdict(list)
    for s in outdoor:
        per_class[s.app_label].append(s.session_id)

    adaptation: List[str] = []
    rng = np.random.default_rng(seed)
    for label in sorted(per_class):
        ids = sorted(per_class[label])
        if few_shot_count >= len(ids):
            raise PlanError(
                f'few_shot_count {few_shot_count} must be below the {len(ids)} outdoor sessions of {label!r}'
            )
        if few_shot_count:
            picks = rng.permutation(len(ids))[:few_shot_count]
            adaptation.extend(ids[i] for i in sorted(picks))
    test = sorted(set(_ids(outdoor)) - set(adaptation))
    fold_id = 'few_shot' if few_shot_count else 'zero_shot'
    return check_hygiene(FoldPlan('transfer', (Fold(fold_id, tuple(train), tuple(test), tuple(sorted(adaptation))),)))


def plan_cross_device(sessions: Sequence[SessionManifest]) -> FoldPlan:
    '''Train on one device, test on another, for every ordered pair

    Same-device cells fall back to leave-one-session-out inside the device.
    '''
    _ids(sessions)
    devices = _by_device(sessions)
    if len(devices) < 2:
        raise PlanError(f'cross-device protocol needs >= 2 device models, got {len(devices)}')
    folds = []
    for src, train in devices.items():
        for dst, test in devices.items():
            if src != dst:
                folds.append(Fold(f'{src}->{dst}', tuple(train), tuple(test), (), src, dst))
                continue
            if len(train) < 2:
                raise PlanError(f'device {src!r} needs >= 2 sessions for its diagonal cell')
            for sid in train:
                rest = tuple(i for i in train if i != sid)
                folds.append(Fold(f'{src}->{src}:{sid}', rest, (sid,), (), src, src))
    return check_hygiene(FoldPlan('cross_device', tuple(folds)))


def plan_for(
    protocol: str, sessions: Sequence[SessionManifest], few_shot_count: int = 0, seed: int = 0
) -> FoldPlan:
    '''Dispatch on a protocol name; transfer splits sessions by environment'''
    if protocol == 'loso':
        return plan_loso(sessions)
    if protocol == 'pooled':
        return plan_pooled(sessions)
    if protocol == 'lodo':
        return plan_lodo(sessions)
    if protocol == 'cross_device':
        return plan_cross_device(sessions)
    if protocol == 'transfer':
        indoor = [s for s in sessions if s.environment == 'indoor']
        outdoor = [s for s in sessions if s.environment == 'outdoor']
        return plan_transfer(indoor, outdoor, few_shot_count, seed)
    raise PlanError(f'unknown protocol {protocol!r}, expected one of {PROTOCOLS}')
