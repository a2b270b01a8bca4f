import pytest

from thermaltap.base import PlanError
from thermaltap.eval.folds import (
    Fold,
    FoldPlan,
    check_hygiene,
    plan_cross_device,
    plan_for,
    plan_lodo,
    plan_loso,
    plan_pooled,
    plan_transfer,
)

from .conftest import manifest_for


def _sessions(rows):
    '''(device, label, environment, count) rows to manifests'''
    out = []
    for device, label, environment, count in rows:
        for k in range(count):
            out.append(manifest_for(f'{device}_{label}_{environment}_{k}', device, label, environment))
    return out


def _assert_clean(plan):
    for fold in plan.folds:
        assert not set(fold.test) & set(fold.fit_sessions)


def test_loso():
    plan = plan_loso(_sessions([('quest3', 'home', 'indoor', 2), ('quest3', 'vrfs', 'indoor', 1)]))
    assert len(plan) == 3
    assert [f.test for f in plan.folds] == [
        ('quest3_home_indoor_0',),
        ('quest3_home_indoor_1',),
        ('quest3_vrfs_indoor_0',),
    ]
    assert len(plan.folds[0].train) == 2
    _assert_clean(plan)


def test_loso_needs_two_sessions():
    with pytest.raises(PlanError, match='>= 2 sessions'):
        plan_loso(_sessions([('quest3', 'home', 'indoor', 1)]))


def test_duplicate_session_ids():
    sessions = _sessions([('quest3', 'home', 'indoor', 2)])
    with pytest.raises(PlanError, match='duplicate'):
        plan_loso(sessions + sessions[:1])


def test_lodo():
    sessions = _sessions([('quest3', 'home', 'indoor', 2), ('quest2', 'home', 'indoor', 3)])
    plan = plan_lodo(sessions)
    assert [f.fold_id for f in plan.folds] == ['quest2', 'quest3']
    assert len(plan.folds[0].test) == 3
    assert all(sid.startswith('quest3') for sid in plan.folds[0].train)
    assert plan.folds[1].test_device == 'quest3'
    _assert_clean(plan)


def test_lodo_needs_two_devices():
    with pytest.raises(PlanError, match='>= 2 device models'):
        plan_lodo(_sessions([('quest3', 'home', 'indoor', 4)]))


def test_pooled():
    sessions = _sessions([('quest3', 'home', 'indoor', 2), ('quest2', 'vrfs', 'indoor', 2)])
    plan = plan_pooled(sessions)
    assert plan.protocol == 'pooled'
    assert len(plan) == 4
    with pytest.raises(PlanError):
        plan_pooled(sessions[:2])


def test_transfer_zero_shot():
    indoor = _sessions([('quest3', 'home', 'indoor', 2)])
    outdoor = _sessions([('quest3', 'home', 'outdoor', 3)])
    plan = plan_transfer(indoor, outdoor)
    (fold,) = plan.folds
    assert fold.fold_id == 'zero_shot'
    assert fold.adaptation == ()
    assert len(fold.test) == 3


def test_transfer_few_shot_moves_sessions_out_of_test():
    indoor = _sessions([('quest3', 'home', 'indoor', 2), ('quest3', 'vrfs', 'indoor', 2)])
    outdoor = _sessions([('quest3', 'home', 'outdoor', 3), ('quest3', 'vrfs', 'outdoor', 3)])
    plan = plan_transfer(indoor, outdoor, few_shot_count=1, seed=5)
    (fold,) = plan.folds
    assert fold.fold_id == 'few_shot'
    assert len(fold.adaptation) == 2
    assert {sid.split('_')[1] for sid in fold.adaptation} == {'home', 'vrfs'}
    assert len(fold.test) == 4
    assert set(fold.fit_sessions) == set(fold.train) | set(fold.adaptation)
    _assert_clean(plan)
    # same seed, same draw
    assert plan_transfer(indoor, outdoor, 1, seed=5) == plan


@pytest.mark.parametrize('count, match', [(3, 'must be below'), (-1, '>= 0')])
def test_transfer_rejects_bad_few_shot(count, match):
    indoor = _sessions([('quest3', 'home', 'indoor', 2)])
    outdoor = _sessions([('quest3', 'home', 'outdoor', 3)])
    with pytest.raises(PlanError, match=match):
        plan_transfer(indoor, outdoor, count)


def test_transfer_needs_both_environments():
    with pytest.raises(PlanError, match='outdoor'):
        plan_transfer(_sessions([('quest3', 'home', 'indoor', 2)]), [])


def test_cross_device():
    sessions = _sessions([('quest3', 'home', 'indoor', 2), ('quest2', 'home', 'indoor', 2)])
    plan = plan_cross_device(sessions)
    ids = [f.fold_id for f in plan.folds]
    assert 'quest2->quest3' in ids and 'quest3->quest2' in ids
    # two off-diagonal folds plus one per session on the diagonal
    assert len(plan) == 6
    diagonal = [f for f in plan.folds if f.train_device == f.test_device]
    assert all(len(f.test) == 1 and len(f.train) == 1 for f in diagonal)
    _assert_clean(plan)


def test_hygiene_rejects_leaks():
    leaky = FoldPlan('loso', (Fold('f', ('a', 'b'), ('b',)),))
    with pytest.raises(PlanError, match="'b'"):
        check_hygiene(leaky)
    with pytest.raises(PlanError, match='empty test set'):
        check_hygiene(FoldPlan('loso', (Fold('f', ('a',), ()),)))


def test_plan_json_round_trip_is_checked():
    plan = plan_loso(_sessions([('quest3', 'home', 'indoor', 3)]))
    assert FoldPlan.from_json(plan.json) == plan
    obj = plan.json
    obj['folds'][0]['adaptation'] = list(obj['folds'][0]['test'])
    with pytest.raises(PlanError, match='also used for training'):
        FoldPlan.from_json(obj)


def test_plan_for():
    sessions = _sessions(
        [('quest3', 'home', 'indoor', 2), ('quest3', 'home', 'outdoor', 2), ('quest2', 'home', 'indoor', 2)]
    )
    assert plan_for('transfer', sessions).folds[0].train == tuple(
        sorted(s.session_id for s in sessions if s.environment == 'indoor')
    )
    assert plan_for('lodo', sessions).protocol == 'lodo'
    with pytest.raises(PlanError, match='unknown protocol'):
        plan_for('kfold', sessions)
