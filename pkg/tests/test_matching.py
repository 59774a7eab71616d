import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqsuite.errors import DimensionMismatch, InvalidCounts
from pqsuite.matching import apply_void_rule, contingency, iou, match_segments
from pqsuite.oracle import oracle_contingency
from pqsuite.segmap import SegmentRecord
from pqsuite.synth import Perturbation, SceneSpec, generate_scene, perturb

from conftest import ann_from_planes, filled, scene_or_assume


def _match(gt, pred, **kwargs):
    table = contingency(gt.label_map, pred.label_map)
    return table, match_segments(table, gt.segments, pred.segments, **kwargs)


def test_contingency_identity_two_segments():
    ann = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4)),
                                           (1, 2, slice(2, 4), slice(0, 4))]))
    table = contingency(ann.label_map, ann.label_map)
    assert table.pairs == {(1, 1): 8, (2, 2): 8}
    assert table.gt_areas == {1: 8, 2: 8}
    assert table.void_overlap == {}


def test_contingency_two_gt_one_pred():
    gt = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4)),
                                          (1, 2, slice(2, 4), slice(0, 4))]))
    pred = ann_from_planes(np.full((4, 4), 1), np.full((4, 4), 9))
    table = contingency(gt.label_map, pred.label_map)
    assert table.pairs == {(1, 9): 8, (2, 9): 8}
    assert table.pred_areas == {9: 16}


def test_contingency_pred_on_void():
    gt = ann_from_planes(np.zeros((4, 4)), np.zeros((4, 4)))
    pred = ann_from_planes(*filled((4, 4), [(1, 3, slice(0, 2), slice(0, 2))]))
    table = contingency(gt.label_map, pred.label_map)
    assert table.pairs == {}
    assert table.void_overlap == {3: 4}


def test_contingency_dimension_mismatch():
    a = ann_from_planes(np.zeros((2, 2)), np.zeros((2, 2)))
    b = ann_from_planes(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        contingency(a.label_map, b.label_map)


def test_iou_values():
    assert iou(12, 16, 16) == 0.6
    assert iou(16, 16, 16) == 1.0
    assert iou(0, 16, 16) == 0.0


def test_iou_invalid_counts():
    with pytest.raises(InvalidCounts):
        iou(5, 4, 8)
    with pytest.raises(InvalidCounts):
        iou(1, 0, 8)


def test_shifted_square_matches_at_point_six(shifted_square_pair):
    gt, pred = shifted_square_pair
    _, result = _match(gt, pred)
    match = result.by_class[1]
    assert len(match.tp_pairs) == 1
    assert match.tp_pairs[0][2] == 0.6
    assert match.fp_preds == () and match.fn_gts == ()


def test_exact_half_iou_never_matches(half_iou_pair):
    gt, pred = half_iou_pair
    _, result = _match(gt, pred)
    match = result.by_class[1]
    assert match.tp_pairs == ()
    assert len(match.fn_gts) == 1 and len(match.fp_preds) == 1


def test_exact_half_matches_with_relaxed_inequality(half_iou_pair):
    gt, pred = half_iou_pair
    _, result = _match(gt, pred, accept_equal_iou=True)
    assert len(result.by_class[1].tp_pairs) == 1


def test_class_aware_matching_ignores_cross_class_overlap():
    gt = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 4), slice(0, 4))]))
    pred = ann_from_planes(*filled((4, 4), [(2, 1, slice(0, 4), slice(0, 4))]))
    _, result = _match(gt, pred)
    assert result.by_class[1].fn_gts == (1,)
    assert result.by_class[2].fp_preds == (1,)


def test_void_rule_discards_mostly_void_fp():
    gt = ann_from_planes(*filled((4, 10), [(1, 1, slice(0, 1), slice(0, 10))]))
    # 10-px pred: 4 px on the gt strip, 6 px on void -> IoU 0.25, FP
    pred = ann_from_planes(*filled((4, 10), [(1, 5, slice(0, 1), slice(0, 4)),
                                             (1, 5, slice(1, 3), slice(0, 3))]))
    table, result = _match(gt, pred)
    assert result.by_class[1].fp_preds == (5,)
    cleaned = apply_void_rule(result, table)
    assert cleaned.by_class[1].fp_preds == ()
    assert cleaned.by_class[1].discarded_preds == (5,)


def test_void_rule_keeps_mostly_matter_fp():
    gt = ann_from_planes(*filled((4, 10), [(1, 1, slice(0, 1), slice(0, 10))]))
    # 10-px pred: 4 px on void, 6 px on the gt strip
    pred = ann_from_planes(*filled((4, 10), [(1, 5, slice(0, 1), slice(0, 6)),
                                             (1, 5, slice(1, 2), slice(0, 4))]))
    table, result = _match(gt, pred)
    assert result.by_class[1].fp_preds == (5,)
    cleaned = apply_void_rule(result, table)
    assert cleaned.by_class[1].fp_preds == (5,)
    assert cleaned.by_class[1].discarded_preds == ()


def test_void_rule_without_void_is_identity():
    full_gt = ann_from_planes(np.full((4, 4), 1), np.full((4, 4), 1))
    pred = ann_from_planes(*filled((4, 4), [(1, 2, slice(0, 4), slice(0, 2)),
                                            (2, 3, slice(0, 4), slice(2, 4))]))
    table, result = _match(full_gt, pred)
    cleaned = apply_void_rule(result, table)
    assert cleaned.by_class == result.by_class


def test_low_threshold_ties_break_by_lower_pred_key():
    # one gt block; two predictions overlap it with identical IoU 0.5
    gt = ann_from_planes(*filled((2, 4), [(1, 1, slice(0, 2), slice(0, 4))]))
    pred = ann_from_planes(*filled((2, 4), [(1, 4, slice(0, 2), slice(0, 2)),
                                            (1, 2, slice(0, 2), slice(2, 4))]))
    _, result = _match(gt, pred, match_threshold=0.2)
    match = result.by_class[1]
    assert [(g, p) for g, p, _ in match.tp_pairs] == [(1, 2)]
    assert match.fp_preds == (4,)


def test_semantic_pixels_without_instances_are_unscored():
    cls, inst = filled((4, 4), [(2, 0, slice(0, 2), slice(0, 4)),
                                (1, 1, slice(2, 4), slice(0, 4))])
    gt = ann_from_planes(cls, inst)
    assert [r.class_id for r in gt.segments] == [1]
    pred = ann_from_planes(*filled((4, 4), [(1, 9, slice(0, 2), slice(0, 4))]))
    table, result = _match(gt, pred)
    # the instance-free class-2 strip absorbs the prediction like void
    assert table.void_overlap == {9: 8}
    cleaned = apply_void_rule(result, table)
    assert cleaned.by_class[1].discarded_preds == (9,)


def test_crowd_segments_absorb_fps_and_leave_populations():
    cls, inst = filled((4, 8), [(1, 1, slice(0, 4), slice(0, 4)),
                                (1, 2, slice(0, 4), slice(4, 8))])
    gt_map = ann_from_planes(cls, inst).label_map
    gt_segments = (SegmentRecord(1, 1, 16), SegmentRecord(2, 1, 16, ignore_flag=True))
    pred = ann_from_planes(*filled((4, 8), [(1, 9, slice(0, 4), slice(4, 8))]))
    table = contingency(gt_map, pred.label_map)
    result = match_segments(table, gt_segments, pred.segments)
    assert result.crowd_gts == (2,)
    assert result.by_class[1].fn_gts == (1,)   # crowd is not a FN
    assert result.by_class[1].fp_preds == (9,)
    cleaned = apply_void_rule(result, table)
    assert cleaned.by_class[1].discarded_preds == (9,)  # absorbed by the crowd


def test_self_match_is_perfect():
    ann = generate_scene(SceneSpec(seed=11, width=32, height=32, classes=2,
                                   instances_per_class=(2, 3),
                                   radius_range=(2.0, 4.0)))
    _, result = _match(ann, ann)
    for match in result.by_class.values():
        assert match.fp_preds == () and match.fn_gts == ()
        assert all(v == 1.0 for _, _, v in match.tp_pairs)


def test_subtract_void_raises_iou():
    # pred: 10 px on the gt block, 5 px on void; raw IoU 10/21, corrected 10/16
    gt = ann_from_planes(*filled((4, 8), [(1, 1, slice(0, 2), slice(0, 8))]))
    pred = ann_from_planes(*filled((4, 8), [(1, 1, slice(0, 2), slice(0, 5)),
                                            (1, 1, slice(2, 3), slice(0, 5))]))
    _, raw = _match(gt, pred)
    assert raw.by_class[1].tp_pairs == ()
    _, corrected = _match(gt, pred, subtract_void=True)
    assert len(corrected.by_class[1].tp_pairs) == 1


@st.composite
def _scene_and_perturbation(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    kind = draw(st.sampled_from(["erode", "dilate", "shift", "drop",
                                 "split", "merge", "spurious", "relabel-class"]))
    if kind in ("erode", "dilate", "shift"):
        magnitude = draw(st.integers(0, 2))
    elif kind == "spurious":
        magnitude = draw(st.integers(0, 3))
    else:
        magnitude = draw(st.floats(0.0, 0.8))
    return seed, Perturbation(kind=kind, magnitude=magnitude, seed=seed ^ 0xBEEF)


@given(_scene_and_perturbation())
def test_uniqueness_and_conservation(case):
    seed, perturbation = case
    gt = scene_or_assume(SceneSpec(seed=seed, width=32, height=32, classes=2,
                                   instances_per_class=(1, 3),
                                   radius_range=(2.0, 4.0)))
    pred = perturb(gt, perturbation)
    table, result = _match(gt, pred)
    result = apply_void_rule(result, table)

    gt_count = {}
    for rec in gt.segments:
        gt_count[rec.class_id] = gt_count.get(rec.class_id, 0) + 1
    pred_count = {}
    for rec in pred.segments:
        pred_count[rec.class_id] = pred_count.get(rec.class_id, 0) + 1

    seen_gt, seen_pred = set(), set()
    for class_id, match in result.by_class.items():
        for g, p, value in match.tp_pairs:
            assert value > 0.5
            assert g not in seen_gt and p not in seen_pred
            seen_gt.add(g)
            seen_pred.add(p)
        assert len(match.tp_pairs) + len(match.fn_gts) == gt_count.get(class_id, 0)
        assert (len(match.tp_pairs) + len(match.fp_preds)
                + len(match.discarded_preds)) == pred_count.get(class_id, 0)


@given(st.integers(0, 2**31 - 1))
def test_contingency_conserves_pixel_counts(seed):
    gt = scene_or_assume(SceneSpec(seed=seed, width=32, height=32, classes=2,
                                   instances_per_class=(1, 3),
                                   radius_range=(2.0, 3.5)))
    pred = perturb(gt, Perturbation("dilate", 1, seed=seed))
    table = contingency(gt.label_map, pred.label_map)
    for (g, p), inter in table.pairs.items():
        assert inter <= min(table.gt_areas[g], table.pred_areas[p])
    for p, area in table.pred_areas.items():
        matched = sum(n for (_, pp), n in table.pairs.items() if pp == p)
        assert matched + table.void_overlap.get(p, 0) == area
    covered = (sum(table.pairs.values()) + sum(table.void_overlap.values()))
    assert covered == int((pred.label_map.instance_of != 0).sum())


@given(st.integers(0, 2**31 - 1))
def test_contingency_equals_oracle(seed):
    gt = scene_or_assume(SceneSpec(seed=seed, width=24, height=24, classes=2,
                                   instances_per_class=(1, 2),
                                   radius_range=(2.0, 3.5)))
    pred = perturb(gt, Perturbation("shift", 1, seed=seed))
    fast = contingency(gt.label_map, pred.label_map)
    slow = oracle_contingency(gt, pred)
    assert fast.pairs == slow.pairs
    assert fast.gt_areas == slow.gt_areas
    assert fast.pred_areas == slow.pred_areas
    assert {k: v for k, v in fast.void_overlap.items() if v} == slow.void_overlap
