import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqsuite.errors import DimensionMismatch, InvariantViolation
from pqsuite.segmap import (
    PanopticAnnotation,
    SegmentRecord,
    build_label_map,
    promote_background,
    segment_table,
    validate,
)

from conftest import ann_from_planes, filled, scene_or_assume


def test_all_zero_planes_give_zero_segments():
    lm = build_label_map(np.zeros((4, 4)), np.zeros((4, 4)))
    assert segment_table(lm) == ()


def test_single_segment_identity():
    lm = build_label_map(np.full((2, 2), 1), np.full((2, 2), 7))
    (record,) = segment_table(lm)
    assert record == SegmentRecord(segment_id=7, class_id=1, area=4)


def test_instance_on_void_rejected():
    cls = np.zeros((2, 2))
    inst = np.zeros((2, 2))
    inst[0, 0] = 3
    with pytest.raises(InvariantViolation):
        build_label_map(cls, inst)


def test_plane_size_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        build_label_map(np.zeros((2, 3)), np.zeros((2, 3)), width=4, height=2)
    with pytest.raises(DimensionMismatch):
        build_label_map(np.zeros(6), np.zeros(6))


def test_instance_id_shared_by_two_classes_rejected():
    cls, inst = filled((4, 4), [(1, 5, slice(0, 2), slice(0, 4)),
                                (2, 5, slice(2, 4), slice(0, 4))])
    with pytest.raises(InvariantViolation):
        build_label_map(cls, inst)


def test_negative_ids_rejected():
    with pytest.raises(InvariantViolation):
        build_label_map(np.full((2, 2), -1), np.zeros((2, 2)))


def test_two_segment_table_from_pixel_enumeration():
    cls, inst = filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4)),
                                (1, 2, slice(2, 4), slice(0, 4))])
    lm = build_label_map(cls, inst)
    records = segment_table(lm)
    assert [r.area for r in records] == [8, 8]
    assert [r.segment_id for r in records] == [1, 2]


def test_full_frame_segment_area():
    lm = build_label_map(np.full((3, 5), 2), np.full((3, 5), 1))
    (record,) = segment_table(lm)
    assert record.area == 15


def test_table_ordering_and_purity():
    cls, inst = filled((4, 4), [(2, 9, slice(0, 2), slice(0, 2)),
                                (1, 4, slice(2, 4), slice(0, 2)),
                                (1, 2, slice(2, 4), slice(2, 4))])
    lm = build_label_map(cls, inst)
    first = segment_table(lm)
    assert [(r.class_id, r.segment_id) for r in first] == [(1, 2), (1, 4), (2, 9)]
    assert segment_table(lm) == first


def test_label_map_arrays_are_frozen():
    lm = build_label_map(np.full((2, 2), 1), np.full((2, 2), 1))
    with pytest.raises(ValueError):
        lm.class_of[0, 0] = 2


@given(st.integers(0, 2**32 - 1))
def test_area_sum_equals_instance_pixels(seed):
    from pqsuite.synth import SceneSpec

    ann = scene_or_assume(SceneSpec(seed=seed, width=32, height=32, classes=2,
                                    instances_per_class=(0, 3),
                                    radius_range=(2.0, 4.0)))
    total = sum(r.area for r in segment_table(ann.label_map))
    assert total == int((ann.label_map.instance_of != 0).sum())
    assert validate(ann) == []


def test_consistent_annotation_validates_clean():
    ann = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))]))
    assert validate(ann) == []


def test_area_mismatch_reported_once():
    cls, inst = filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))])
    lm = build_label_map(cls, inst)
    ann = PanopticAnnotation("img", lm, (SegmentRecord(1, 1, 9),))
    report = validate(ann)
    assert [v.kind for v in report] == ["area_mismatch"]


def test_duplicate_table_ids_reported():
    cls, inst = filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))])
    lm = build_label_map(cls, inst)
    ann = PanopticAnnotation("img", lm,
                             (SegmentRecord(1, 1, 8), SegmentRecord(1, 1, 8)))
    assert any(v.kind == "duplicate_id" for v in validate(ann))


def test_phantom_and_missing_rows_reported():
    cls, inst = filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))])
    lm = build_label_map(cls, inst)
    ann = PanopticAnnotation("img", lm, (SegmentRecord(2, 1, 4),))
    kinds = {v.kind for v in validate(ann)}
    assert kinds == {"phantom_row", "missing_row"}


def test_class_mismatch_reported():
    cls, inst = filled((4, 4), [(2, 1, slice(0, 2), slice(0, 4))])
    lm = build_label_map(cls, inst)
    ann = PanopticAnnotation("img", lm, (SegmentRecord(1, 1, 8),))
    assert any(v.kind == "class_mismatch" for v in validate(ann))


def test_validate_never_mutates_input():
    ann = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))]))
    before = ann.label_map.instance_of.copy()
    validate(ann)
    assert np.array_equal(ann.label_map.instance_of, before)


def test_promote_background_covers_every_pixel():
    ann = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4))]))
    promoted = promote_background(ann, background_class_id=9)
    assert validate(promoted) == []
    assert int((promoted.label_map.instance_of == 0).sum()) == 0
    areas = {r.class_id: r.area for r in promoted.segments}
    assert areas == {1: 8, 9: 8}


def test_promote_background_without_background_is_identity():
    ann = ann_from_planes(np.full((2, 2), 1), np.full((2, 2), 1))
    assert promote_background(ann, 9) is ann
