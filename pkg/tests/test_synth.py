import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pqsuite.errors import InfeasibleSpec, InvalidParameter
from pqsuite.matching import contingency, match_segments
from pqsuite.panoptic_io import IdMap, encode_panoptic_png
from pqsuite.segmap import validate
from pqsuite.synth import (
    PERTURBATION_KINDS,
    Perturbation,
    SceneSpec,
    generate_scene,
    perturb,
)

from conftest import ann_from_planes, filled, scene_or_assume


def _encoded(ann) -> bytes:
    lm = ann.label_map
    return encode_panoptic_png(IdMap(lm.width, lm.height,
                                     lm.instance_of.astype(np.uint32)))


def test_generation_is_deterministic():
    spec = SceneSpec(seed=123, width=64, height=64)
    assert _encoded(generate_scene(spec)) == _encoded(generate_scene(spec))


def test_zero_instances_gives_void_scene():
    spec = SceneSpec(seed=1, classes=2, instances_per_class=(0, 0))
    ann = generate_scene(spec)
    assert ann.segments == ()
    assert int(ann.label_map.instance_of.sum()) == 0


def test_fixed_count_scene_structure():
    spec = SceneSpec(seed=9, width=64, height=64, classes=2,
                     instances_per_class=(3, 3))
    ann = generate_scene(spec)
    assert len(ann.segments) == 6
    assert sorted({r.class_id for r in ann.segments}) == [1, 2]
    assert all(r.area >= 4 for r in ann.segments)
    assert validate(ann) == []


def test_infeasible_spec_rejected_up_front():
    with pytest.raises(InfeasibleSpec):
        generate_scene(SceneSpec(seed=0, width=16, height=16, classes=4,
                                 instances_per_class=(6, 6),
                                 radius_range=(4.0, 6.0)))


def test_blobs_respect_min_gap():
    ann = generate_scene(SceneSpec(seed=21, width=64, height=64, classes=2,
                                   instances_per_class=(3, 3), min_gap=2))
    inst = ann.label_map.instance_of
    for rec in ann.segments:
        mask = inst == rec.segment_id
        ys, xs = np.nonzero(mask)
        for y, x in zip(ys.tolist(), xs.tolist()):
            window = inst[max(0, y - 1):y + 2, max(0, x - 1):x + 2]
            assert set(np.unique(window)) <= {0, rec.segment_id}


@pytest.mark.parametrize("kind", PERTURBATION_KINDS)
def test_zero_magnitude_is_identity(kind):
    ann = generate_scene(SceneSpec(seed=31, width=48, height=48))
    out = perturb(ann, Perturbation(kind, 0.0, seed=7))
    assert np.array_equal(out.label_map.class_of, ann.label_map.class_of)
    assert int((out.label_map.instance_of != 0).sum()) \
        == int((ann.label_map.instance_of != 0).sum())


def test_total_erosion_erases_all_segments():
    ann = generate_scene(SceneSpec(seed=13, width=48, height=48,
                                   radius_range=(2.0, 4.0)))
    out = perturb(ann, Perturbation("erode", 10, seed=0))
    assert out.segments == ()


def test_shift_one_reproduces_matching_fixture():
    # 4x4 square scene; a 1-px cardinal shift gives IoU 12/20 = 0.6.
    ann = ann_from_planes(*filled((8, 8), [(1, 1, slice(2, 6), slice(2, 6))]))
    shifted = perturb(ann, Perturbation("shift", 1, seed=1))
    table = contingency(ann.label_map, shifted.label_map)
    result = match_segments(table, ann.segments, shifted.segments)
    ((_, _, value),) = result.by_class[1].tp_pairs
    assert value == 0.6


def test_erosion_never_raises_segment_iou():
    ann = generate_scene(SceneSpec(seed=17, width=48, height=48,
                                   radius_range=(3.0, 6.0)))
    inst = ann.label_map.instance_of
    previous = {rec.segment_id: 1.0 for rec in ann.segments}
    for magnitude in (1, 2, 3, 4):
        eroded = perturb(ann, Perturbation("erode", magnitude, seed=0))
        out = eroded.label_map.instance_of
        for rec in ann.segments:
            source = inst == rec.segment_id
            ids = np.unique(out[source])
            ids = ids[ids != 0]
            if ids.size == 0:
                value = 0.0
            else:
                piece = out == ids[0]
                value = int((piece & source).sum()) / int((piece | source).sum())
            assert value <= previous[rec.segment_id] + 1e-12
            previous[rec.segment_id] = value


@given(st.integers(0, 2**31 - 1),
       st.sampled_from(PERTURBATION_KINDS),
       st.floats(0.0, 2.0))
def test_perturbed_scenes_stay_valid(seed, kind, magnitude):
    ann = scene_or_assume(SceneSpec(seed=seed, width=32, height=32,
                                    classes=2, instances_per_class=(1, 3),
                                    radius_range=(2.0, 4.0)))
    out = perturb(ann, Perturbation(kind, magnitude, seed=seed ^ 0xA5A5))
    assert validate(out) == []


def test_perturbation_validates_kind_and_magnitude():
    with pytest.raises(InvalidParameter):
        Perturbation("squash", 1.0)
    with pytest.raises(InvalidParameter):
        Perturbation("erode", -1.0)


def test_perturbation_is_deterministic():
    ann = generate_scene(SceneSpec(seed=55, width=48, height=48))
    p = Perturbation("split", 0.6, seed=9)
    assert _encoded(perturb(ann, p)) == _encoded(perturb(ann, p))
