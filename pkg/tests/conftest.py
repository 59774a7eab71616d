import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings

from pqsuite.errors import InfeasibleSpec
from pqsuite.segmap import PanopticAnnotation, build_label_map
from pqsuite.synth import SceneSpec, generate_scene

settings.register_profile(
    "suite", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def scene_or_assume(spec: SceneSpec) -> PanopticAnnotation:
    """Generate a scene inside a hypothesis test, skipping infeasible draws."""
    try:
        return generate_scene(spec)
    except InfeasibleSpec:
        assume(False)


def ann_from_planes(class_plane, instance_plane, image_id="img") -> PanopticAnnotation:
    cls = np.asarray(class_plane, dtype=np.int32)
    label_map = build_label_map(cls, np.asarray(instance_plane, dtype=np.int32))
    return PanopticAnnotation.from_label_map(image_id, label_map)


def filled(shape, regions) -> tuple[np.ndarray, np.ndarray]:
    """Planes from a list of (class_id, instance_id, row slice, col slice)."""
    cls = np.zeros(shape, dtype=np.int32)
    inst = np.zeros(shape, dtype=np.int32)
    for class_id, instance_id, rows, cols in regions:
        cls[rows, cols] = class_id
        inst[rows, cols] = instance_id
    return cls, inst


@pytest.fixture
def shifted_square_pair():
    """4x4 ground-truth square vs. the same square shifted one column.

    Intersection 12, union 20, IoU 0.6.
    """
    gt = ann_from_planes(*filled((6, 6), [(1, 1, slice(1, 5), slice(0, 4))]))
    pred = ann_from_planes(*filled((6, 6), [(1, 1, slice(1, 5), slice(1, 5))]))
    return gt, pred


@pytest.fixture
def half_iou_pair():
    """Two 6-px rectangles overlapping in 4 px: IoU exactly 0.5."""
    gt = ann_from_planes(*filled((4, 8), [(1, 1, slice(1, 3), slice(1, 4))]))
    pred = ann_from_planes(*filled((4, 8), [(1, 7, slice(1, 3), slice(2, 5))]))
    return gt, pred
