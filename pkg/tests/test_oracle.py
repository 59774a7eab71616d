import numpy as np
import pytest

from pqsuite.errors import FrameTooLarge
from pqsuite.matching import contingency
from pqsuite.oracle import (
    oracle_aggregate,
    oracle_band,
    oracle_cells,
    oracle_contingency,
    oracle_metrics,
    pixel_sets,
)
from pqsuite.pqmetrics import MetricConfig, evaluate_annotations
from pqsuite.synth import Perturbation, SceneSpec, generate_scene, perturb

from conftest import ann_from_planes, filled


def test_pixel_sets_roundtrip():
    ann = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 2)),
                                           (2, 2, slice(2, 4), slice(2, 4))]))
    sets = pixel_sets(ann)
    assert sets == {1: {(0, 0), (1, 0), (0, 1), (1, 1)},
                    2: {(2, 2), (3, 2), (2, 3), (3, 3)}}


def test_contingency_guard():
    big = ann_from_planes(np.zeros((200, 200)), np.zeros((200, 200)))
    with pytest.raises(FrameTooLarge):
        oracle_contingency(big, big)


def test_band_guard():
    with pytest.raises(FrameTooLarge):
        oracle_band(np.zeros((100, 100), dtype=bool), 1)


def test_metrics_guard():
    big = ann_from_planes(np.zeros((100, 100)), np.zeros((100, 100)))
    with pytest.raises(FrameTooLarge):
        oracle_metrics({"a": big}, {"a": big})


def test_empty_maps_give_empty_table():
    empty = ann_from_planes(np.zeros((8, 8)), np.zeros((8, 8)))
    table = oracle_contingency(empty, empty)
    assert table.pairs == {} and table.gt_areas == {}


def test_oracle_contingency_matches_fast_path_fixture():
    gt = ann_from_planes(*filled((4, 4), [(1, 1, slice(0, 2), slice(0, 4)),
                                          (1, 2, slice(2, 4), slice(0, 4))]))
    pred = ann_from_planes(np.full((4, 4), 1), np.full((4, 4), 9))
    slow = oracle_contingency(gt, pred)
    fast = contingency(gt.label_map, pred.label_map)
    assert slow.pairs == fast.pairs == {(1, 9): 8, (2, 9): 8}


def test_identity_scene_scores_one_everywhere():
    gt = {
        "a": generate_scene(SceneSpec(seed=2, width=32, height=32,
                                      instances_per_class=(1, 1))),
        "b": generate_scene(SceneSpec(seed=3, width=32, height=32,
                                      instances_per_class=(2, 2))),
    }
    result = oracle_metrics(gt, gt)
    for key in ("pq", "mpq_plus", "bpq", "ipq", "wpq", "fwpq", "r2"):
        assert result[key] == 1.0, key


@pytest.mark.parametrize("config", [
    MetricConfig(subtract_void=True),
    MetricConfig(bpq_mode="min", bpq_d=0.05),
    MetricConfig(fwpq_weight_basis="instances"),
    MetricConfig(match_threshold=0.3, wpq_a=4.0, wpq_d=0.05),
], ids=["subtract-void", "bpq-min", "fwpq-instances", "low-threshold"])
def test_oracle_agrees_on_secondary_config_axes(config):
    gt, pred = {}, {}
    for i in range(3):
        scene = generate_scene(SceneSpec(seed=500 + i, width=32, height=32,
                                         classes=2, instances_per_class=(1, 3),
                                         radius_range=(2.5, 4.0)))
        gt[f"i{i}"] = scene
        pred[f"i{i}"] = perturb(scene, Perturbation(("shift", "dilate", "erode")[i],
                                                    1, seed=40 + i))
    report = evaluate_annotations(gt, pred, config, with_timestamp=False)
    reference = oracle_metrics(gt, pred, config)
    for key, expected in reference.items():
        got = report.aggregate[key]
        if expected is None:
            assert got is None, key
        else:
            assert got == pytest.approx(expected, abs=1e-12), key


@pytest.mark.parametrize("denominator", ["kirillov", "eq1-literal"])
@pytest.mark.parametrize("aggregate", ["macro-class", "macro-image"])
def test_oracle_agrees_with_fast_path(denominator, aggregate):
    config = MetricConfig(denominator=denominator, aggregate=aggregate)
    gt, pred = {}, {}
    for i in range(3):
        scene = generate_scene(SceneSpec(seed=900 + i, width=32, height=32,
                                         classes=2, instances_per_class=(1, 3),
                                         radius_range=(2.5, 4.0)))
        gt[f"i{i}"] = scene
        pred[f"i{i}"] = perturb(scene, Perturbation("erode", 1, seed=i))
    report = evaluate_annotations(gt, pred, config, with_timestamp=False)
    reference = oracle_aggregate(oracle_cells(gt, pred, config), config)
    for key, expected in reference.items():
        got = report.aggregate[key]
        if expected is None:
            assert got is None, key
        else:
            assert got == pytest.approx(expected, abs=1e-12), key
