"""Built-in self-checks behind `pqsuite selftest`.

Each property runs against deterministic seed banks and reports pass/fail.
The hidden fault-injection switch relaxes the strict match inequality; a
healthy build must then fail the strictness property.
"""

from __future__ import annotations

import numpy as np

from . import synth
from .oracle import oracle_cells, oracle_aggregate
from .panoptic_io import IdMap, decode_panoptic_png, encode_panoptic_png
from .pqmetrics import MetricConfig, evaluate_annotations
from .matching import apply_void_rule, contingency, match_segments
from .segmap import build_label_map, PanopticAnnotation

IDENTITY_METRICS = ("pq", "mpq_plus", "bpq", "ipq", "wpq", "fwpq", "r2")
_TOLERANCE = 1e-12

Result = tuple[str, bool, str]


def _config(accept_equal_iou: bool, **overrides) -> MetricConfig:
    return MetricConfig(accept_equal_iou=accept_equal_iou, **overrides)


def _scene_bank(base_seed: int, images: int) -> dict[str, PanopticAnnotation]:
    # Instance counts vary across images so count regression has variance.
    return {
        f"img-{i:02d}": synth.generate_scene(
            synth.SceneSpec(seed=base_seed * 1000 + i, width=48, height=48,
                            classes=2,
                            instances_per_class=(1 + i % 3, 1 + i % 3),
                            radius_range=(3.0, 5.0)))
        for i in range(images)
    }


def _perturbed(gt: dict, base_seed: int) -> dict:
    kinds = ("erode", "shift", "drop", "spurious", "relabel-class")
    out = {}
    for index, (image_id, ann) in enumerate(sorted(gt.items())):
        kind = kinds[(base_seed + index) % len(kinds)]
        magnitude = 1.0 if kind in ("erode", "shift", "spurious") else 0.4
        out[image_id] = synth.perturb(
            ann, synth.Perturbation(kind=kind, magnitude=magnitude,
                                    seed=base_seed + index))
    return out


def _check_codec(seed_banks: int) -> Result:
    rng = np.random.default_rng(20_000)
    for _ in range(seed_banks):
        ids = rng.integers(0, 1 << 24, size=(40, 50), dtype=np.uint32)
        ids[0, 0] = 0
        ids[0, 1] = (1 << 24) - 1
        decoded = decode_panoptic_png(encode_panoptic_png(IdMap(50, 40, ids)))
        if not np.array_equal(decoded.id_of, ids):
            return ("codec round-trip is bit-exact", False, "id mismatch")
    return ("codec round-trip is bit-exact", True, "")


def _check_identity(seed_banks: int, accept_equal_iou: bool) -> Result:
    name = "identity evaluation scores 1.0 on every metric"
    for bank in range(seed_banks):
        gt = _scene_bank(bank + 1, images=3)
        report = evaluate_annotations(gt, gt, _config(accept_equal_iou),
                                      with_timestamp=False)
        for key in IDENTITY_METRICS:
            if report.aggregate.get(key) != 1.0:
                return (name, False,
                        f"seed bank {bank}: {key}={report.aggregate.get(key)!r}")
    return (name, True, "")


def _check_strictness(accept_equal_iou: bool) -> Result:
    # Two 6-px rectangles overlapping in 4 px: IoU is exactly 0.5.
    name = "IoU exactly 0.5 never matches"
    cls = np.zeros((4, 8), dtype=np.int32)
    inst = np.zeros((4, 8), dtype=np.int32)
    cls[1:3, 1:4] = 1
    inst[1:3, 1:4] = 1
    gt_map = build_label_map(cls, inst, 8, 4)
    cls2 = np.zeros((4, 8), dtype=np.int32)
    inst2 = np.zeros((4, 8), dtype=np.int32)
    cls2[1:3, 2:5] = 1
    inst2[1:3, 2:5] = 7
    pred_map = build_label_map(cls2, inst2, 8, 4)
    gt = PanopticAnnotation.from_label_map("fixture", gt_map)
    pred = PanopticAnnotation.from_label_map("fixture", pred_map)
    table = contingency(gt_map, pred_map)
    result = match_segments(table, gt.segments, pred.segments, 0.5,
                            accept_equal_iou=accept_equal_iou)
    result = apply_void_rule(result, table)
    match = result.by_class[1]
    ok = (len(match.tp_pairs) == 0 and len(match.fn_gts) == 1
          and len(match.fp_preds) + len(match.discarded_preds) == 1)
    return (name, ok, f"tp={len(match.tp_pairs)}")


def _check_oracle(seed_banks: int, accept_equal_iou: bool) -> Result:
    name = "fast pipeline matches the brute-force oracle"
    for bank in range(seed_banks):
        gt = _scene_bank(100 + bank, images=2)
        pred = _perturbed(gt, base_seed=bank)
        for denominator in ("kirillov", "eq1-literal"):
            for aggregate in ("macro-class", "macro-image"):
                config = _config(accept_equal_iou, denominator=denominator,
                                 aggregate=aggregate)
                report = evaluate_annotations(gt, pred, config,
                                              with_timestamp=False)
                reference = oracle_aggregate(oracle_cells(gt, pred, config), config)
                for key, expected in reference.items():
                    got = report.aggregate.get(key)
                    if expected is None and got is None:
                        continue
                    if expected is None or got is None \
                            or abs(expected - got) > _TOLERANCE:
                        return (name, False,
                                f"bank {bank} {denominator}/{aggregate} "
                                f"{key}: {got!r} vs {expected!r}")
    return (name, True, "")


def _check_limits(seed_banks: int, accept_equal_iou: bool) -> Result:
    name = "wPQ(a=1) and bPQ(d=1) collapse to PQ"
    for bank in range(seed_banks):
        gt = _scene_bank(200 + bank, images=2)
        pred = _perturbed(gt, base_seed=bank + 7)
        config = _config(accept_equal_iou, wpq_a=1.0, bpq_d=1.0)
        report = evaluate_annotations(gt, pred, config, with_timestamp=False)
        pq = report.aggregate["pq"]
        for key in ("wpq", "bpq"):
            if abs(report.aggregate[key] - pq) > _TOLERANCE:
                return (name, False,
                        f"bank {bank}: {key}={report.aggregate[key]!r} pq={pq!r}")
    return (name, True, "")


def run(seed_banks: int = 5, accept_equal_iou: bool = False) -> list[Result]:
    return [
        _check_codec(seed_banks),
        _check_identity(seed_banks, accept_equal_iou),
        _check_strictness(accept_equal_iou),
        _check_oracle(seed_banks, accept_equal_iou),
        _check_limits(seed_banks, accept_equal_iou),
    ]
