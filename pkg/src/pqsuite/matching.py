"""Segment matching: contingency histograms, IoU, unique pairing, void handling.

Matching is class-aware and uses a strict IoU threshold (default 0.5). At
thresholds of 0.5 and above the resulting assignment is provably unique; for
configured lower thresholds, ties break by higher IoU, then lower pred key.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidCounts
from .segmap import LabelMap, SegmentRecord

_OFFSET = 1 << 32


@dataclass(frozen=True)
class ContingencyTable:
    """Joint pixel histogram of one ground-truth/prediction map pair.

    ``pairs`` holds intersection counts for co-occurring segment pairs,
    ``void_overlap`` how many pixels of each predicted segment sit on
    ground-truth pixels that belong to no segment.
    """

    width: int
    height: int
    pairs: Mapping[tuple[int, int], int]
    gt_areas: Mapping[int, int]
    pred_areas: Mapping[int, int]
    void_overlap: Mapping[int, int]


@dataclass(frozen=True)
class ClassMatch:
    """Per-class match outcome: TP pairs with IoU, plus FP/FN/discarded sets."""

    tp_pairs: tuple[tuple[int, int, float], ...]
    fp_preds: tuple[int, ...]
    fn_gts: tuple[int, ...]
    discarded_preds: tuple[int, ...] = ()


@dataclass(frozen=True)
class MatchResult:
    """Match outcome of one image, keyed by class id.

    ``crowd_gts`` lists ground-truth segments excluded from scoring; their
    pixels absorb overlapping false positives like void does.
    """

    by_class: Mapping[int, ClassMatch]
    crowd_gts: tuple[int, ...] = ()


def contingency(gt: LabelMap, pred: LabelMap) -> ContingencyTable:
    """Exact intersection counts for every co-occurring segment pair.

    Single pass over the pixels via a combined 64-bit histogram. Also yields
    per-segment total areas and pred-vs-void overlap counts.
    """
    if gt.shape != pred.shape:
        raise DimensionMismatch(f"gt frame {gt.shape} vs pred frame {pred.shape}")
    g = gt.instance_of.astype(np.int64).ravel()
    p = pred.instance_of.astype(np.int64).ravel()
    values, counts = np.unique(g * _OFFSET + p, return_counts=True)

    pairs: dict[tuple[int, int], int] = {}
    gt_areas: dict[int, int] = defaultdict(int)
    pred_areas: dict[int, int] = defaultdict(int)
    void_overlap: dict[int, int] = defaultdict(int)
    for v, n in zip(values.tolist(), counts.tolist()):
        gi, pi = divmod(v, _OFFSET)
        if gi:
            gt_areas[gi] += n
        if pi:
            pred_areas[pi] += n
            if gi:
                pairs[(gi, pi)] = n
            else:
                void_overlap[pi] += n
    return ContingencyTable(gt.width, gt.height, pairs,
                            dict(gt_areas), dict(pred_areas), dict(void_overlap))


def iou(intersection: int, gt_area: int, pred_area: int) -> float:
    """Intersection over union from integer counts."""
    if gt_area <= 0 or pred_area <= 0:
        raise InvalidCounts("segment areas must be positive")
    if intersection < 0 or intersection > min(gt_area, pred_area):
        raise InvalidCounts(
            f"intersection {intersection} exceeds min area "
            f"({gt_area}, {pred_area})")
    return intersection / (gt_area + pred_area - intersection)


def match_segments(table: ContingencyTable,
                   gt_segments: Sequence[SegmentRecord],
                   pred_segments: Sequence[SegmentRecord],
                   match_threshold: float = 0.5,
                   *,
                   accept_equal_iou: bool = False,
                   subtract_void: bool = False) -> MatchResult:
    """Form unique same-class TP pairs with IoU strictly above the threshold.

    Ground-truth segments flagged as crowd are excluded from the populations.
    ``subtract_void`` removes a prediction's void overlap from the union before
    thresholding (off by default: raw pixel-set IoU). ``accept_equal_iou``
    relaxes the strict inequality to >= and exists for fault-injection tests.
    """
    gt_class = {s.segment_id: s.class_id for s in gt_segments if not s.ignore_flag}
    crowd = tuple(sorted(s.segment_id for s in gt_segments if s.ignore_flag))
    pred_class = {s.segment_id: s.class_id for s in pred_segments}

    candidates = []
    for (g, p), inter in table.pairs.items():
        if g not in gt_class or p not in pred_class:
            continue
        if gt_class[g] != pred_class[p]:
            continue
        union = table.gt_areas[g] + table.pred_areas[p] - inter
        if subtract_void:
            union -= table.void_overlap.get(p, 0)
        value = inter / union
        if value > match_threshold or (accept_equal_iou and value == match_threshold):
            candidates.append((value, g, p))
    candidates.sort(key=lambda t: (-t[0], t[2], t[1]))

    matched_gt: dict[int, tuple[int, float]] = {}
    matched_pred: set[int] = set()
    for value, g, p in candidates:
        if g in matched_gt or p in matched_pred:
            continue
        matched_gt[g] = (p, value)
        matched_pred.add(p)

    classes = sorted(set(gt_class.values()) | set(pred_class.values()))
    by_class: dict[int, ClassMatch] = {}
    for c in classes:
        tp = tuple(sorted(
            (g, gp[0], gp[1]) for g, gp in matched_gt.items() if gt_class[g] == c
        ))
        fn = tuple(sorted(g for g, cc in gt_class.items()
                          if cc == c and g not in matched_gt))
        fp = tuple(sorted(p for p, cc in pred_class.items()
                          if cc == c and p not in matched_pred))
        by_class[c] = ClassMatch(tp_pairs=tp, fp_preds=fp, fn_gts=fn)
    return MatchResult(by_class=by_class, crowd_gts=crowd)


def apply_void_rule(result: MatchResult, table: ContingencyTable,
                    void_fraction_threshold: float = 0.5) -> MatchResult:
    """Discard false positives that mostly cover void or crowd pixels.

    A FP prediction moves to ``discarded_preds`` when the fraction of its area
    lying on ground-truth void (plus any crowd segments) strictly exceeds the
    threshold. TP pairs are never discarded.
    """
    def absorbed(p: int) -> int:
        total = table.void_overlap.get(p, 0)
        for g in result.crowd_gts:
            total += table.pairs.get((g, p), 0)
        return total

    by_class: dict[int, ClassMatch] = {}
    for c, match in result.by_class.items():
        keep, discard = [], list(match.discarded_preds)
        for p in match.fp_preds:
            area = table.pred_areas.get(p, 0)
            if area > 0 and absorbed(p) / area > void_fraction_threshold:
                discard.append(p)
            else:
                keep.append(p)
        by_class[c] = replace(match, fp_preds=tuple(keep),
                              discarded_preds=tuple(sorted(discard)))
    return MatchResult(by_class=by_class, crowd_gts=result.crowd_gts)
