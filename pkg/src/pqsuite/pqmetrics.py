"""The panoptic quality metric family and its aggregation conventions.

Every metric is built from per-(image, class) cells holding TP/FP/FN counts
plus quality sums over the TP pairs. Cells where TP+FP+FN is zero are
*undefined* and excluded from every mean rather than counted as 0 or 1.

Two denominator conventions are supported. ``kirillov`` (default) divides by
``TP + FP/2 + FN/2`` and is the form under which per-class PQ factors exactly
into SQ * RQ. ``eq1-literal`` divides by ``(TP + FP + FN)/2``; note that under
it a perfect prediction scores 2, not 1, so [0, 1] ranges hold only for the
default convention.

Two aggregation conventions are supported for PQ, bPQ and wPQ. ``macro-class``
(default) averages each class over its defined image cells, then averages the
per-class values. ``macro-image`` averages each image over its defined class
cells, then averages the per-image values. mPQ+ instead pools counts and
quality sums per class across the whole dataset before averaging over classes;
fwPQ weights those pooled per-class values by ground-truth pixel frequency;
iPQ follows the macro-image shape but drops classes absent from an image's
ground truth (null) even when they were predicted.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Mapping, Sequence

from . import panoptic_io
from .boundary import band_radius, boundary_iou, weighted_pair_quality
from .errors import (
    EmptyDataset,
    ImageSetMismatch,
    InvalidCounts,
    InvalidParameter,
)
from .matching import MatchResult, apply_void_rule, contingency, match_segments
from .segmap import PanopticAnnotation, promote_background

ALL_METRICS = ("pq", "mpq+", "bpq", "ipq", "wpq", "fwpq", "r2")

_DENOMINATORS = ("kirillov", "eq1-literal")
_AGGREGATES = ("macro-class", "macro-image")
_BPQ_MODES = ("boundary", "min")
_FWPQ_BASES = ("pixels", "instances")


@dataclass(frozen=True)
class MetricConfig:
    """Fully explicit metric parameters; echoed verbatim into every report."""

    denominator: str = "kirillov"
    aggregate: str = "macro-class"
    match_threshold: float = 0.5
    void_fraction_threshold: float = 0.5
    bpq_d: float = 0.02
    bpq_mode: str = "boundary"
    wpq_a: float = 10.0
    wpq_d: float = 0.02
    fwpq_weight_basis: str = "pixels"
    subtract_void: bool = False
    score_background: bool = False
    # Test hook: relaxes the strict match inequality to >= (fault injection).
    accept_equal_iou: bool = False

    def __post_init__(self) -> None:
        if self.denominator not in _DENOMINATORS:
            raise InvalidParameter(f"denominator must be one of {_DENOMINATORS}")
        if self.aggregate not in _AGGREGATES:
            raise InvalidParameter(f"aggregate must be one of {_AGGREGATES}")
        if self.bpq_mode not in _BPQ_MODES:
            raise InvalidParameter(f"bpq_mode must be one of {_BPQ_MODES}")
        if self.fwpq_weight_basis not in _FWPQ_BASES:
            raise InvalidParameter(f"fwpq_weight_basis must be one of {_FWPQ_BASES}")
        if not 0.0 <= self.match_threshold < 1.0:
            raise InvalidParameter("match_threshold must lie in [0, 1)")
        if not 0.0 <= self.void_fraction_threshold <= 1.0:
            raise InvalidParameter("void_fraction_threshold must lie in [0, 1]")
        if not 0.0 < self.bpq_d <= 1.0:
            raise InvalidParameter("bpq_d must lie in (0, 1]")
        if not 0.0 < self.wpq_d <= 1.0:
            raise InvalidParameter("wpq_d must lie in (0, 1]")
        if self.wpq_a < 1.0:
            raise InvalidParameter("wpq_a must be >= 1")


@dataclass(frozen=True)
class PqStats:
    """Canonical accumulator: match counts plus the quality sum over TPs."""

    tp_count: int = 0
    fp_count: int = 0
    fn_count: int = 0
    quality_sum: float = 0.0

    def __post_init__(self) -> None:
        if min(self.tp_count, self.fp_count, self.fn_count) < 0:
            raise InvalidCounts("match counts must be non-negative")
        if not -1e-9 <= self.quality_sum <= self.tp_count + 1e-9:
            raise InvalidCounts(
                f"quality sum {self.quality_sum} outside [0, tp={self.tp_count}]")

    def __add__(self, other: "PqStats") -> "PqStats":
        return PqStats(self.tp_count + other.tp_count,
                       self.fp_count + other.fp_count,
                       self.fn_count + other.fn_count,
                       self.quality_sum + other.quality_sum)

    @property
    def defined(self) -> bool:
        return self.tp_count + self.fp_count + self.fn_count > 0


def pq_stats(result: MatchResult,
             quality: Callable[[int, int, int, float], float] | None = None,
             ) -> dict[int, PqStats]:
    """Per-class stats from a match result.

    ``quality`` maps (class_id, gt_key, pred_key, matching IoU) to the quality
    value credited for that TP pair; by default the matching IoU itself is
    used. Discarded predictions are excluded from the FP counts.
    """
    out: dict[int, PqStats] = {}
    for class_id in sorted(result.by_class):
        match = result.by_class[class_id]
        total = 0.0
        for g, p, v in match.tp_pairs:
            total += v if quality is None else quality(class_id, g, p, v)
        out[class_id] = PqStats(len(match.tp_pairs), len(match.fp_preds),
                                len(match.fn_gts), total)
    return out


def quality_ratio(stats: PqStats,
                  convention: str = "kirillov") -> tuple[float, float, float] | None:
    """(PQ, SQ, RQ) of one accumulator, or None when all counts are zero.

    Under either convention PQ equals SQ * RQ exactly.
    """
    if not stats.defined:
        return None
    tp, fp, fn = stats.tp_count, stats.fp_count, stats.fn_count
    if convention == "kirillov":
        denom = tp + 0.5 * fp + 0.5 * fn
    elif convention == "eq1-literal":
        denom = 0.5 * (tp + fp + fn)
    else:
        raise InvalidParameter(f"unknown denominator convention {convention!r}")
    sq = stats.quality_sum / tp if tp > 0 else 0.0
    rq = tp / denom
    return (stats.quality_sum / denom, sq, rq)


@dataclass
class CellStats:
    """One (image, class) cell: counts plus quality sums per IoU variant."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    discarded: int = 0
    iou_sum: float = 0.0
    biou_sum: float = 0.0
    wiou_sum: float = 0.0
    gt_pixels: int = 0

    @property
    def defined(self) -> bool:
        return self.tp + self.fp + self.fn > 0

    def merged(self, other: "CellStats") -> "CellStats":
        return CellStats(self.tp + other.tp, self.fp + other.fp,
                         self.fn + other.fn, self.discarded + other.discarded,
                         self.iou_sum + other.iou_sum,
                         self.biou_sum + other.biou_sum,
                         self.wiou_sum + other.wiou_sum,
                         self.gt_pixels + other.gt_pixels)


def _cell_value(cell: CellStats, convention: str, quality_field: str) -> float | None:
    if not cell.defined:
        return None
    quality = getattr(cell, quality_field)
    if convention == "kirillov":
        denom = cell.tp + 0.5 * cell.fp + 0.5 * cell.fn
    else:
        denom = 0.5 * (cell.tp + cell.fp + cell.fn)
    return quality / denom


def image_cells(gt: PanopticAnnotation, pred: PanopticAnnotation,
                config: MetricConfig,
                need_boundary: bool = True,
                need_weighted: bool = True) -> dict[int, CellStats]:
    """Match one image pair and collect per-class cells.

    Quality sums accumulate in (class id, gt segment id) order so the
    floating-point result does not depend on how images are scheduled.
    """
    table = contingency(gt.label_map, pred.label_map)
    result = match_segments(table, gt.segments, pred.segments,
                            config.match_threshold,
                            accept_equal_iou=config.accept_equal_iou,
                            subtract_void=config.subtract_void)
    result = apply_void_rule(result, table, config.void_fraction_threshold)

    width, height = gt.label_map.width, gt.label_map.height
    bpq_radius = band_radius(config.bpq_d, width, height)
    wpq_radius = band_radius(config.wpq_d, width, height)
    gt_inst = gt.label_map.instance_of
    pred_inst = pred.label_map.instance_of

    gt_class = {s.segment_id: s.class_id for s in gt.segments if not s.ignore_flag}
    cells: dict[int, CellStats] = {}
    for class_id in sorted(result.by_class):
        match = result.by_class[class_id]
        cell = CellStats(tp=len(match.tp_pairs), fp=len(match.fp_preds),
                         fn=len(match.fn_gts), discarded=len(match.discarded_preds))
        for g, p, v in match.tp_pairs:
            cell.iou_sum += v
            if need_boundary or need_weighted:
                g_mask = gt_inst == g
                p_mask = pred_inst == p
                if need_boundary:
                    b = boundary_iou(g_mask, p_mask, bpq_radius)
                    cell.biou_sum += min(v, b) if config.bpq_mode == "min" else b
                if need_weighted:
                    cell.wiou_sum += weighted_pair_quality(
                        g_mask, p_mask, config.wpq_a, wpq_radius)
        cell.gt_pixels = sum(table.gt_areas.get(sid, 0)
                             for sid, cid in gt_class.items() if cid == class_id)
        cells[class_id] = cell
    return cells


def _mean(values: Iterable[float]) -> float | None:
    values = list(values)
    if not values:
        return None
    return sum(values) / len(values)


def _pool_by_class(cells_by_image: Mapping[str, Mapping[int, CellStats]]
                   ) -> dict[int, CellStats]:
    pooled: dict[int, CellStats] = {}
    for image_id in sorted(cells_by_image):
        for class_id in sorted(cells_by_image[image_id]):
            cell = cells_by_image[image_id][class_id]
            pooled[class_id] = pooled.get(class_id, CellStats()).merged(cell)
    return pooled


def _macro(cells_by_image: Mapping[str, Mapping[int, CellStats]],
           convention: str, quality_field: str, aggregate: str) -> float | None:
    """macro-class: class means of image cells, then the class mean of those.
    macro-image: image means of class cells, then the image mean of those."""
    if aggregate == "macro-class":
        classes = sorted({c for cells in cells_by_image.values() for c in cells})
        per_class = []
        for c in classes:
            vals = [_cell_value(cells_by_image[i][c], convention, quality_field)
                    for i in sorted(cells_by_image) if c in cells_by_image[i]]
            m = _mean(v for v in vals if v is not None)
            if m is not None:
                per_class.append(m)
        return _mean(per_class)
    per_image = []
    for i in sorted(cells_by_image):
        vals = [_cell_value(cells_by_image[i][c], convention, quality_field)
                for c in sorted(cells_by_image[i])]
        m = _mean(v for v in vals if v is not None)
        if m is not None:
            per_image.append(m)
    return _mean(per_image)


def vanilla_pq(cells_by_image: Mapping[str, Mapping[int, CellStats]],
               convention: str = "kirillov",
               aggregate: str = "macro-class") -> float | None:
    """Dataset PQ under the selected aggregation convention."""
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    return _macro(cells_by_image, convention, "iou_sum", aggregate)


def bpq(cells_by_image, convention: str = "kirillov",
        aggregate: str = "macro-class") -> float | None:
    """Boundary PQ: the vanilla pipeline with boundary IoU as the TP quality."""
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    return _macro(cells_by_image, convention, "biou_sum", aggregate)


def wpq(cells_by_image, convention: str = "kirillov",
        aggregate: str = "macro-class") -> float | None:
    """Boundary-weighted PQ: weighted IoU as the TP quality."""
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    return _macro(cells_by_image, convention, "wiou_sum", aggregate)


def mpq_plus(cells_by_image, convention: str = "kirillov") -> float | None:
    """Multiclass PQ: pool counts and IoU sums per class across the whole
    dataset, then average the pooled per-class values over classes."""
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    pooled = _pool_by_class(cells_by_image)
    values = [_cell_value(cell, convention, "iou_sum")
              for _, cell in sorted(pooled.items())]
    return _mean(v for v in values if v is not None)


def fwpq(cells_by_image, convention: str = "kirillov",
         weight_basis: str = "pixels") -> float | None:
    """Frequency-weighted PQ over pooled per-class values.

    Class weights are proportional to ground-truth pixel counts (or instance
    counts with ``weight_basis='instances'``).
    """
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    pooled = _pool_by_class(cells_by_image)
    total = 0.0
    weighted = 0.0
    for class_id in sorted(pooled):
        cell = pooled[class_id]
        freq = cell.gt_pixels if weight_basis == "pixels" else cell.tp + cell.fn
        if freq <= 0:
            continue
        value = _cell_value(cell, convention, "iou_sum")
        if value is None:
            continue
        total += freq
        weighted += freq * value
    if total == 0:
        return None
    return weighted / total


def ipq(cells_by_image, convention: str = "kirillov") -> tuple[float | None, int]:
    """Image-level PQ with the null rule, plus the number of nulled FPs.

    Per image, the score is the mean cell PQ over classes present in that
    image's ground truth; predicted-only classes are null for the image and
    their FPs do not count here (they still count in the dataset metrics).
    Images without ground-truth segments are null as well.
    """
    if not cells_by_image:
        raise EmptyDataset("no images to aggregate")
    scores = []
    nulled_fp = 0
    for image_id in sorted(cells_by_image):
        cells = cells_by_image[image_id]
        values = []
        for class_id in sorted(cells):
            cell = cells[class_id]
            if cell.tp + cell.fn > 0:
                values.append(_cell_value(cell, convention, "iou_sum"))
            else:
                nulled_fp += cell.fp
        if values:
            scores.append(sum(values) / len(values))
    if not scores:
        raise EmptyDataset("every image is null for image-level PQ")
    return sum(scores) / len(scores), nulled_fp


def r_squared(count_pairs: Sequence[tuple[float, float]]) -> float | None:
    """Coefficient of determination between true and predicted counts.

    ``count_pairs`` holds (true count, predicted count) per (image, class).
    None when fewer than two pairs or when the true counts are constant.
    """
    if len(count_pairs) < 2:
        return None
    ys = [y for y, _ in count_pairs]
    mean_y = sum(ys) / len(ys)
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    if ss_tot == 0:
        return None
    ss_res = sum((yhat - y) ** 2 for y, yhat in count_pairs)
    return 1.0 - ss_res / ss_tot


def _count_pairs(cells_by_image) -> list[tuple[float, float]]:
    classes = sorted({c for cells in cells_by_image.values() for c in cells})
    pairs = []
    for image_id in sorted(cells_by_image):
        cells = cells_by_image[image_id]
        for c in classes:
            cell = cells.get(c)
            if cell is None:
                pairs.append((0.0, 0.0))
            else:
                pairs.append((float(cell.tp + cell.fn), float(cell.tp + cell.fp)))
    return pairs


@dataclass
class MetricReport:
    """Evaluation output: aggregates, per-class and per-image detail, config echo."""

    config: dict
    aggregate: dict
    per_class: dict
    per_image: list
    counts: dict
    warnings: list
    timestamp: str | None = None
    alternate_aggregate: dict | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "config": self.config,
            "aggregate": self.aggregate,
            "per_class": self.per_class,
            "per_image": self.per_image,
            "counts": self.counts,
            "warnings": self.warnings,
        }
        if self.alternate_aggregate is not None:
            obj["alternate_aggregate"] = self.alternate_aggregate
        if self.timestamp is not None:
            obj["timestamp"] = self.timestamp
        return obj

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_json_obj(), indent=indent, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["scope,key,metric,value"]
        for metric in sorted(self.aggregate):
            value = self.aggregate[metric]
            if isinstance(value, (int, float)) or value is None:
                lines.append(f"aggregate,,{metric},{_csv_num(value)}")
        for class_id in sorted(self.per_class, key=int):
            for metric, value in sorted(self.per_class[class_id].items()):
                if isinstance(value, (int, float)) or value is None:
                    lines.append(f"class,{class_id},{metric},{_csv_num(value)}")
        for entry in self.per_image:
            for metric in ("pq", "ipq"):
                lines.append(f"image,{entry['image_id']},{metric},"
                             f"{_csv_num(entry.get(metric))}")
        return "\n".join(lines) + "\n"


def _csv_num(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    return repr(value)


def _cells_worker(args) -> dict[int, CellStats]:
    gt, pred, config, need_boundary, need_weighted = args
    return image_cells(gt, pred, config, need_boundary, need_weighted)


def _ranking_observation(agg: dict) -> str | None:
    chain = [("wpq", agg.get("wpq")), ("fwpq", agg.get("fwpq")),
             ("ipq", agg.get("ipq")), ("pq", agg.get("pq"))]
    if any(v is None for _, v in chain):
        return None
    holds = all(chain[i][1] >= chain[i + 1][1] - 1e-12 for i in range(len(chain) - 1))
    order = " >= ".join(name for name, _ in chain)
    if holds:
        return f"typical ordering {order} held on this run"
    return f"typical ordering {order} did not hold on this run"


def evaluate_annotations(gt_annotations: Mapping[str, PanopticAnnotation],
                         pred_annotations: Mapping[str, PanopticAnnotation],
                         config: MetricConfig = MetricConfig(),
                         metrics: Sequence[str] = ALL_METRICS,
                         jobs: int = 1,
                         strict: bool = True,
                         class_names: Mapping[int, str] | None = None,
                         with_timestamp: bool = True,
                         all_aggregates: bool = False,
                         extra_warnings: Sequence[str] = ()) -> MetricReport:
    """Run matching and the configured metric family over aligned annotations.

    Image ids must agree between the two mappings in strict mode; lenient mode
    evaluates the intersection and records warnings. The result is identical
    for any ``jobs`` value: images are reduced in sorted-id order.
    """
    metrics = tuple(metrics)
    unknown = set(metrics) - set(ALL_METRICS)
    if unknown:
        raise InvalidParameter(f"unknown metrics requested: {sorted(unknown)}")

    gt_ids = set(gt_annotations)
    pred_ids = set(pred_annotations)
    warnings = list(extra_warnings)
    if gt_ids != pred_ids:
        missing = sorted(gt_ids - pred_ids)
        extra = sorted(pred_ids - gt_ids)
        message = (f"image sets differ: {len(missing)} missing from predictions "
                   f"{missing[:5]}, {len(extra)} extra {extra[:5]}")
        if strict:
            raise ImageSetMismatch(message)
        warnings.append(message)
    image_ids = sorted(gt_ids & pred_ids)
    if not image_ids:
        raise EmptyDataset("no common images to evaluate")

    if config.score_background:
        all_classes = {rec.class_id
                       for anns in (gt_annotations, pred_annotations)
                       for i in image_ids for rec in anns[i].segments}
        background_class = max(all_classes, default=0) + 1
        gt_annotations = {i: promote_background(gt_annotations[i], background_class)
                          for i in image_ids}
        pred_annotations = {i: promote_background(pred_annotations[i], background_class)
                            for i in image_ids}
        warnings.append(f"background scored as synthetic class {background_class}")

    need_boundary = "bpq" in metrics
    need_weighted = "wpq" in metrics
    work = [(gt_annotations[i], pred_annotations[i], config,
             need_boundary, need_weighted) for i in image_ids]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cells_worker, work))
    else:
        results = [_cells_worker(w) for w in work]
    cells_by_image = dict(zip(image_ids, results))

    report = _assemble_report(cells_by_image, config, metrics, warnings,
                              class_names or {}, with_timestamp, all_aggregates)
    return report


def _aggregate_block(cells_by_image, config: MetricConfig, metrics, aggregate: str,
                     pooled: Mapping[int, CellStats]) -> dict:
    agg: dict = {}
    if "pq" in metrics:
        agg["pq"] = vanilla_pq(cells_by_image, config.denominator, aggregate)
        sq_vals, rq_vals = [], []
        for _, cell in sorted(pooled.items()):
            stats = PqStats(cell.tp, cell.fp, cell.fn, cell.iou_sum)
            ratio = quality_ratio(stats, config.denominator)
            if ratio is not None:
                sq_vals.append(ratio[1])
                rq_vals.append(ratio[2])
        agg["sq"] = _mean(sq_vals)
        agg["rq"] = _mean(rq_vals)
    if "mpq+" in metrics:
        agg["mpq_plus"] = mpq_plus(cells_by_image, config.denominator)
    if "bpq" in metrics:
        agg["bpq"] = bpq(cells_by_image, config.denominator, aggregate)
    if "ipq" in metrics:
        try:
            value, nulled = ipq(cells_by_image, config.denominator)
        except EmptyDataset:
            value, nulled = None, 0
        agg["ipq"] = value
        agg["ipq_nulled_fp"] = nulled
    if "wpq" in metrics:
        agg["wpq"] = wpq(cells_by_image, config.denominator, aggregate)
    if "fwpq" in metrics:
        agg["fwpq"] = fwpq(cells_by_image, config.denominator, config.fwpq_weight_basis)
    if "r2" in metrics:
        agg["r2"] = r_squared(_count_pairs(cells_by_image))
    observation = _ranking_observation(agg)
    if observation:
        agg["ranking_observation"] = observation
    return agg


def _assemble_report(cells_by_image, config: MetricConfig, metrics, warnings,
                     class_names, with_timestamp: bool,
                     all_aggregates: bool) -> MetricReport:
    pooled = _pool_by_class(cells_by_image)
    aggregate = _aggregate_block(cells_by_image, config, metrics,
                                 config.aggregate, pooled)
    alternate = None
    if all_aggregates:
        other = "macro-image" if config.aggregate == "macro-class" else "macro-class"
        alternate = {"aggregate_convention": other}
        alternate.update(_aggregate_block(cells_by_image, config, metrics,
                                          other, pooled))

    per_class: dict[str, dict] = {}
    for class_id in sorted(pooled):
        cell = pooled[class_id]
        stats = PqStats(cell.tp, cell.fp, cell.fn, cell.iou_sum)
        ratio = quality_ratio(stats, config.denominator)
        image_values = [
            _cell_value(cells_by_image[i][class_id], config.denominator, "iou_sum")
            for i in sorted(cells_by_image) if class_id in cells_by_image[i]
        ]
        entry = {
            "tp": cell.tp, "fp": cell.fp, "fn": cell.fn,
            "discarded": cell.discarded,
            "gt_segments": cell.tp + cell.fn,
            "pred_segments": cell.tp + cell.fp + cell.discarded,
            "gt_pixels": cell.gt_pixels,
            "pq": None if ratio is None else ratio[0],
            "sq": None if ratio is None else ratio[1],
            "rq": None if ratio is None else ratio[2],
            "pq_image_mean": _mean(v for v in image_values if v is not None),
        }
        if "bpq" in metrics:
            entry["bpq"] = _cell_value(cell, config.denominator, "biou_sum")
        if "wpq" in metrics:
            entry["wpq"] = _cell_value(cell, config.denominator, "wiou_sum")
        if class_id in class_names:
            entry["name"] = class_names[class_id]
        per_class[str(class_id)] = entry

    per_image = []
    for image_id in sorted(cells_by_image):
        cells = cells_by_image[image_id]
        values = [_cell_value(cells[c], config.denominator, "iou_sum")
                  for c in sorted(cells)]
        gt_present = [_cell_value(cells[c], config.denominator, "iou_sum")
                      for c in sorted(cells) if cells[c].tp + cells[c].fn > 0]
        nulled = sum(cells[c].fp for c in cells if cells[c].tp + cells[c].fn == 0)
        per_image.append({
            "image_id": image_id,
            "pq": _mean(v for v in values if v is not None),
            "ipq": _mean(gt_present),
            "nulled_fp": nulled,
            "classes": {
                str(c): {
                    "tp": cells[c].tp, "fp": cells[c].fp, "fn": cells[c].fn,
                    "discarded": cells[c].discarded,
                    "iou_sum": cells[c].iou_sum,
                    "pq": _cell_value(cells[c], config.denominator, "iou_sum"),
                }
                for c in sorted(cells)
            },
        })

    counts = {
        "images": len(cells_by_image),
        "classes": len(pooled),
        "gt_segments": sum(c.tp + c.fn for c in pooled.values()),
        "pred_segments": sum(c.tp + c.fp + c.discarded for c in pooled.values()),
        "tp": sum(c.tp for c in pooled.values()),
        "fp": sum(c.fp for c in pooled.values()),
        "fn": sum(c.fn for c in pooled.values()),
        "discarded": sum(c.discarded for c in pooled.values()),
    }
    config_echo = asdict(config)
    config_echo["metrics"] = list(metrics)
    timestamp = (_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
                 if with_timestamp else None)
    return MetricReport(config=config_echo, aggregate=aggregate,
                        per_class=per_class, per_image=per_image,
                        counts=counts, warnings=warnings, timestamp=timestamp,
                        alternate_aggregate=alternate)


def evaluate_dataset(gt_manifest: panoptic_io.DatasetManifest,
                     pred_manifest: panoptic_io.DatasetManifest,
                     config: MetricConfig = MetricConfig(),
                     metrics: Sequence[str] = ALL_METRICS,
                     jobs: int = 1,
                     strict: bool = True,
                     with_timestamp: bool = True,
                     all_aggregates: bool = False) -> MetricReport:
    """Load two manifests and evaluate them; per-image load failures are
    errors in strict mode and warnings (with the image skipped) otherwise."""
    warnings: list[str] = []

    def load_side(manifest, side: str) -> dict[str, PanopticAnnotation]:
        out = {}
        for image_id in manifest.image_ids():
            if image_id not in manifest.annotations:
                if strict:
                    raise ImageSetMismatch(f"{side}: image {image_id!r} has no annotation")
                warnings.append(f"{side}: image {image_id!r} has no annotation; skipped")
                continue
            try:
                out[image_id] = panoptic_io.load_annotation(manifest, image_id)
            except Exception as exc:
                if strict:
                    raise
                warnings.append(f"{side}: failed to load {image_id!r}: {exc}")
        return out

    gt_annotations = load_side(gt_manifest, "gt")
    pred_annotations = load_side(pred_manifest, "pred")
    names = {cid: cat.name for cid, cat in gt_manifest.categories.items()}
    return evaluate_annotations(gt_annotations, pred_annotations, config,
                                metrics=metrics, jobs=jobs, strict=strict,
                                class_names=names, with_timestamp=with_timestamp,
                                all_aggregates=all_aggregates,
                                extra_warnings=warnings)


def resolve_jobs(requested: int | None) -> int:
    """--jobs flag, then PQSUITE_JOBS, then the machine's core count."""
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get("PQSUITE_JOBS")
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
    return os.cpu_count() or 1
