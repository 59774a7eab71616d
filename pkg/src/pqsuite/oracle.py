"""Brute-force reference implementations used by tests and `pqsuite selftest`.

Everything here is recomputed from explicit pixel sets with naive rules:
intersections by set intersection, bands by all-pairs point distances,
matching by sorting candidate pairs, aggregation by plain loops. The module
shares only the domain types and MetricConfig with the fast pipeline, never
its computation paths. Frame-size guards keep the cost bounded.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .boundary import BoundaryBand
from .errors import EmptyDataset, FrameTooLarge
from .matching import ContingencyTable
from .pqmetrics import MetricConfig
from .segmap import PanopticAnnotation

MAX_CONTINGENCY_FRAME = 128
MAX_BAND_FRAME = 64

Pixel = tuple[int, int]


def pixel_sets(ann: PanopticAnnotation) -> dict[int, set[Pixel]]:
    """Explicit (x, y) coordinate sets for every segment of an annotation."""
    inst = ann.label_map.instance_of
    out: dict[int, set[Pixel]] = {}
    for y in range(ann.label_map.height):
        for x in range(ann.label_map.width):
            sid = int(inst[y, x])
            if sid != 0:
                out.setdefault(sid, set()).add((x, y))
    return out


def _guard(width: int, height: int, limit: int) -> None:
    if width > limit or height > limit:
        raise FrameTooLarge(f"frame {width}x{height} exceeds oracle limit {limit}")


def oracle_contingency(gt: PanopticAnnotation, pred: PanopticAnnotation) -> ContingencyTable:
    """Contingency table from explicit pixel-set intersections."""
    lm = gt.label_map
    _guard(lm.width, lm.height, MAX_CONTINGENCY_FRAME)
    gt_sets = pixel_sets(gt)
    pred_sets = pixel_sets(pred)
    gt_covered: set[Pixel] = set().union(*gt_sets.values()) if gt_sets else set()

    pairs = {}
    for g, gpx in gt_sets.items():
        for p, ppx in pred_sets.items():
            n = len(gpx & ppx)
            if n:
                pairs[(g, p)] = n
    void_overlap = {p: len(ppx - gt_covered) for p, ppx in pred_sets.items()
                    if len(ppx - gt_covered)}
    return ContingencyTable(lm.width, lm.height, pairs,
                            {g: len(px) for g, px in gt_sets.items()},
                            {p: len(px) for p, px in pred_sets.items()},
                            void_overlap)


def _in_band(pixels: set[Pixel], others: Sequence[Pixel], radius_px: int) -> set[Pixel]:
    """Pixels whose minimum all-pairs distance to `others` is below radius+1."""
    limit_sq = (radius_px + 1) ** 2
    band = set()
    for x, y in pixels:
        for ox, oy in others:
            if (x - ox) ** 2 + (y - oy) ** 2 < limit_sq:
                band.add((x, y))
                break
    return band


def _complement_with_border(pixels: set[Pixel], width: int, height: int) -> list[Pixel]:
    comp = [(x, y) for y in range(height) for x in range(width) if (x, y) not in pixels]
    comp.extend((x, -1) for x in range(-1, width + 1))
    comp.extend((x, height) for x in range(-1, width + 1))
    comp.extend((-1, y) for y in range(height))
    comp.extend((width, y) for y in range(height))
    return comp


def oracle_band(mask: np.ndarray, radius_px: int) -> BoundaryBand:
    """Inner contour band decided by all-pairs distances to complement pixels."""
    mask = np.asarray(mask, dtype=bool)
    height, width = mask.shape
    _guard(width, height, MAX_BAND_FRAME)
    pixels = {(x, y) for y in range(height) for x in range(width) if mask[y, x]}
    comp = _complement_with_border(pixels, width, height)
    band_px = _in_band(pixels, comp, radius_px)
    band = np.zeros_like(mask)
    for x, y in band_px:
        band[y, x] = True
    return BoundaryBand(mask=band, radius_px=radius_px, source=mask)


def _oracle_biou(gpx: set[Pixel], ppx: set[Pixel], width: int, height: int,
                 radius_px: int) -> float:
    g_band = _in_band(gpx, _complement_with_border(gpx, width, height), radius_px)
    p_band = _in_band(ppx, _complement_with_border(ppx, width, height), radius_px)
    return len(g_band & p_band) / len(g_band | p_band)


def _oracle_wiou(gpx: set[Pixel], ppx: set[Pixel], width: int, height: int,
                 a: float, radius_px: int) -> float:
    inner = _in_band(gpx, _complement_with_border(gpx, width, height), radius_px)
    gt_list = list(gpx)
    limit_sq = (radius_px + 1) ** 2

    def weight(px: Pixel) -> float:
        if px in gpx:
            return a if px in inner else 1.0
        x, y = px
        for ox, oy in gt_list:
            if (x - ox) ** 2 + (y - oy) ** 2 < limit_sq:
                return a
        return 1.0

    num = sum(weight(px) for px in sorted(gpx & ppx))
    den = sum(weight(px) for px in sorted(gpx | ppx))
    return num / den


def _band_radius(d: float, width: int, height: int) -> int:
    return max(1, round(d * math.sqrt(width * width + height * height)))


def _oracle_match(gt: PanopticAnnotation, pred: PanopticAnnotation,
                  config: MetricConfig):
    """Per-class TP/FP/FN/discarded from pixel sets, mirroring the match rules."""
    gt_sets = pixel_sets(gt)
    pred_sets = pixel_sets(pred)
    gt_class = {s.segment_id: s.class_id for s in gt.segments if not s.ignore_flag}
    crowd_px: set[Pixel] = set()
    for s in gt.segments:
        if s.ignore_flag and s.segment_id in gt_sets:
            crowd_px |= gt_sets[s.segment_id]
    pred_class = {s.segment_id: s.class_id for s in pred.segments}
    gt_covered: set[Pixel] = set().union(*gt_sets.values()) if gt_sets else set()

    candidates = []
    for g, cg in gt_class.items():
        for p, cp in pred_class.items():
            if cg != cp or g not in gt_sets or p not in pred_sets:
                continue
            inter = len(gt_sets[g] & pred_sets[p])
            if inter == 0:
                continue
            union = len(gt_sets[g] | pred_sets[p])
            if config.subtract_void:
                union -= len(pred_sets[p] - gt_covered)
            value = inter / union
            if value > config.match_threshold or (
                    config.accept_equal_iou and value == config.match_threshold):
                candidates.append((value, g, p))
    candidates.sort(key=lambda t: (-t[0], t[2], t[1]))

    tp: dict[int, list] = {}
    taken_g: set[int] = set()
    taken_p: set[int] = set()
    for value, g, p in candidates:
        if g in taken_g or p in taken_p:
            continue
        taken_g.add(g)
        taken_p.add(p)
        tp.setdefault(gt_class[g], []).append((g, p, value))

    classes = sorted(set(gt_class.values()) | set(pred_class.values()))
    matches = {}
    for c in classes:
        fns = sorted(g for g, cg in gt_class.items() if cg == c and g not in taken_g)
        fps, discarded = [], []
        for p, cp in pred_class.items():
            if cp != c or p in taken_p:
                continue
            if p not in pred_sets:
                fps.append(p)
                continue
            absorbing = len(pred_sets[p] - gt_covered) + len(pred_sets[p] & crowd_px)
            if absorbing / len(pred_sets[p]) > config.void_fraction_threshold:
                discarded.append(p)
            else:
                fps.append(p)
        matches[c] = (sorted(tp.get(c, [])), sorted(fps), fns, sorted(discarded))
    return matches, gt_sets, pred_sets, gt_class


def oracle_cells(gt_annotations: Mapping[str, PanopticAnnotation],
                 pred_annotations: Mapping[str, PanopticAnnotation],
                 config: MetricConfig) -> dict[str, dict[int, dict]]:
    """Per-(image, class) counts and quality sums, all from pixel sets.

    Convention switches (denominator, aggregation) do not affect this stage,
    so one cells pass can feed several :func:`oracle_aggregate` calls.
    """
    out: dict[str, dict[int, dict]] = {}
    for image_id in sorted(gt_annotations):
        gt = gt_annotations[image_id]
        pred = pred_annotations[image_id]
        lm = gt.label_map
        _guard(lm.width, lm.height, MAX_BAND_FRAME)
        b_radius = _band_radius(config.bpq_d, lm.width, lm.height)
        w_radius = _band_radius(config.wpq_d, lm.width, lm.height)
        matches, gt_sets, pred_sets, gt_class = _oracle_match(gt, pred, config)
        cells: dict[int, dict] = {}
        for c, (tps, fps, fns, discarded) in sorted(matches.items()):
            iou_sum = biou_sum = wiou_sum = 0.0
            for g, p, value in tps:
                iou_sum += value
                b = _oracle_biou(gt_sets[g], pred_sets[p], lm.width, lm.height,
                                 b_radius)
                biou_sum += min(value, b) if config.bpq_mode == "min" else b
                wiou_sum += _oracle_wiou(gt_sets[g], pred_sets[p],
                                         lm.width, lm.height,
                                         config.wpq_a, w_radius)
            cells[c] = {
                "tp": len(tps), "fp": len(fps), "fn": len(fns),
                "discarded": len(discarded),
                "iou_sum": iou_sum, "biou_sum": biou_sum, "wiou_sum": wiou_sum,
                "gt_pixels": sum(len(gt_sets[g]) for g, cg in gt_class.items()
                                 if cg == c and g in gt_sets),
            }
        out[image_id] = cells
    return out


def _cell_pq(cell: dict, convention: str, field: str) -> float | None:
    total = cell["tp"] + cell["fp"] + cell["fn"]
    if total == 0:
        return None
    if convention == "kirillov":
        denom = cell["tp"] + 0.5 * cell["fp"] + 0.5 * cell["fn"]
    else:
        denom = 0.5 * total
    return cell[field] / denom


def _avg(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


def oracle_aggregate(cells: Mapping[str, Mapping[int, dict]],
                     config: MetricConfig) -> dict:
    """Dataset-level metrics from oracle cells via plain loops."""
    if not cells:
        raise EmptyDataset("no images")
    classes = sorted({c for per_image in cells.values() for c in per_image})
    image_ids = sorted(cells)

    def macro(field: str) -> float | None:
        if config.aggregate == "macro-class":
            per_class = []
            for c in classes:
                per_class.append(_avg(
                    _cell_pq(cells[i][c], config.denominator, field)
                    for i in image_ids if c in cells[i]))
            return _avg(per_class)
        per_image = []
        for i in image_ids:
            per_image.append(_avg(
                _cell_pq(cells[i][c], config.denominator, field)
                for c in sorted(cells[i])))
        return _avg(per_image)

    pooled: dict[int, dict] = {}
    for i in image_ids:
        for c in sorted(cells[i]):
            agg = pooled.setdefault(c, {"tp": 0, "fp": 0, "fn": 0, "discarded": 0,
                                        "iou_sum": 0.0, "biou_sum": 0.0,
                                        "wiou_sum": 0.0, "gt_pixels": 0})
            for key in agg:
                agg[key] += cells[i][c][key]

    mpq = _avg(_cell_pq(pooled[c], config.denominator, "iou_sum") for c in classes)

    freq_total = 0.0
    freq_weighted = 0.0
    for c in classes:
        freq = (pooled[c]["gt_pixels"] if config.fwpq_weight_basis == "pixels"
                else pooled[c]["tp"] + pooled[c]["fn"])
        value = _cell_pq(pooled[c], config.denominator, "iou_sum")
        if freq > 0 and value is not None:
            freq_total += freq
            freq_weighted += freq * value
    fw = freq_weighted / freq_total if freq_total else None

    image_scores = []
    for i in image_ids:
        values = [_cell_pq(cells[i][c], config.denominator, "iou_sum")
                  for c in sorted(cells[i])
                  if cells[i][c]["tp"] + cells[i][c]["fn"] > 0]
        if values:
            image_scores.append(sum(values) / len(values))
    ipq_value = _avg(image_scores)

    ys, yhats = [], []
    for i in image_ids:
        for c in classes:
            cell = cells[i].get(c)
            ys.append(0.0 if cell is None else float(cell["tp"] + cell["fn"]))
            yhats.append(0.0 if cell is None else float(cell["tp"] + cell["fp"]))
    r2 = None
    if len(ys) >= 2:
        mean_y = sum(ys) / len(ys)
        ss_tot = sum((y - mean_y) ** 2 for y in ys)
        if ss_tot > 0:
            r2 = 1.0 - sum((yh - y) ** 2 for y, yh in zip(ys, yhats)) / ss_tot

    return {
        "pq": macro("iou_sum"),
        "mpq_plus": mpq,
        "bpq": macro("biou_sum"),
        "ipq": ipq_value,
        "wpq": macro("wiou_sum"),
        "fwpq": fw,
        "r2": r2,
    }


def oracle_metrics(gt_annotations: Mapping[str, PanopticAnnotation],
                   pred_annotations: Mapping[str, PanopticAnnotation],
                   config: MetricConfig = MetricConfig()) -> dict:
    """Full metric family from pixel sets; desk-scale inputs only."""
    return oracle_aggregate(oracle_cells(gt_annotations, pred_annotations, config),
                            config)
