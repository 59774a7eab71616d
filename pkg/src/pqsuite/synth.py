"""Seeded synthetic panoptic scenes and controlled prediction perturbations.

Scenes are made of non-overlapping disk blobs placed by rejection sampling.
Randomness is split into one stream per segment, keyed by (seed, class,
index), so adding a segment never reshuffles the geometry of the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InfeasibleSpec, InvalidParameter
from .segmap import PanopticAnnotation, build_label_map

PERTURBATION_KINDS = ("erode", "dilate", "shift", "split", "merge",
                      "drop", "spurious", "relabel-class")

_MAX_PLACEMENT_ATTEMPTS = 300
_MIN_BLOB_AREA = 4


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene."""

    seed: int
    width: int = 64
    height: int = 64
    classes: int = 2
    instances_per_class: tuple[int, int] = (2, 4)
    radius_range: tuple[float, float] = (3.0, 6.0)
    min_gap: int = 2

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise InvalidParameter("scene frames must be at least 8x8")
        if self.classes < 0:
            raise InvalidParameter("class count must be non-negative")
        lo, hi = self.instances_per_class
        if lo < 0 or hi < lo:
            raise InvalidParameter("instances_per_class must be a (lo, hi) range")
        rlo, rhi = self.radius_range
        if rlo < 1.2 or rhi < rlo:
            raise InvalidParameter("radius_range must be a range with lo >= 1.2")
        if self.min_gap < 0:
            raise InvalidParameter("min_gap must be non-negative")


@dataclass(frozen=True)
class Perturbation:
    """One controlled corruption of a prediction."""

    kind: str
    magnitude: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise InvalidParameter(
                f"kind must be one of {PERTURBATION_KINDS}, got {self.kind!r}")
        if self.magnitude < 0:
            raise InvalidParameter("magnitude must be non-negative")


_KIND_CODES = {kind: i + 1 for i, kind in enumerate(PERTURBATION_KINDS)}


def _segment_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


def _disk(cx: float, cy: float, radius: float, width: int, height: int) -> np.ndarray:
    ys, xs = np.ogrid[:height, :width]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius


def generate_scene(spec: SceneSpec) -> PanopticAnnotation:
    """Deterministically place disk blobs; every instance is a connected blob.

    Raises InfeasibleSpec up front when the expected coverage exceeds 60% of
    the frame, or when a blob cannot be placed within the rejection budget.
    """
    mean_radius = (spec.radius_range[0] + spec.radius_range[1]) / 2
    mean_count = spec.classes * (spec.instances_per_class[0]
                                 + spec.instances_per_class[1]) / 2
    if mean_count * np.pi * mean_radius ** 2 >= 0.6 * spec.width * spec.height:
        raise InfeasibleSpec(
            f"expected blob coverage exceeds 60% of a {spec.width}x{spec.height} frame")

    class_plane = np.zeros((spec.height, spec.width), dtype=np.int32)
    inst_plane = np.zeros((spec.height, spec.width), dtype=np.int32)
    occupied = np.zeros((spec.height, spec.width), dtype=bool)

    next_id = 1
    for class_id in range(1, spec.classes + 1):
        count_rng = _segment_rng(spec.seed, class_id, 0)
        count = int(count_rng.integers(spec.instances_per_class[0],
                                       spec.instances_per_class[1] + 1))
        for index in range(1, count + 1):
            rng = _segment_rng(spec.seed, class_id, index)
            placed = False
            for _ in range(_MAX_PLACEMENT_ATTEMPTS):
                radius = float(rng.uniform(*spec.radius_range))
                cx = float(rng.uniform(radius, spec.width - radius))
                cy = float(rng.uniform(radius, spec.height - radius))
                blob = _disk(cx, cy, radius, spec.width, spec.height)
                if int(blob.sum()) < _MIN_BLOB_AREA:
                    continue
                cleared = _disk(cx, cy, radius + spec.min_gap,
                                spec.width, spec.height)
                if (occupied & cleared).any():
                    continue
                class_plane[blob] = class_id
                inst_plane[blob] = next_id
                occupied |= blob
                placed = True
                break
            if not placed:
                raise InfeasibleSpec(
                    f"could not place blob {index} of class {class_id} "
                    f"after {_MAX_PLACEMENT_ATTEMPTS} attempts (seed {spec.seed})")
            next_id += 1

    label_map = build_label_map(class_plane, inst_plane, spec.width, spec.height)
    return PanopticAnnotation.from_label_map(f"scene-{spec.seed}", label_map)


def _segments_in_order(ann: PanopticAnnotation):
    lm = ann.label_map
    for rec in sorted(ann.segments, key=lambda r: r.segment_id):
        mask = lm.segment_mask(rec.segment_id)
        if mask.any():
            yield rec, mask


def _paint(shape, pieces) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize (class_id, mask) pieces; earlier pieces keep contested pixels."""
    class_plane = np.zeros(shape, dtype=np.int32)
    inst_plane = np.zeros(shape, dtype=np.int32)
    next_id = 1
    for class_id, mask in pieces:
        free = mask & (inst_plane == 0)
        if not free.any():
            continue
        class_plane[free] = class_id
        inst_plane[free] = next_id
        next_id += 1
    return class_plane, inst_plane


def perturb(ann: PanopticAnnotation, p: Perturbation) -> PanopticAnnotation:
    """Apply one perturbation; magnitude 0 is the identity for every kind.

    Non-overlap is restored by precedence: segments are processed in id order
    and the first claimant of a contested pixel keeps it. Fully erased
    segments are legal and simply vanish from the output.
    """
    lm = ann.label_map
    kind_code = _KIND_CODES[p.kind]
    steps = int(round(p.magnitude))
    pieces: list[tuple[int, np.ndarray]] = []
    class_ids = sorted({rec.class_id for rec in ann.segments})

    if p.kind in ("erode", "dilate"):
        op = ndimage.binary_erosion if p.kind == "erode" else ndimage.binary_dilation
        for rec, mask in _segments_in_order(ann):
            out = op(mask, iterations=steps) if steps > 0 else mask
            pieces.append((rec.class_id, out))
    elif p.kind == "shift":
        for rec, mask in _segments_in_order(ann):
            rng = _segment_rng(p.seed, kind_code, rec.segment_id)
            dx, dy = rng.choice([(1, 0), (-1, 0), (0, 1), (0, -1),
                                 (1, 1), (1, -1), (-1, 1), (-1, -1)])
            shifted = np.zeros_like(mask)
            ys, xs = np.nonzero(mask)
            ys = ys + int(dy) * steps
            xs = xs + int(dx) * steps
            keep = (ys >= 0) & (ys < lm.height) & (xs >= 0) & (xs < lm.width)
            shifted[ys[keep], xs[keep]] = True
            pieces.append((rec.class_id, shifted))
    elif p.kind == "drop":
        for rec, mask in _segments_in_order(ann):
            rng = _segment_rng(p.seed, kind_code, rec.segment_id)
            if rng.random() >= p.magnitude:
                pieces.append((rec.class_id, mask))
    elif p.kind == "split":
        for rec, mask in _segments_in_order(ann):
            rng = _segment_rng(p.seed, kind_code, rec.segment_id)
            if rng.random() >= p.magnitude:
                pieces.append((rec.class_id, mask))
                continue
            ys, xs = np.nonzero(mask)
            if rng.random() < 0.5:
                cut = xs < np.median(xs)
            else:
                cut = ys < np.median(ys)
            left = np.zeros_like(mask)
            right = np.zeros_like(mask)
            left[ys[cut], xs[cut]] = True
            right[ys[~cut], xs[~cut]] = True
            for half in (left, right):
                if half.any():
                    pieces.append((rec.class_id, half))
    elif p.kind == "merge":
        by_class: dict[int, list] = {}
        for rec, mask in _segments_in_order(ann):
            by_class.setdefault(rec.class_id, []).append((rec.segment_id, mask))
        for class_id in sorted(by_class):
            items = by_class[class_id]
            index = 0
            while index < len(items):
                sid, mask = items[index]
                rng = _segment_rng(p.seed, kind_code, sid)
                if index + 1 < len(items) and rng.random() < p.magnitude:
                    mask = mask | items[index + 1][1]
                    index += 1
                pieces.append((class_id, mask))
                index += 1
    elif p.kind == "spurious":
        for rec, mask in _segments_in_order(ann):
            pieces.append((rec.class_id, mask))
        occupied = lm.instance_of != 0
        for index in range(steps):
            rng = _segment_rng(p.seed, kind_code, index + 1)
            class_id = int(rng.choice(class_ids)) if class_ids else 1
            for _ in range(_MAX_PLACEMENT_ATTEMPTS):
                radius = float(rng.uniform(1.5, 4.0))
                cx = float(rng.uniform(radius, lm.width - radius))
                cy = float(rng.uniform(radius, lm.height - radius))
                blob = _disk(cx, cy, radius, lm.width, lm.height)
                if (occupied & blob).any() or int(blob.sum()) < _MIN_BLOB_AREA:
                    continue
                occupied |= blob
                pieces.append((class_id, blob))
                break
    elif p.kind == "relabel-class":
        for rec, mask in _segments_in_order(ann):
            rng = _segment_rng(p.seed, kind_code, rec.segment_id)
            class_id = rec.class_id
            others = [c for c in class_ids if c != class_id]
            if others and rng.random() < p.magnitude:
                class_id = int(rng.choice(others))
            pieces.append((class_id, mask))
    else:  # pragma: no cover - guarded by Perturbation.__post_init__
        raise InvalidParameter(f"unhandled perturbation kind {p.kind!r}")

    class_plane, inst_plane = _paint(lm.shape, pieces)
    label_map = build_label_map(class_plane, inst_plane, lm.width, lm.height)
    return PanopticAnnotation.from_label_map(ann.image_id, label_map)


def perturb_many(ann: PanopticAnnotation,
                 perturbations: Sequence[Perturbation]) -> PanopticAnnotation:
    for p in perturbations:
        ann = perturb(ann, p)
    return ann
