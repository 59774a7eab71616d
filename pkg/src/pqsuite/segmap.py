"""Core panoptic data model: label maps, segment tables, structural validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvariantViolation

VOID_CLASS = 0
NO_INSTANCE = 0


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel (class id, instance id) labeling of one image.

    Class id 0 is void/background and instance id 0 marks pixels outside any
    segment. Every nonzero instance id forms exactly one segment and carries
    exactly one class id, so segments never overlap by construction.
    """

    width: int
    height: int
    class_of: np.ndarray
    instance_of: np.ndarray

    def __post_init__(self) -> None:
        self.class_of.setflags(write=False)
        self.instance_of.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def segment_ids(self) -> np.ndarray:
        ids = np.unique(self.instance_of)
        return ids[ids != NO_INSTANCE]

    def segment_mask(self, segment_id: int) -> np.ndarray:
        return self.instance_of == segment_id


@dataclass(frozen=True)
class SegmentRecord:
    """One segment's identity, class, pixel area, and crowd/ignore flag."""

    segment_id: int
    class_id: int
    area: int
    ignore_flag: bool = False

    def __post_init__(self) -> None:
        if self.segment_id <= 0:
            raise InvariantViolation(f"segment_id must be positive, got {self.segment_id}")
        if self.class_id <= 0:
            raise InvariantViolation(f"class_id must be positive, got {self.class_id}")
        if self.area < 0:
            raise InvariantViolation(f"area must be non-negative, got {self.area}")


@dataclass(frozen=True)
class PanopticAnnotation:
    """A label map plus its segment table for one image."""

    image_id: str
    label_map: LabelMap
    segments: tuple[SegmentRecord, ...]

    @classmethod
    def from_label_map(
        cls,
        image_id: str,
        label_map: LabelMap,
        ignore_ids: Sequence[int] = (),
    ) -> "PanopticAnnotation":
        """Build an annotation whose table is derived from the map itself."""
        ignore = frozenset(ignore_ids)
        records = tuple(
            SegmentRecord(r.segment_id, r.class_id, r.area, r.segment_id in ignore)
            for r in segment_table(label_map)
        )
        return cls(image_id, label_map, records)


@dataclass(frozen=True)
class Violation:
    """One structural inconsistency found by :func:`validate`."""

    kind: str
    message: str
    segment_id: int | None = None


def build_label_map(class_plane, instance_plane, width: int | None = None,
                    height: int | None = None) -> LabelMap:
    """Assemble a LabelMap from a class plane and an instance plane.

    Planes may be 2-D ``(height, width)`` arrays or flat sequences; flat input
    requires explicit ``width`` and ``height``.

    Raises:
        DimensionMismatch: plane sizes disagree with each other or with the
            declared frame.
        InvariantViolation: negative ids, an instance id on a void pixel, or
            one instance id spanning two classes.
    """
    cls = np.asarray(class_plane)
    inst = np.asarray(instance_plane)

    if cls.ndim == 2 and width is None and height is None:
        height, width = cls.shape
    if width is None or height is None:
        raise DimensionMismatch("flat planes require explicit width and height")
    expected = int(width) * int(height)
    if cls.size != expected or inst.size != expected:
        raise DimensionMismatch(
            f"plane sizes {cls.size}/{inst.size} do not match {width}x{height}"
        )
    cls = cls.reshape(height, width)
    inst = inst.reshape(height, width)

    if cls.min(initial=0) < 0 or inst.min(initial=0) < 0:
        raise InvariantViolation("class and instance ids must be non-negative")
    if bool(((inst != NO_INSTANCE) & (cls == VOID_CLASS)).any()):
        raise InvariantViolation("instance id present on a void (class 0) pixel")

    # One instance id must not span two classes, otherwise segment ids would
    # not be unique within the image.
    nz = inst != NO_INSTANCE
    if nz.any():
        combined = inst[nz].astype(np.int64) << 32 | cls[nz].astype(np.int64)
        pair_ids = np.unique(combined) >> 32
        if np.unique(pair_ids).size != pair_ids.size:
            raise InvariantViolation("an instance id is shared by two classes")

    return LabelMap(
        width=int(width),
        height=int(height),
        class_of=np.ascontiguousarray(cls, dtype=np.int32),
        instance_of=np.ascontiguousarray(inst, dtype=np.int32),
    )


def segment_table(label_map: LabelMap) -> tuple[SegmentRecord, ...]:
    """Enumerate the segments present in a label map.

    Returns one record per nonzero instance id, ordered by
    ``(class_id, segment_id)`` so downstream accumulation is reproducible.
    """
    inst = label_map.instance_of
    nz = inst != NO_INSTANCE
    if not nz.any():
        return ()
    combined = inst[nz].astype(np.int64) << 32 | label_map.class_of[nz].astype(np.int64)
    pairs, counts = np.unique(combined, return_counts=True)
    records = [
        SegmentRecord(int(p >> 32), int(p & 0xFFFFFFFF), int(n))
        for p, n in zip(pairs, counts)
    ]
    records.sort(key=lambda r: (r.class_id, r.segment_id))
    return tuple(records)


def validate(annotation: PanopticAnnotation) -> list[Violation]:
    """Check table/map consistency; an empty list means the annotation is valid.

    Violations are data, not errors: duplicate table ids, phantom rows (in the
    table but absent from the map), missing rows, area mismatches, class
    mismatches, instance ids on void pixels, and instance ids spanning classes.
    """
    out: list[Violation] = []
    lm = annotation.label_map

    seen: set[int] = set()
    for rec in annotation.segments:
        if rec.segment_id in seen:
            out.append(Violation("duplicate_id",
                                 f"segment_id {rec.segment_id} appears twice in the table",
                                 rec.segment_id))
        seen.add(rec.segment_id)

    bad = (lm.instance_of != NO_INSTANCE) & (lm.class_of == VOID_CLASS)
    if bool(bad.any()):
        out.append(Violation("bad_pixel",
                             f"{int(bad.sum())} pixels carry an instance id on void"))

    nz = lm.instance_of != NO_INSTANCE
    map_area: dict[int, int] = {}
    map_class: dict[int, int] = {}
    if nz.any():
        combined = (lm.instance_of[nz].astype(np.int64) << 32
                    | lm.class_of[nz].astype(np.int64))
        pairs, counts = np.unique(combined, return_counts=True)
        for p, n in zip(pairs, counts):
            sid, cid = int(p >> 32), int(p & 0xFFFFFFFF)
            if sid in map_area:
                out.append(Violation("split_instance",
                                     f"instance id {sid} spans classes "
                                     f"{map_class[sid]} and {cid}", sid))
                map_area[sid] += int(n)
            else:
                map_area[sid] = int(n)
                map_class[sid] = cid

    table_ids = {rec.segment_id for rec in annotation.segments}
    for rec in annotation.segments:
        actual = map_area.get(rec.segment_id)
        if actual is None:
            out.append(Violation("phantom_row",
                                 f"table row {rec.segment_id} has no pixels in the map",
                                 rec.segment_id))
            continue
        if actual != rec.area:
            out.append(Violation("area_mismatch",
                                 f"segment {rec.segment_id}: table area {rec.area}, "
                                 f"map area {actual}", rec.segment_id))
        if map_class[rec.segment_id] != rec.class_id:
            out.append(Violation("class_mismatch",
                                 f"segment {rec.segment_id}: table class {rec.class_id}, "
                                 f"map class {map_class[rec.segment_id]}", rec.segment_id))
    for sid in sorted(set(map_area) - table_ids):
        out.append(Violation("missing_row",
                             f"map segment {sid} has no table row", sid))
    return out


def promote_background(annotation: PanopticAnnotation,
                       background_class_id: int) -> PanopticAnnotation:
    """Turn all instance-free pixels into one scored segment of the given class.

    Used when background should participate in matching like a regular stuff
    class instead of being void. Returns the annotation unchanged when there
    are no background pixels.
    """
    lm = annotation.label_map
    bg = lm.instance_of == NO_INSTANCE
    if not bool(bg.any()):
        return annotation
    existing = [rec.segment_id for rec in annotation.segments]
    new_sid = max(existing, default=0) + 1
    cls = lm.class_of.copy()
    inst = lm.instance_of.copy()
    cls[bg] = background_class_id
    inst[bg] = new_sid
    new_map = build_label_map(cls, inst, lm.width, lm.height)
    segments = annotation.segments + (
        SegmentRecord(new_sid, background_class_id, int(bg.sum())),
    )
    return PanopticAnnotation(annotation.image_id, new_map, segments)
