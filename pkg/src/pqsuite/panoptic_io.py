"""COCO-style panoptic dataset I/O.

Covers the id-encoded PNG codec (``id = R + 256*G + 65536*B``, id 0 = void),
the manifest JSON layout (``images`` / ``annotations`` with ``segments_info`` /
``categories``), generic class+instance mask-pair ingestion, deterministic
segment coloring, and visualization rendering.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import (
    CategoryMissing,
    ChannelError,
    CodecError,
    DimensionMismatch,
    IdOverflow,
    InvariantViolation,
    MissingFile,
    UnknownSegmentId,
    UnmappedCategory,
)
from .segmap import PanopticAnnotation, SegmentRecord, build_label_map

MAX_ID = 1 << 24
# Pinned PNG settings so encode output is reproducible run to run.
_PNG_COMPRESS_LEVEL = 6


@dataclass(frozen=True, eq=False)
class IdMap:
    """Per-pixel segment ids for one image; 0 is void."""

    width: int
    height: int
    id_of: np.ndarray

    def __post_init__(self) -> None:
        self.id_of.setflags(write=False)


def ids_from_rgb(rgb: np.ndarray) -> np.ndarray:
    """Fold an (H, W, 3) uint8 raster into uint32 segment ids."""
    rgb = rgb.astype(np.uint32)
    return rgb[..., 0] + 256 * rgb[..., 1] + 65536 * rgb[..., 2]


def rgb_from_ids(ids: np.ndarray) -> np.ndarray:
    """Expand segment ids into an (H, W, 3) uint8 raster."""
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= MAX_ID:
        raise IdOverflow(f"segment ids must lie in [0, {MAX_ID})")
    ids = ids.astype(np.uint32)
    out = np.empty(ids.shape + (3,), dtype=np.uint8)
    out[..., 0] = ids & 255
    out[..., 1] = (ids >> 8) & 255
    out[..., 2] = ids >> 16
    return out


def decode_panoptic_png(data: bytes) -> IdMap:
    """Decode panoptic PNG bytes into an IdMap.

    Raises CodecError on malformed image data and ChannelError when the image
    is not 8-bit RGB.
    """
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise CodecError(f"cannot decode panoptic PNG: {exc}") from exc
    if img.mode != "RGB":
        raise ChannelError(f"panoptic PNG must be RGB, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    return IdMap(width=img.width, height=img.height, id_of=ids_from_rgb(arr))


def encode_panoptic_png(id_map: IdMap) -> bytes:
    """Encode an IdMap as panoptic PNG bytes; inverse of decode_panoptic_png."""
    rgb = rgb_from_ids(id_map.id_of)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(
        buf, format="PNG", optimize=False, compress_level=_PNG_COMPRESS_LEVEL
    )
    return buf.getvalue()


@dataclass(frozen=True)
class Category:
    class_id: int
    name: str
    isthing: bool = True


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    width: int
    height: int
    file_name: str


@dataclass(frozen=True)
class SegmentInfo:
    segment_id: int
    category_id: int
    area: int
    bbox: tuple[int, int, int, int]
    iscrowd: bool = False


@dataclass(frozen=True)
class AnnotationEntry:
    image_id: str
    file_name: str
    segments: tuple[SegmentInfo, ...]


@dataclass
class DatasetManifest:
    """COCO panoptic manifest: categories, image list, per-image segment tables."""

    categories: dict[int, Category]
    images: list[ImageEntry]
    annotations: dict[str, AnnotationEntry]
    root: Path | None = None

    def image_ids(self) -> list[str]:
        return [img.image_id for img in self.images]

    @classmethod
    def from_json_obj(cls, obj: Mapping, root: Path | None = None) -> "DatasetManifest":
        categories = {}
        for cat in obj.get("categories", []):
            cid = int(cat["id"])
            if cid <= 0:
                raise InvariantViolation(f"category id must be positive, got {cid}")
            categories[cid] = Category(cid, str(cat.get("name", cid)),
                                       bool(cat.get("isthing", 1)))
        images = [
            ImageEntry(str(img["id"]), int(img["width"]), int(img["height"]),
                       str(img["file_name"]))
            for img in obj.get("images", [])
        ]
        listed = {img.image_id for img in images}
        annotations: dict[str, AnnotationEntry] = {}
        for ann in obj.get("annotations", []):
            image_id = str(ann["image_id"])
            if image_id not in listed:
                raise InvariantViolation(f"annotation references unlisted image {image_id!r}")
            segments = []
            for seg in ann.get("segments_info", []):
                cat_id = int(seg["category_id"])
                if cat_id not in categories:
                    raise CategoryMissing(
                        f"segment {seg['id']} of image {image_id!r} uses "
                        f"undeclared category {cat_id}")
                segments.append(SegmentInfo(
                    segment_id=int(seg["id"]),
                    category_id=cat_id,
                    area=int(seg.get("area", -1)),
                    bbox=tuple(int(v) for v in seg.get("bbox", (0, 0, 0, 0))),
                    iscrowd=bool(seg.get("iscrowd", 0)),
                ))
            annotations[image_id] = AnnotationEntry(image_id, str(ann["file_name"]),
                                                    tuple(segments))
        return cls(categories=categories, images=images, annotations=annotations, root=root)

    def to_json_obj(self) -> dict:
        return {
            "categories": [
                {"id": c.class_id, "name": c.name, "isthing": int(c.isthing)}
                for c in sorted(self.categories.values(), key=lambda c: c.class_id)
            ],
            "images": [
                {"id": img.image_id, "width": img.width, "height": img.height,
                 "file_name": img.file_name}
                for img in self.images
            ],
            "annotations": [
                {
                    "image_id": ann.image_id,
                    "file_name": ann.file_name,
                    "segments_info": [
                        {"id": s.segment_id, "category_id": s.category_id,
                         "area": s.area, "bbox": list(s.bbox),
                         "iscrowd": int(s.iscrowd)}
                        for s in ann.segments
                    ],
                }
                for ann in (self.annotations[img.image_id] for img in self.images
                            if img.image_id in self.annotations)
            ],
        }


def load_manifest(json_path: str | Path, png_root: str | Path | None = None) -> DatasetManifest:
    """Read a manifest JSON; PNGs default to the sibling directory named after it."""
    json_path = Path(json_path)
    if not json_path.exists():
        raise MissingFile(f"manifest not found: {json_path}")
    with open(json_path) as f:
        obj = json.load(f)
    if png_root is None:
        candidate = json_path.with_suffix("")
        png_root = candidate if candidate.is_dir() else json_path.parent
    return DatasetManifest.from_json_obj(obj, root=Path(png_root))


def load_annotation(manifest: DatasetManifest, image_id: str,
                    png_bytes: bytes | None = None) -> PanopticAnnotation:
    """Join an image's id PNG with its segment table into a PanopticAnnotation.

    ``png_bytes`` may be supplied directly; otherwise the file is resolved
    against ``manifest.root``.

    Raises MissingFile, UnknownSegmentId (PNG id absent from the table),
    CategoryMissing, and DimensionMismatch.
    """
    image_id = str(image_id)
    entry = next((img for img in manifest.images if img.image_id == image_id), None)
    ann = manifest.annotations.get(image_id)
    if entry is None or ann is None:
        raise MissingFile(f"image {image_id!r} not present in manifest")
    if png_bytes is None:
        if manifest.root is None:
            raise MissingFile("manifest has no root directory to resolve PNG files")
        path = Path(manifest.root) / ann.file_name
        if not path.exists():
            raise MissingFile(f"panoptic PNG not found: {path}")
        png_bytes = path.read_bytes()

    id_map = decode_panoptic_png(png_bytes)
    if (id_map.width, id_map.height) != (entry.width, entry.height):
        raise DimensionMismatch(
            f"image {image_id!r}: PNG is {id_map.width}x{id_map.height}, "
            f"manifest says {entry.width}x{entry.height}")

    by_id = {s.segment_id: s for s in ann.segments}
    present = np.unique(id_map.id_of)
    present = present[present != 0]
    for sid in present.tolist():
        if sid not in by_id:
            raise UnknownSegmentId(
                f"image {image_id!r}: PNG id {sid} has no segments_info row")

    class_of = np.zeros(id_map.id_of.shape, dtype=np.int32)
    for sid in present.tolist():
        info = by_id[sid]
        if info.category_id not in manifest.categories:
            raise CategoryMissing(f"category {info.category_id} not in manifest")
        class_of[id_map.id_of == sid] = info.category_id

    label_map = build_label_map(class_of, id_map.id_of.astype(np.int32),
                                entry.width, entry.height)
    areas = {sid: int((id_map.id_of == sid).sum()) for sid in present.tolist()}
    records = [
        SegmentRecord(s.segment_id, s.category_id,
                      s.area if s.area >= 0 else areas.get(s.segment_id, 0),
                      s.iscrowd)
        for s in ann.segments
    ]
    records.sort(key=lambda r: (r.class_id, r.segment_id))
    return PanopticAnnotation(image_id, label_map, tuple(records))


def segment_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """COCO-style [x, y, w, h] bounding box of a boolean mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return (0, 0, 0, 0)
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def annotation_to_entries(ann: PanopticAnnotation, file_name: str) -> AnnotationEntry:
    """Derive the manifest rows (with bboxes) for one annotation."""
    lm = ann.label_map
    segments = []
    for rec in ann.segments:
        mask = lm.segment_mask(rec.segment_id)
        segments.append(SegmentInfo(rec.segment_id, rec.class_id,
                                    int(mask.sum()), segment_bbox(mask),
                                    rec.ignore_flag))
    return AnnotationEntry(ann.image_id, file_name, tuple(segments))


def write_dataset(json_path: str | Path, png_dir: str | Path,
                  annotations: Sequence[PanopticAnnotation],
                  categories: Mapping[int, Category]) -> DatasetManifest:
    """Write PNGs plus manifest JSON for a set of annotations."""
    json_path = Path(json_path)
    png_dir = Path(png_dir)
    png_dir.mkdir(parents=True, exist_ok=True)
    images, entries = [], {}
    for ann in annotations:
        lm = ann.label_map
        file_name = f"{ann.image_id}.png"
        id_map = IdMap(lm.width, lm.height, lm.instance_of.astype(np.uint32))
        (png_dir / file_name).write_bytes(encode_panoptic_png(id_map))
        images.append(ImageEntry(ann.image_id, lm.width, lm.height, file_name))
        entries[ann.image_id] = annotation_to_entries(ann, file_name)
    manifest = DatasetManifest(categories=dict(categories), images=images,
                               annotations=entries, root=png_dir)
    with open(json_path, "w") as f:
        json.dump(manifest.to_json_obj(), f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def read_mask(path: str | Path) -> np.ndarray:
    """Read a single-channel 8/16-bit mask PNG as an integer array."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"mask not found: {path}")
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise CodecError(f"cannot decode mask {path}: {exc}") from exc
    if img.mode not in ("L", "I", "I;16", "P"):
        raise ChannelError(f"mask {path} must be single-channel, got mode {img.mode!r}")
    if img.mode == "P":
        img = img.convert("L")
    return np.asarray(img).astype(np.int64)


def ingest_mask_pair(class_plane, instance_plane,
                     category_mapping: Mapping[int, int],
                     image_id: str = "image") -> PanopticAnnotation:
    """Convert a class mask + instance mask pair into a panoptic annotation.

    A segment is one (class value, instance value) pair with a nonzero
    instance; segments are renumbered 1..k in (class, instance) order so ids
    are unique within the image. ``category_mapping`` translates nonzero class
    values to category ids and must cover all of them.
    """
    cls = np.asarray(class_plane)
    inst = np.asarray(instance_plane)
    if cls.shape != inst.shape:
        raise DimensionMismatch(f"class plane {cls.shape} vs instance plane {inst.shape}")

    unmapped = sorted(set(np.unique(cls).tolist()) - {0} - set(category_mapping))
    if unmapped:
        raise UnmappedCategory(f"class values with no category mapping: {unmapped}")

    out_cls = np.zeros(cls.shape, dtype=np.int32)
    out_inst = np.zeros(cls.shape, dtype=np.int32)
    nz = inst != 0
    pairs = sorted(
        {(int(c), int(i)) for c, i in
         zip(cls[nz].ravel().tolist(), inst[nz].ravel().tolist())}
    )
    for new_id, (c, i) in enumerate(pairs, start=1):
        sel = (cls == c) & (inst == i)
        out_inst[sel] = new_id
        out_cls[sel] = category_mapping.get(c, 0)
    # Keep declared semantic labels on instance-free pixels as well.
    semantic_only = (~nz) & (cls != 0)
    if semantic_only.any():
        lut = np.vectorize(lambda v: category_mapping[v], otypes=[np.int32])
        out_cls[semantic_only] = lut(cls[semantic_only])

    label_map = build_label_map(out_cls, out_inst, cls.shape[1], cls.shape[0])
    return PanopticAnnotation.from_label_map(image_id, label_map)


_M64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return (x ^ (x >> 31)) & _M64


def generate_color(class_id: int, segment_id: int, palette_seed: int,
                   probe: int = 0) -> tuple[int, int, int]:
    """Deterministic RGB color for a segment from a 64-bit mix hash.

    Never returns pure black (reserved for void). ``probe`` re-seeds the hash
    and is used by :func:`build_palette` to resolve in-image collisions.
    """
    h = _mix64(palette_seed & _M64)
    for v in (class_id, segment_id, probe):
        h = _mix64(h ^ (v & _M64))
    while True:
        rgb = h & 0xFFFFFF
        if rgb != 0:
            return (rgb & 255, (rgb >> 8) & 255, rgb >> 16)
        h = _mix64(h)


def build_palette(segments: Iterable[tuple[int, int]],
                  palette_seed: int) -> dict[int, tuple[int, int, int]]:
    """Assign distinct colors to (class_id, segment_id) pairs of one image.

    Collisions are resolved by linear re-probe, so distinctness is guaranteed
    as long as fewer than 2^24 - 1 segments are requested.
    """
    palette: dict[int, tuple[int, int, int]] = {}
    used: set[tuple[int, int, int]] = set()
    for class_id, segment_id in sorted(segments):
        probe = 0
        color = generate_color(class_id, segment_id, palette_seed, probe)
        while color in used:
            probe += 1
            color = generate_color(class_id, segment_id, palette_seed, probe)
        used.add(color)
        palette[segment_id] = color
    return palette


def render_visualization(ann: PanopticAnnotation, palette_seed: int = 0,
                         contours: bool = False) -> np.ndarray:
    """Render an annotation as an RGB raster; void pixels are black.

    With ``contours`` each segment gets a 1-pixel white rim.
    """
    lm = ann.label_map
    out = np.zeros((lm.height, lm.width, 3), dtype=np.uint8)
    palette = build_palette(((r.class_id, r.segment_id) for r in ann.segments),
                            palette_seed)
    for rec in sorted(ann.segments, key=lambda r: (r.class_id, r.segment_id)):
        mask = lm.segment_mask(rec.segment_id)
        if not mask.any():
            continue
        out[mask] = palette[rec.segment_id]
        if contours:
            rim = mask & ~ndimage.binary_erosion(mask)
            out[rim] = (255, 255, 255)
    return out


SEPARATOR_PX = 2


def compose_side_by_side(left: np.ndarray, right: np.ndarray,
                         separator_value: int = 128) -> np.ndarray:
    """Join two equal-height RGB rasters with a thin gray separator column."""
    if left.shape[0] != right.shape[0]:
        raise DimensionMismatch("panels must share a height to be composed")
    sep = np.full((left.shape[0], SEPARATOR_PX, 3), separator_value, dtype=np.uint8)
    return np.concatenate([left, sep, right], axis=1)
