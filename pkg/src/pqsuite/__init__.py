"""pqsuite: panoptic segmentation quality metrics over COCO panoptic data.

Library surface: build label maps and annotations (:mod:`pqsuite.segmap`),
read/write panoptic datasets (:mod:`pqsuite.panoptic_io`), match segments
(:mod:`pqsuite.matching`), boundary quality terms (:mod:`pqsuite.boundary`),
the metric family itself (:mod:`pqsuite.pqmetrics`), seeded synthetic scenes
(:mod:`pqsuite.synth`), and brute-force reference implementations
(:mod:`pqsuite.oracle`).
"""

from .boundary import (
    BoundaryBand,
    WeightMap,
    band_radius,
    boundary_band,
    boundary_iou,
    weight_map,
    weighted_iou,
)
from .matching import (
    ClassMatch,
    ContingencyTable,
    MatchResult,
    apply_void_rule,
    contingency,
    iou,
    match_segments,
)
from .panoptic_io import (
    Category,
    DatasetManifest,
    IdMap,
    decode_panoptic_png,
    encode_panoptic_png,
    generate_color,
    ingest_mask_pair,
    load_annotation,
    load_manifest,
    render_visualization,
    write_dataset,
)
from .pqmetrics import (
    ALL_METRICS,
    CellStats,
    MetricConfig,
    MetricReport,
    PqStats,
    bpq,
    evaluate_annotations,
    evaluate_dataset,
    fwpq,
    image_cells,
    ipq,
    mpq_plus,
    pq_stats,
    quality_ratio,
    r_squared,
    vanilla_pq,
    wpq,
)
from .segmap import (
    LabelMap,
    PanopticAnnotation,
    SegmentRecord,
    Violation,
    build_label_map,
    promote_background,
    segment_table,
    validate,
)
from .synth import Perturbation, SceneSpec, generate_scene, perturb

__version__ = "0.1.0"

__all__ = [
    "ALL_METRICS",
    "BoundaryBand",
    "Category",
    "CellStats",
    "ClassMatch",
    "ContingencyTable",
    "DatasetManifest",
    "IdMap",
    "LabelMap",
    "MatchResult",
    "MetricConfig",
    "MetricReport",
    "PanopticAnnotation",
    "Perturbation",
    "PqStats",
    "SceneSpec",
    "SegmentRecord",
    "Violation",
    "WeightMap",
    "apply_void_rule",
    "band_radius",
    "boundary_band",
    "boundary_iou",
    "bpq",
    "build_label_map",
    "contingency",
    "decode_panoptic_png",
    "encode_panoptic_png",
    "evaluate_annotations",
    "evaluate_dataset",
    "fwpq",
    "generate_color",
    "generate_scene",
    "image_cells",
    "ingest_mask_pair",
    "iou",
    "ipq",
    "load_annotation",
    "load_manifest",
    "match_segments",
    "mpq_plus",
    "perturb",
    "pq_stats",
    "promote_background",
    "quality_ratio",
    "r_squared",
    "render_visualization",
    "segment_table",
    "validate",
    "vanilla_pq",
    "weight_map",
    "weighted_iou",
    "wpq",
    "write_dataset",
]
