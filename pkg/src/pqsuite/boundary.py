"""Boundary bands, boundary IoU, and boundary-weighted IoU over binary masks.

Band membership uses the exact Euclidean distance transform on pixel centers:
a mask pixel belongs to the band of radius r when the distance to the nearest
pixel outside the mask is below r + 1, where the image border counts as
outside. Measured toward the mask instead, the same rule defines the outer
band used for boundary weighting. With radius 1 this yields the 8-connected
one-pixel rim on either side of the contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, EmptyMask, InvalidParameter


@dataclass(frozen=True, eq=False)
class BoundaryBand:
    """Contour band of one mask: the band is always a subset of its source."""

    mask: np.ndarray
    radius_px: int
    source: np.ndarray


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Per-pixel importance weights: ``boundary_factor`` on the band, 1 elsewhere."""

    weights: np.ndarray
    boundary_factor: float
    band_radius_px: int


def band_radius(d: float, width: int, height: int) -> int:
    """Band radius in pixels from a diagonal fraction: max(1, round(d * diag))."""
    if not 0.0 < d <= 1.0:
        raise InvalidParameter(f"contour fraction must be in (0, 1], got {d}")
    return max(1, round(d * math.hypot(width, height)))


def _distance_to_outside(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance from each pixel to the nearest non-mask pixel.

    The frame is padded so the image border counts as outside.
    """
    padded = np.pad(mask, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def _distance_to_mask(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance from each pixel to the nearest mask pixel."""
    return ndimage.distance_transform_edt(~mask)


def boundary_band(mask: np.ndarray, radius_px: int) -> BoundaryBand:
    """Inner contour band of a mask.

    Once ``radius_px`` reaches the image diagonal the band degenerates to the
    mask itself.
    """
    if radius_px < 1:
        raise InvalidParameter(f"band radius must be >= 1, got {radius_px}")
    mask = np.asarray(mask, dtype=bool)
    band = mask & (_distance_to_outside(mask) < radius_px + 1)
    return BoundaryBand(mask=band, radius_px=radius_px, source=mask)


def _joint_crop(gt_mask: np.ndarray, pred_mask: np.ndarray):
    either = gt_mask | pred_mask
    rows = np.flatnonzero(either.any(axis=1))
    cols = np.flatnonzero(either.any(axis=0))
    window = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    return gt_mask[window], pred_mask[window]


def boundary_iou(gt_mask: np.ndarray, pred_mask: np.ndarray, radius_px: int) -> float:
    """IoU restricted to the two masks' inner contour bands.

    Equals 1 for identical masks and coincides with plain IoU once the radius
    reaches the image diagonal.
    """
    gt_mask = np.asarray(gt_mask, dtype=bool)
    pred_mask = np.asarray(pred_mask, dtype=bool)
    if gt_mask.shape != pred_mask.shape:
        raise DimensionMismatch(f"mask frames differ: {gt_mask.shape} vs {pred_mask.shape}")
    if not gt_mask.any() or not pred_mask.any():
        raise EmptyMask("boundary IoU needs two nonempty masks")
    if radius_px < 1:
        raise InvalidParameter(f"band radius must be >= 1, got {radius_px}")

    g, p = _joint_crop(gt_mask, pred_mask)
    g_band = g & (_distance_to_outside(g) < radius_px + 1)
    p_band = p & (_distance_to_outside(p) < radius_px + 1)
    inter = int((g_band & p_band).sum())
    union = int((g_band | p_band).sum())
    return inter / union


def weight_map(gt_mask: np.ndarray, a: float, radius_px: int) -> WeightMap:
    """Importance weights derived from a ground-truth mask's contour.

    Both the inner band and the outer band (non-mask pixels within the radius,
    clipped at the frame) carry weight ``a``; everything else weighs 1. The
    weighting comes from the ground truth only, so every candidate prediction
    of a segment is judged against the same map.
    """
    if a < 1.0:
        raise InvalidParameter(f"boundary factor must be >= 1, got {a}")
    if radius_px < 1:
        raise InvalidParameter(f"band radius must be >= 1, got {radius_px}")
    gt_mask = np.asarray(gt_mask, dtype=bool)
    limit = radius_px + 1
    near = np.where(gt_mask,
                    _distance_to_outside(gt_mask) < limit,
                    _distance_to_mask(gt_mask) < limit)
    weights = np.where(near, float(a), 1.0)
    return WeightMap(weights=weights, boundary_factor=float(a),
                     band_radius_px=radius_px)


def weighted_iou(gt_mask: np.ndarray, pred_mask: np.ndarray, w: WeightMap) -> float:
    """Weighted IoU: sum of weights over the intersection divided by the union."""
    gt_mask = np.asarray(gt_mask, dtype=bool)
    pred_mask = np.asarray(pred_mask, dtype=bool)
    if gt_mask.shape != pred_mask.shape or gt_mask.shape != w.weights.shape:
        raise DimensionMismatch("masks and weight map must share one frame")
    union = gt_mask | pred_mask
    if not union.any():
        raise EmptyMask("weighted IoU is undefined on an empty union")
    inter = gt_mask & pred_mask
    return float(w.weights[inter].sum()) / float(w.weights[union].sum())


def weighted_pair_quality(gt_mask: np.ndarray, pred_mask: np.ndarray,
                          a: float, radius_px: int) -> float:
    """Weighted IoU of a matched pair, computed on the joint bounding box.

    Exact: pixels outside the joint box belong to neither mask, and the
    ground-truth bands are fully determined inside it.
    """
    gt_mask = np.asarray(gt_mask, dtype=bool)
    pred_mask = np.asarray(pred_mask, dtype=bool)
    if gt_mask.shape != pred_mask.shape:
        raise DimensionMismatch(f"mask frames differ: {gt_mask.shape} vs {pred_mask.shape}")
    if not (gt_mask | pred_mask).any():
        raise EmptyMask("weighted IoU is undefined on an empty union")
    g, p = _joint_crop(gt_mask, pred_mask)
    return weighted_iou(g, p, weight_map(g, a, radius_px))
