"""Image and segmentation quality metrics."""

from __future__ import annotations

import logging

import numpy as np

from .errors import InvalidParameterError
from .losses import ssim
from .validation import check_same_shape

__all__ = [
    "PSNR_CAP_DB",
    "psnr",
    "ssim",
    "iou_per_class",
    "mean_iou",
    "mask_miou",
    "localization_accuracy",
]

logger = logging.getLogger(__name__)

# Reported ceiling for near-identical images; keeps the scale monotone
# instead of jumping to inf when the MSE underflows.
PSNR_CAP_DB = 99.0


def psnr(img: np.ndarray, target: np.ndarray, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP_DB``."""
    img = np.asarray(img, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    check_same_shape(img, target, "img", "target")
    mse = float(np.mean((img - target) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(data_range ** 2 / mse), PSNR_CAP_DB)


def iou_per_class(pred: np.ndarray, target: np.ndarray, num_classes: int) -> np.ndarray:
    """Intersection-over-union for each class index; NaN where a class is
    absent from both prediction and target."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    check_same_shape(pred, target, "pred", "target")
    if num_classes < 1:
        raise InvalidParameterError("num_classes must be positive")
    out = np.full(num_classes, np.nan)
    for c in range(num_classes):
        p = pred == c
        t = target == c
        union = np.logical_or(p, t).sum()
        if union:
            out[c] = np.logical_and(p, t).sum() / union
    return out


def mean_iou(pred: np.ndarray, target: np.ndarray, num_classes: int,
             skip_undetected: bool = True) -> float:
    """Mean IoU over classes present in either map.

    ``skip_undetected`` leaves class 0 out of the average, matching how
    segmentation quality is reported for the detected objects only.
    """
    ious = iou_per_class(pred, target, num_classes)
    if skip_undetected:
        ious = ious[1:]
    ious = ious[~np.isnan(ious)]
    if ious.size == 0:
        raise InvalidParameterError("no classes present to average over")
    return float(ious.mean())


def mask_miou(pred_masks: np.ndarray, gt_masks: np.ndarray) -> float:
    """Mean IoU over per-query binary masks.

    Both inputs are boolean stacks of shape (Q, H, W).  A query where both
    masks are empty counts as a perfect 1.0 (nothing to find, nothing found).
    """
    pred_masks = np.asarray(pred_masks, dtype=bool)
    gt_masks = np.asarray(gt_masks, dtype=bool)
    check_same_shape(pred_masks, gt_masks, "pred_masks", "gt_masks")
    if pred_masks.ndim != 3:
        raise InvalidParameterError(
            f"expected (Q, H, W) mask stacks, got shape {pred_masks.shape}"
        )
    axes = (1, 2)
    inter = np.logical_and(pred_masks, gt_masks).sum(axis=axes)
    union = np.logical_or(pred_masks, gt_masks).sum(axis=axes)
    scores = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
    return float(scores.mean())


def localization_accuracy(relevancy_maps: np.ndarray, gt_masks: np.ndarray) -> float:
    """Fraction of queries whose maximum-relevancy pixel lies inside the
    ground-truth mask.

    Queries with an empty ground-truth mask are skipped (and logged); the
    fraction is taken over the remaining queries.  Returns NaN if every
    query was skipped.
    """
    relevancy_maps = np.asarray(relevancy_maps, dtype=np.float64)
    gt_masks = np.asarray(gt_masks, dtype=bool)
    check_same_shape(relevancy_maps, gt_masks, "relevancy_maps", "gt_masks")
    if relevancy_maps.ndim != 3:
        raise InvalidParameterError(
            f"expected (Q, H, W) stacks, got shape {relevancy_maps.shape}"
        )
    hits = 0
    counted = 0
    for q in range(relevancy_maps.shape[0]):
        mask = gt_masks[q]
        if not mask.any():
            logger.warning("localization query %d skipped: empty ground-truth mask", q)
            continue
        peak = np.unravel_index(np.argmax(relevancy_maps[q]), mask.shape)
        counted += 1
        hits += bool(mask[peak])
    if counted == 0:
        return float("nan")
    return hits / counted
