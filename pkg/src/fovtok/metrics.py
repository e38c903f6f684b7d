"""Losses and prompt operations on foveated maps.

All losses operate on per-sample probabilities in [0, 1] and weight each
sample by its receptive-field area (stride squared), so a coarse peripheral
sample counts for as many pixels as it summarizes. Only samples of valid
tokens participate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .pattern import FoveationPattern, token_strides
from .tokenizer import FoveatedMask

LOG_CLAMP = 1e-12
DICE_EPS = 1.0


@dataclass(frozen=True)
class LossWeights:
    focal: float = 20.0
    dice: float = 1.0
    iou: float = 0.01

    def __post_init__(self):
        if self.focal < 0 or self.dice < 0 or self.iou < 0:
            raise ValueError("loss weights must be non-negative")


def sample_weights(pattern: FoveationPattern) -> np.ndarray:
    """Receptive-field area per sample, shaped (N, 1, 1) for broadcasting."""
    strides = np.asarray(token_strides(pattern), dtype=np.float64)
    return (strides**2)[:, None, None]


def _matched(p: FoveatedMask, q: FoveatedMask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if p.pattern != q.pattern:
        raise ValueError("pattern mismatch between prediction and target")
    if not np.array_equal(p.valid, q.valid):
        raise ValueError("validity mismatch between prediction and target")
    w = np.broadcast_to(sample_weights(p.pattern), p.data.shape)
    v = p.valid
    return p.data[v], q.data[v], w[v]


def expected_iou(pred: FoveatedMask, target: FoveatedMask) -> float:
    """Soft IoU: expected intersection over expected union.

    Each sample contributes w*p*q to the intersection and
    w*(1 - (1-p)(1-q)) to the union, treating the target value as the
    probability that the sample's receptive field is positive. Equals plain
    binary IoU when both maps are binary and strides uniform. Returns 1.0
    when both sums are zero.
    """
    p, q, w = _matched(pred, target)
    num = float((w * p * q).sum())
    den = float((w * (1.0 - (1.0 - p) * (1.0 - q))).sum())
    if den == 0.0:
        return 1.0
    return num / den


def focal_loss(pred: FoveatedMask, target: FoveatedMask, gamma: float = 2.0) -> float:
    """Continuous-target focal loss, area-weighted mean over valid samples."""
    p, q, w = _matched(pred, target)
    p = np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)
    term = -(q * (1.0 - p) ** gamma * np.log(p) + (1.0 - q) * p**gamma * np.log(1.0 - p))
    return float((w * term).sum() / w.sum())


def dice_loss(pred: FoveatedMask, target: FoveatedMask) -> float:
    """Continuous dice loss with additive smoothing (eps = 1.0)."""
    p, q, w = _matched(pred, target)
    num = 2.0 * float((w * p * q).sum()) + DICE_EPS
    den = float((w * p).sum()) + float((w * q).sum()) + DICE_EPS
    return 1.0 - num / den


def combined_loss(
    masks: Sequence[FoveatedMask],
    ious: Sequence[float],
    target: FoveatedMask,
    weights: LossWeights | None = None,
) -> tuple[float, int]:
    """Best-of-N training loss.

    Each candidate mask scores focal*w_f + dice*w_d; only the best (lowest,
    ties to the lowest index) contributes the segmentation term. The IoU
    regression term (iou_i - expected_iou_i)^2 is applied to every mask.
    Returns (total, best_index).
    """
    if len(masks) < 1:
        raise ValueError("need at least one mask")
    if len(ious) != len(masks):
        raise ValueError("ious and masks must have the same length")
    weights = weights or LossWeights()
    per_mask = [
        weights.focal * focal_loss(m, target) + weights.dice * dice_loss(m, target)
        for m in masks
    ]
    best = int(np.argmin(per_mask))
    iou_term = sum(
        (float(iou) - expected_iou(m, target)) ** 2 for m, iou in zip(masks, ious)
    )
    return per_mask[best] + weights.iou * iou_term, best


def select_prompt(mask: np.ndarray) -> tuple[int, int]:
    """The positive pixel farthest from any non-positive pixel or the border.

    Distances are Euclidean; pixels just outside the image count as
    non-positive. Ties resolve to the smallest (y, x). Returns (x, y).
    """
    mask = np.asarray(mask) != 0
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    if not mask.any():
        raise ValueError("empty mask")
    padded = np.pad(mask, 1)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    dist[~mask] = -1.0
    flat = int(np.argmax(dist))  # first max in row-major order = smallest (y, x)
    y, x = divmod(flat, mask.shape[1])
    return (x, y)


def perturb_prompt(
    point: tuple[int, int],
    sigma: float,
    rng: np.random.Generator,
    bounds: tuple[int, int],
) -> tuple[int, int]:
    """Add isotropic Gaussian noise, round to the pixel grid, clamp to bounds.

    bounds is (width, height). sigma = 0 is the identity and draws nothing
    from the generator.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return (int(point[0]), int(point[1]))
    dx, dy = rng.normal(0.0, sigma, size=2)
    x = int(np.clip(np.rint(point[0] + dx), 0, bounds[0] - 1))
    y = int(np.clip(np.rint(point[1] + dy), 0, bounds[1] - 1))
    return (x, y)
