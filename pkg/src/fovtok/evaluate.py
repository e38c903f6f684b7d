"""Single-point prompted evaluation: prompt selection, reprojection, mIoU,
and distance-binned precision/recall/accuracy curves.

A manifest is UTF-8 text with one record per line: image-path TAB mask-path,
each mask holding exactly one segment. Per record the pipeline is

    select_prompt -> upscale (if the image is smaller than the crop)
    -> optional Gaussian prompt noise -> tokenize -> model
    -> pick the mask with the highest predicted IoU -> threshold
    -> reproject to image space -> IoU against the ground truth.

Upscaling uses f = max(1, side / min(H, W)), bilinear for images and nearest
for masks, so the crop needs padding on at most two sides; IoU is measured
in the upscaled image space. Models implement
``predict(tokens, target) -> (list[FoveatedMask], list[float])``; the target
argument carries the foveated ground truth so that a ground-truth oracle can
be run through the identical pipeline.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import perturb_prompt, select_prompt
from .pattern import FoveationPattern, enumerate_patches, pattern_size
from .pnm import read_mask, read_pnm
from .tokenizer import (
    CropPlacement,
    FoveatedMask,
    Image,
    TokenTensor,
    _linear_axis,
    downsample_mask,
    placement_for_prompt,
    tokenize,
    upsample_patch,
)

DEFAULT_BIN_WIDTH = 4.0


class OracleModel:
    """Returns the foveated ground truth as its single mask, confidence 1."""

    def predict(self, tokens: TokenTensor, target: FoveatedMask):
        return [target], [1.0]


def resize_image(image: Image, size: tuple[int, int]) -> Image:
    """Bilinear resize to (width, height), sampling at pixel centers."""
    w, h = size
    arr = image.pixels.astype(np.float64)
    arr = _linear_axis(arr, h, axis=0)
    arr = _linear_axis(arr, w, axis=1)
    return Image(pixels=np.rint(np.clip(arr, 0.0, 255.0)).astype(np.uint8))


def resize_mask(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize of a boolean mask to (width, height)."""
    mask = np.asarray(mask) != 0
    w, h = size
    src_h, src_w = mask.shape
    rows = np.minimum((np.arange(h) * src_h) // h, src_h - 1)
    cols = np.minimum((np.arange(w) * src_w) // w, src_w - 1)
    return mask[np.ix_(rows, cols)]


def reproject_mask(
    fmask: FoveatedMask,
    placement: CropPlacement,
    image_size: tuple[int, int],
    mode: str = "bilinear",
) -> np.ndarray:
    """Interpolate each token map up to its receptive rect and un-place the
    crop into image coordinates. Pixels outside the crop (and invalid tokens)
    are 0. Returns (H, W) float64."""
    side = pattern_size(fmask.pattern)
    canvas = np.zeros((side, side), dtype=np.float64)
    for k, spec in enumerate(enumerate_patches(fmask.pattern)):
        if not fmask.valid[k]:
            continue
        x, y, w, h = spec.rect
        canvas[y : y + h, x : x + w] = upsample_patch(fmask.data[k], spec.stride, mode)
    width, height = image_size
    out = np.zeros((height, width), dtype=np.float64)
    ix0, iy0 = max(placement.x0, 0), max(placement.y0, 0)
    ix1, iy1 = min(placement.x0 + side, width), min(placement.y0 + side, height)
    if ix0 < ix1 and iy0 < iy1:
        out[iy0:iy1, ix0:ix1] = canvas[
            iy0 - placement.y0 : iy1 - placement.y0, ix0 - placement.x0 : ix1 - placement.x0
        ]
    return out


@dataclass
class EvalRecord:
    image_path: str
    mask_path: str
    prompt: tuple[int, int]
    iou_pred: list[float]
    selected: int
    iou: float

    def to_dict(self) -> dict:
        return {
            "image": self.image_path,
            "mask": self.mask_path,
            "prompt": list(self.prompt),
            "iou_pred": self.iou_pred,
            "selected": self.selected,
            "iou": self.iou,
        }


@dataclass
class DistanceBins:
    """Pixel-wise confusion counts binned by radial distance from the prompt."""

    width: float = DEFAULT_BIN_WIDTH
    tp: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fp: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fn: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    tn: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    pos: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    total: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def _grow(self, n: int) -> None:
        if n <= len(self.total):
            return
        for name in ("tp", "fp", "fn", "tn", "pos", "total"):
            arr = getattr(self, name)
            grown = np.zeros(n, dtype=np.int64)
            grown[: len(arr)] = arr
            setattr(self, name, grown)

    def add(self, pred: np.ndarray, truth: np.ndarray, prompt: tuple[int, int]) -> None:
        h, w = truth.shape
        yy = np.arange(h, dtype=np.float64)[:, None] - prompt[1]
        xx = np.arange(w, dtype=np.float64)[None, :] - prompt[0]
        dist = np.hypot(xx, yy)
        idx = (dist / self.width).astype(np.int64).ravel()
        n = int(idx.max()) + 1
        self._grow(n)
        p = pred.ravel()
        t = truth.ravel()
        self.tp[:n] += np.bincount(idx[p & t], minlength=n)
        self.fp[:n] += np.bincount(idx[p & ~t], minlength=n)
        self.fn[:n] += np.bincount(idx[~p & t], minlength=n)
        self.tn[:n] += np.bincount(idx[~p & ~t], minlength=n)
        self.pos[:n] += np.bincount(idx[t], minlength=n)
        self.total[:n] += np.bincount(idx, minlength=n)

    def merge(self, other: "DistanceBins") -> None:
        self._grow(len(other.total))
        n = len(other.total)
        for name in ("tp", "fp", "fn", "tn", "pos", "total"):
            getattr(self, name)[:n] += getattr(other, name)

    @staticmethod
    def _ratio(num: np.ndarray, den: np.ndarray) -> list:
        return [float(a) / b if b else None for a, b in zip(num, den)]

    def curves(self) -> dict:
        return {
            "width": self.width,
            "lower_edges": [i * self.width for i in range(len(self.total))],
            "precision": self._ratio(self.tp, self.tp + self.fp),
            "recall": self._ratio(self.tp, self.tp + self.fn),
            "accuracy": self._ratio(self.tp + self.tn, self.total),
            "positive_rate": self._ratio(self.pos, self.total),
        }


@dataclass
class EvalReport:
    miou: float
    records: list[EvalRecord]
    skipped_empty: int
    errors: list[str]
    bins: DistanceBins

    def to_dict(self) -> dict:
        return {
            "miou": self.miou if self.records else None,
            "count": len(self.records),
            "skipped_empty": self.skipped_empty,
            "errors": self.errors,
            "records": [r.to_dict() for r in self.records],
            "bins": self.bins.curves(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def write_curves_csv(self, path) -> None:
        curves = self.bins.curves()
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["distance_lo", "precision", "recall", "accuracy", "positive_rate"])
            for i, lo in enumerate(curves["lower_edges"]):
                writer.writerow(
                    [
                        lo,
                        curves["precision"][i],
                        curves["recall"][i],
                        curves["accuracy"][i],
                        curves["positive_rate"][i],
                    ]
                )


def read_manifest(path) -> list[tuple[str, str]]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"manifest line {n}: expected image<TAB>mask, got {line!r}")
            rows.append((parts[0], parts[1]))
    if not rows:
        raise ValueError("empty manifest")
    return rows


def _upscaled_prompt(
    prompt: tuple[int, int], old: tuple[int, int], new: tuple[int, int]
) -> tuple[int, int]:
    # pixel-center mapping: old pixel x covers new pixels around (x+0.5)*scale
    x = min(new[0] - 1, int((prompt[0] + 0.5) * new[0] / old[0]))
    y = min(new[1] - 1, int((prompt[1] + 0.5) * new[1] / old[1]))
    return (x, y)


def evaluate_record(
    image: Image,
    mask: np.ndarray,
    pattern: FoveationPattern,
    model,
    *,
    threshold: float = 0.5,
    sigma: float = 0.0,
    rng: np.random.Generator | None = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> tuple[tuple[int, int], list[float], int, float, DistanceBins]:
    """Run the protocol on one (image, mask) pair.

    Returns (prompt, predicted ious, selected index, iou, bins). The mask
    must contain at least one positive pixel.
    """
    if (image.height, image.width) != mask.shape:
        raise ValueError(
            f"dimension mismatch: image {image.width}x{image.height}, "
            f"mask {mask.shape[1]}x{mask.shape[0]}"
        )
    side = pattern_size(pattern)
    prompt = select_prompt(mask)
    smallest = min(image.width, image.height)
    if smallest < side:
        f = side / smallest
        new_w = max(side, round(image.width * f))
        new_h = max(side, round(image.height * f))
        old = (image.width, image.height)
        image = resize_image(image, (new_w, new_h))
        mask = resize_mask(mask, (new_w, new_h))
        prompt = _upscaled_prompt(prompt, old, (new_w, new_h))
        if not mask[prompt[1], prompt[0]]:
            prompt = select_prompt(mask)  # rounding pushed us off the segment
    if sigma > 0:
        if rng is None:
            raise ValueError("sigma > 0 requires an rng")
        prompt = perturb_prompt(prompt, sigma, rng, (image.width, image.height))
    tokens = tokenize(image, prompt, pattern)
    target = downsample_mask(mask, prompt, pattern)
    masks, ious = model.predict(tokens, target)
    if len(masks) < 1 or len(ious) != len(masks):
        raise ValueError("model must return equal-length mask and iou lists")
    selected = int(np.argmax(ious))
    placement = placement_for_prompt(prompt, pattern, image.width, image.height)
    full = reproject_mask(masks[selected], placement, (image.width, image.height))
    pred = full >= threshold
    inter = int((pred & mask).sum())
    union = int((pred | mask).sum())
    iou = inter / union if union else 1.0
    bins = DistanceBins(width=bin_width)
    bins.add(pred, mask, prompt)
    return prompt, [float(v) for v in ious], selected, iou, bins


def evaluate_dataset(
    manifest,
    pattern: FoveationPattern,
    model,
    *,
    threshold: float = 0.5,
    sigma: float = 0.0,
    seed: int = 0,
    bin_width: float = DEFAULT_BIN_WIDTH,
    max_workers: int = 1,
) -> EvalReport:
    """Evaluate every manifest record; aggregation is order-independent.

    Records with unreadable files are reported in ``errors``; empty masks are
    counted in ``skipped_empty``. Per-record noise draws come from a
    generator seeded by (seed, record index), so results do not depend on
    worker count.
    """
    rows = read_manifest(manifest)

    def run(idx_row):
        idx, (image_path, mask_path) = idx_row
        try:
            image = read_pnm(image_path)
            mask = read_mask(mask_path)
            if not mask.any():
                return ("empty", None)
            rng = np.random.default_rng([seed, idx])
            prompt, iou_pred, selected, iou, bins = evaluate_record(
                image,
                mask,
                pattern,
                model,
                threshold=threshold,
                sigma=sigma,
                rng=rng,
                bin_width=bin_width,
            )
            record = EvalRecord(
                image_path=str(image_path),
                mask_path=str(mask_path),
                prompt=prompt,
                iou_pred=iou_pred,
                selected=selected,
                iou=iou,
            )
            return ("ok", (record, bins))
        except (OSError, ValueError) as e:
            return ("error", f"{image_path}: {e}")

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, enumerate(rows)))
    else:
        outcomes = [run(item) for item in enumerate(rows)]

    records: list[EvalRecord] = []
    errors: list[str] = []
    skipped = 0
    bins = DistanceBins(width=bin_width)
    for kind, payload in outcomes:
        if kind == "ok":
            record, contribution = payload
            records.append(record)
            bins.merge(contribution)
        elif kind == "empty":
            skipped += 1
        else:
            errors.append(payload)
    miou = float(np.mean([r.iou for r in records])) if records else math.nan
    return EvalReport(
        miou=miou, records=records, skipped_empty=skipped, errors=errors, bins=bins
    )
