"""Foveated tokenization: crop around a prompt, box-filter, pack, and invert.

The crop is a square of the pattern's side length, placed so that the prompt
pixel sits at crop coordinate (side // 2, side // 2). Out-of-image pixels are
zero padding. Each patch is reduced to a patch_size x patch_size sample grid
by averaging stride x stride pixel blocks; block sums come from an integer
summed-area table, so every sample is the exact block mean (one floating
division of an exact integer sum).

Token data is kept as float64 in [0, 1]; the wire format (tokenfile) stores
8-bit samples. Images are uint8, shape (H, W, C), indexed [y, x].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pattern import (
    FoveationPattern,
    enumerate_patches,
    pattern_size,
    require_valid,
)


@dataclass(frozen=True)
class Image:
    """8-bit image, (H, W, C) with C in {1, 3}. Treated as immutable."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise ValueError(f"pixels must be (H, W, C) with C in {{1, 3}}, got {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("empty image")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        arr = np.asarray(arr, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(pixels=arr)


@dataclass(frozen=True)
class CropPlacement:
    """Where a crop sits in image coordinates: crop (u, v) is image (x0+u, y0+v)."""

    x0: int
    y0: int
    side: int
    image_width: int
    image_height: int

    def rect_in_image(self, rect: tuple[int, int, int, int]) -> bool:
        """True iff the crop-space rect overlaps the source image at all."""
        x, y, w, h = rect
        ix, iy = x + self.x0, y + self.y0
        return ix < self.image_width and iy < self.image_height and ix + w > 0 and iy + h > 0


class IntegralImage:
    """Summed-area table with exact int64 accumulation.

    rect_sum uses half-open rects [x0, x1) x [y0, y1) and equals the
    brute-force pixel sum exactly.
    """

    def __init__(self, samples: np.ndarray):
        arr = np.asarray(samples)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.size == 0:
            raise ValueError("samples must be non-empty (H, W[, C])")
        h, w, c = arr.shape
        acc = np.zeros((h + 1, w + 1, c), dtype=np.int64)
        acc[1:, 1:] = arr.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
        self.acc = acc
        self.height, self.width, self.channels = h, w, c

    def rect_sum(self, x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
        """Per-channel sum over [x0, x1) x [y0, y1); empty rects give 0."""
        if x1 <= x0 or y1 <= y0:
            return np.zeros(self.channels, dtype=np.int64)
        a = self.acc
        return a[y1, x1] - a[y0, x1] - a[y1, x0] + a[y0, x0]

    def block_sums(self, x0: int, y0: int, stride: int, n: int) -> np.ndarray:
        """(n, n, C) sums of the stride x stride blocks tiling a rect at (x0, y0)."""
        xs = x0 + stride * np.arange(n + 1)
        ys = y0 + stride * np.arange(n + 1)
        sub = self.acc[np.ix_(ys, xs)]
        return sub[1:, 1:] - sub[:-1, 1:] - sub[1:, :-1] + sub[:-1, :-1]


@dataclass(frozen=True)
class TokenTensor:
    """Packed foveated tokens: data is (N, T, T, C) float64 in [0, 1].

    valid[k] is False iff patch k lies entirely outside the source image;
    invalid tokens carry all-zero data.
    """

    pattern: FoveationPattern
    data: np.ndarray
    valid: np.ndarray

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def token_count(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class FoveatedMask:
    """Per-token real-valued label maps: (N, T, T) float64 in [0, 1]."""

    pattern: FoveationPattern
    data: np.ndarray
    valid: np.ndarray


def placement_for_prompt(
    prompt: tuple[int, int], pattern: FoveationPattern, width: int, height: int
) -> CropPlacement:
    x, y = int(prompt[0]), int(prompt[1])
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"prompt outside image: ({x}, {y}) not in {width}x{height}")
    side = pattern_size(pattern)
    return CropPlacement(
        x0=x - side // 2,
        y0=y - side // 2,
        side=side,
        image_width=width,
        image_height=height,
    )


def crop_with_padding(
    image: Image, prompt: tuple[int, int], pattern: FoveationPattern
) -> tuple[Image, CropPlacement]:
    """Extract the prompt-centered crop, zero-padding outside the image."""
    placement = placement_for_prompt(prompt, pattern, image.width, image.height)
    side = placement.side
    crop = np.zeros((side, side, image.channels), dtype=np.uint8)
    ix0 = max(placement.x0, 0)
    iy0 = max(placement.y0, 0)
    ix1 = min(placement.x0 + side, image.width)
    iy1 = min(placement.y0 + side, image.height)
    if ix0 < ix1 and iy0 < iy1:
        crop[iy0 - placement.y0 : iy1 - placement.y0, ix0 - placement.x0 : ix1 - placement.x0] = (
            image.pixels[iy0:iy1, ix0:ix1]
        )
    return Image(pixels=crop), placement


def tokenize(image: Image, prompt: tuple[int, int], pattern: FoveationPattern) -> TokenTensor:
    """Crop, box-filter every patch to patch_size samples, and pack tokens."""
    require_valid(pattern)
    crop, placement = crop_with_padding(image, prompt, pattern)
    integ = IntegralImage(crop.pixels)
    specs = enumerate_patches(pattern)
    t = pattern.patch_size
    data = np.zeros((len(specs), t, t, image.channels), dtype=np.float64)
    valid = np.zeros(len(specs), dtype=bool)
    for k, spec in enumerate(specs):
        if not placement.rect_in_image(spec.rect):
            continue  # fully out of bounds: token stays zero and invalid
        valid[k] = True
        x, y, _, _ = spec.rect
        sums = integ.block_sums(x, y, spec.stride, t)
        data[k] = sums / (spec.stride * spec.stride * 255.0)
    return TokenTensor(pattern=pattern, data=data, valid=valid)


def downsample_mask(
    mask: np.ndarray, prompt: tuple[int, int], pattern: FoveationPattern
) -> FoveatedMask:
    """Map a binary mask into foveated space: each sample is the positive
    fraction of its receptive block. Padding pixels count as negative."""
    require_valid(pattern)
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    positives = (mask != 0).astype(np.uint8)
    h, w = positives.shape
    placement = placement_for_prompt(prompt, pattern, w, h)
    side = placement.side
    crop = np.zeros((side, side), dtype=np.uint8)
    ix0, iy0 = max(placement.x0, 0), max(placement.y0, 0)
    ix1, iy1 = min(placement.x0 + side, w), min(placement.y0 + side, h)
    if ix0 < ix1 and iy0 < iy1:
        crop[iy0 - placement.y0 : iy1 - placement.y0, ix0 - placement.x0 : ix1 - placement.x0] = (
            positives[iy0:iy1, ix0:ix1]
        )
    integ = IntegralImage(crop)
    specs = enumerate_patches(pattern)
    t = pattern.patch_size
    data = np.zeros((len(specs), t, t), dtype=np.float64)
    valid = np.zeros(len(specs), dtype=bool)
    for k, spec in enumerate(specs):
        if not placement.rect_in_image(spec.rect):
            continue
        valid[k] = True
        x, y, _, _ = spec.rect
        sums = integ.block_sums(x, y, spec.stride, t)
        data[k] = sums[:, :, 0] / (spec.stride * spec.stride)
    return FoveatedMask(pattern=pattern, data=data, valid=valid)


def _linear_axis(arr: np.ndarray, n_dst: int, axis: int) -> np.ndarray:
    """Resample one axis with two-tap linear interpolation at pixel centers.

    Identity when sizes match, so stride-1 patches reproject exactly.
    """
    n_src = arr.shape[axis]
    if n_dst == n_src:
        return arr
    centers = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    centers = np.clip(centers, 0.0, n_src - 1.0)
    lo = np.floor(centers).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    w = centers - lo
    shape = [1] * arr.ndim
    shape[axis] = n_dst
    w = w.reshape(shape)
    return np.take(arr, lo, axis=axis) * (1.0 - w) + np.take(arr, hi, axis=axis) * w


def upsample_patch(samples: np.ndarray, stride: int, mode: str = "nearest") -> np.ndarray:
    """Blow a (T, T[, C]) sample grid back up to its (s*T, s*T[, C]) rect."""
    if mode == "nearest":
        return samples.repeat(stride, axis=0).repeat(stride, axis=1)
    if mode == "bilinear":
        t = samples.shape[0]
        out = _linear_axis(samples.astype(np.float64), stride * t, axis=0)
        return _linear_axis(out, stride * t, axis=1)
    raise ValueError(f"unknown mode {mode!r}: expected 'nearest' or 'bilinear'")


def detokenize(tokens: TokenTensor, mode: str = "nearest") -> Image:
    """Reverse tokenization into a side x side image; invalid tokens render 0."""
    side = pattern_size(tokens.pattern)
    canvas = np.zeros((side, side, tokens.channels), dtype=np.float64)
    for k, spec in enumerate(enumerate_patches(tokens.pattern)):
        if not tokens.valid[k]:
            continue
        x, y, w, h = spec.rect
        canvas[y : y + h, x : x + w] = upsample_patch(tokens.data[k], spec.stride, mode)
    pixels = np.rint(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image(pixels=pixels)
