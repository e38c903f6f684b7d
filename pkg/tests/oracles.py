"""Independent reference implementations used to check the library.

Everything here deliberately avoids the code paths under test: block sums
come from reshape-and-sum rather than summed-area tables, expected IoU from
explicit Bernoulli enumeration, and farthest-point selection from an
all-pairs integer-distance scan.
"""

from __future__ import annotations

import itertools

import numpy as np

from fovtok.pattern import FoveationPattern, enumerate_patches, make_pattern, pattern_size
from fovtok.tokenizer import FoveatedMask


def paint_coverage(pattern: FoveationPattern) -> np.ndarray:
    """Paint +1 over every patch rect; exact tiling means all-ones."""
    side = pattern_size(pattern)
    counts = np.zeros((side, side), dtype=np.int32)
    for spec in enumerate_patches(pattern):
        x, y, w, h = spec.rect
        counts[y : y + h, x : x + w] += 1
    return counts


def random_valid_pattern(rng: np.random.Generator, max_side: int = 2048) -> FoveationPattern:
    """Generate a random pattern satisfying the nesting constraints by
    construction: each new stride divides the previous bounding size and the
    new grid is hole + 2 * margin."""
    patch = int(rng.choice([1, 2, 4, 8, 16]))
    levels = [(int(rng.integers(1, 4)), int(rng.integers(1, 7)))]
    for _ in range(int(rng.integers(0, 4))):
        stride, grid = levels[-1]
        bound = stride * grid
        divisors = [d for d in range(stride + 1, bound + 1) if bound % d == 0]
        if not divisors:
            break
        s2 = int(rng.choice(divisors))
        margin = int(rng.integers(1, 4))
        g2 = bound // s2 + 2 * margin
        if s2 * g2 * patch > max_side:
            break
        levels.append((s2, g2))
    return make_pattern(levels, patch)


def brute_block_sums(crop: np.ndarray, x: int, y: int, stride: int, t: int) -> np.ndarray:
    """(t, t, C) integer sums of stride x stride blocks, via reshape."""
    region = crop[y : y + stride * t, x : x + stride * t].astype(np.int64)
    if region.ndim == 2:
        region = region[:, :, None]
    return region.reshape(t, stride, t, stride, -1).sum(axis=(1, 3))


def brute_block_sums_loop(crop: np.ndarray, x: int, y: int, stride: int, t: int) -> np.ndarray:
    """Same as brute_block_sums but with explicit per-block loops."""
    c = 1 if crop.ndim == 2 else crop.shape[2]
    out = np.zeros((t, t, c), dtype=np.int64)
    for a in range(t):
        for b in range(t):
            block = crop[y + a * stride : y + (a + 1) * stride, x + b * stride : x + (b + 1) * stride]
            out[a, b] = block.astype(np.int64).sum(axis=(0, 1)) if block.ndim == 3 else block.astype(np.int64).sum()
    return out


def padded_crop(pixels: np.ndarray, prompt: tuple[int, int], side: int) -> np.ndarray:
    """Zero-padded crop with the prompt at (side // 2, side // 2)."""
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    h, w, c = pixels.shape
    x0, y0 = prompt[0] - side // 2, prompt[1] - side // 2
    out = np.zeros((side, side, c), dtype=pixels.dtype)
    ix0, iy0 = max(x0, 0), max(y0, 0)
    ix1, iy1 = min(x0 + side, w), min(y0 + side, h)
    if ix0 < ix1 and iy0 < iy1:
        out[iy0 - y0 : iy1 - y0, ix0 - x0 : ix1 - x0] = pixels[iy0:iy1, ix0:ix1]
    return out


def bernoulli_expected_iou(p: np.ndarray, q: np.ndarray, w: np.ndarray) -> float:
    """Expected IoU by enumerating every Bernoulli outcome of the target.

    Each sample k is all-positive with probability q[k]; the ratio of the
    expected intersection and expected union is returned.
    """
    n = len(p)
    e_inter = 0.0
    e_union = 0.0
    for bits in itertools.product((0.0, 1.0), repeat=n):
        prob = 1.0
        for qk, b in zip(q, bits):
            prob *= qk if b else 1.0 - qk
        if prob == 0.0:
            continue
        inter = sum(wk * pk * b for wk, pk, b in zip(w, p, bits))
        union = sum(wk * (1.0 - (1.0 - pk) * (1.0 - b)) for wk, pk, b in zip(w, p, bits))
        e_inter += prob * inter
        e_union += prob * union
    if e_union == 0.0:
        return 1.0
    return e_inter / e_union


_SMALL_PATTERNS = [
    make_pattern([(1, 1)], 1),  # 1 sample
    make_pattern([(2, 2)], 1),  # 4 samples, stride 2
    make_pattern([(1, 2)], 1),  # 4 samples
    make_pattern([(1, 2), (2, 3)], 1),  # 12 samples, mixed strides
    make_pattern([(1, 1)], 2),  # 4 samples in one token
]


def random_expected_iou_case(rng: np.random.Generator, max_samples: int = 8):
    """(pred, target, flat p/q/w over valid samples) with few enough samples
    for exact enumeration."""
    pattern = _SMALL_PATTERNS[int(rng.integers(len(_SMALL_PATTERNS)))]
    n = len(enumerate_patches(pattern))
    t = pattern.patch_size
    per_token = t * t
    valid = np.zeros(n, dtype=bool)
    budget = max_samples
    order = rng.permutation(n)
    for k in order:
        if per_token <= budget:
            valid[k] = True
            budget -= per_token
    p = rng.random((n, t, t))
    q = rng.random((n, t, t))
    corner_p = rng.random((n, t, t)) < 0.25  # hit exact 0/1 values too
    corner_q = rng.random((n, t, t)) < 0.25
    p[corner_p] = np.round(p[corner_p])
    q[corner_q] = np.round(q[corner_q])
    p[~valid] = 0.0
    q[~valid] = 0.0
    pred = FoveatedMask(pattern=pattern, data=p, valid=valid)
    target = FoveatedMask(pattern=pattern, data=q, valid=valid)
    strides = np.array([s.stride for s in enumerate_patches(pattern)], dtype=np.float64)
    w = np.repeat(strides**2, per_token).reshape(n, t, t)
    return pred, target, p[valid].ravel(), q[valid].ravel(), w[valid].ravel()


def brute_farthest_point(mask: np.ndarray) -> tuple[int, int]:
    """All-pairs argmax of squared distance to the nearest non-positive pixel
    or the border; ties resolve to the smallest (y, x). Returns (x, y)."""
    mask = np.asarray(mask) != 0
    h, w = mask.shape
    pos = np.argwhere(mask)
    neg = np.argwhere(~mask)
    best = None
    best_d2 = -1
    for y, x in pos:
        d_border = min(x + 1, y + 1, w - x, h - y)
        d2 = d_border * d_border
        if len(neg):
            d2 = min(d2, int(((neg[:, 0] - y) ** 2 + (neg[:, 1] - x) ** 2).min()))
        if d2 > best_d2:
            best_d2 = d2
            best = (int(x), int(y))
    return best


def random_blob(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Union of a few random discs; always non-empty."""
    mask = np.zeros((h, w), dtype=bool)
    yy, xx = np.ogrid[:h, :w]
    for _ in range(int(rng.integers(1, 4))):
        cy = int(rng.integers(0, h))
        cx = int(rng.integers(0, w))
        r = int(rng.integers(1, max(2, min(h, w) // 3)))
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return mask


def disc_mask(h: int, w: int, cx: int, cy: int, r: int) -> np.ndarray:
    yy, xx = np.ogrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
