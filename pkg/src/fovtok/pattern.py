"""Foveation pattern geometry: nested rings of variable-resolution patches.

A pattern is an ordered list of levels. Level ``i`` lays out a ``grid x grid``
array of square patches whose side is ``stride * patch_size`` pixels; the
stride is the downsampling factor, so every patch resamples to the same
``patch_size x patch_size`` sample grid. Level 0 forms a dense block at the
center and each later level surrounds the previous one with a ring of coarser
patches. Patches whose area is already covered by an inner level are dropped,
so the kept patches tile the crop square exactly once.

Coordinates are (x, y) with x = column, y = row, origin at the crop's
top-left corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

DEFAULT_PATCH_SIZE = 16


class PatternError(ValueError):
    """Raised for malformed or constraint-violating patterns."""


@dataclass(frozen=True)
class FoveationLevel:
    stride: int
    grid: int

    @property
    def bound(self) -> int:
        """Side of this level's bounding box, in units of patch_size pixels."""
        return self.stride * self.grid


@dataclass(frozen=True)
class FoveationPattern:
    levels: tuple[FoveationLevel, ...]
    patch_size: int = DEFAULT_PATCH_SIZE

    @property
    def side(self) -> int:
        """Crop side in pixels: outermost bound times the patch size."""
        return self.levels[-1].bound * self.patch_size


@dataclass(frozen=True)
class PatchSpec:
    level: int
    stride: int
    rect: tuple[int, int, int, int]  # (x, y, w, h) in crop pixels, w == h


def make_pattern(levels, patch_size: int = DEFAULT_PATCH_SIZE) -> FoveationPattern:
    """Build a pattern from (stride, grid) pairs. Does not validate."""
    return FoveationPattern(
        levels=tuple(FoveationLevel(int(s), int(g)) for s, g in levels),
        patch_size=int(patch_size),
    )


def default_pattern() -> FoveationPattern:
    """The library's reference five-level pattern: 172 tokens, 1280 px side."""
    return make_pattern([(1, 4), (2, 4), (4, 6), (6, 8), (8, 10)])


def validate(pattern: FoveationPattern) -> list[str]:
    """Check all nesting constraints; returns a list of violations (empty = ok).

    Constraints between successive levels i-1 and i:
      * strides strictly increase,
      * bounding sizes strictly increase,
      * centering: the bounding-size difference is an even multiple of the
        outer stride, so the inner grid can be centered on a patch boundary,
      * hole: the outer stride divides the inner bounding size, so the
        covered interior is a whole number of outer patches.
    """
    if not pattern.levels:
        raise PatternError("levels must be non-empty")
    if pattern.patch_size < 1:
        return [f"patch_size {pattern.patch_size} must be >= 1"]
    violations = []
    for i, lvl in enumerate(pattern.levels):
        if lvl.stride < 1:
            violations.append(f"level {i}: stride {lvl.stride} must be >= 1")
        if lvl.grid < 1:
            violations.append(f"level {i}: grid {lvl.grid} must be >= 1")
    if violations:
        return violations
    for i in range(1, len(pattern.levels)):
        prev, cur = pattern.levels[i - 1], pattern.levels[i]
        if cur.stride <= prev.stride:
            violations.append(
                f"level {i}: stride order: stride {cur.stride} does not exceed "
                f"previous stride {prev.stride}"
            )
        if cur.bound <= prev.bound:
            violations.append(
                f"level {i}: bounding size: {cur.bound} does not exceed "
                f"previous bounding size {prev.bound}"
            )
        diff = cur.bound - prev.bound
        if diff % (2 * cur.stride) != 0:
            violations.append(
                f"level {i}: centering divisibility: bounding-size difference "
                f"{diff} is not an even multiple of stride {cur.stride}"
            )
        if prev.bound % cur.stride != 0:
            violations.append(
                f"level {i}: hole divisibility: stride {cur.stride} does not "
                f"divide previous bounding size {prev.bound}"
            )
    return violations


def require_valid(pattern: FoveationPattern) -> None:
    violations = validate(pattern)
    if violations:
        raise PatternError("invalid pattern: " + "; ".join(violations))


@lru_cache(maxsize=64)
def enumerate_patches(pattern: FoveationPattern) -> tuple[PatchSpec, ...]:
    """All kept patches, ordered by level ascending then row-major.

    Level 0 contributes its full grid; each later level contributes only the
    ring outside the previous level's bounding box.
    """
    require_valid(pattern)
    p = pattern.patch_size
    side = pattern.side
    patches: list[PatchSpec] = []
    for i, lvl in enumerate(pattern.levels):
        cell = lvl.stride * p
        offset = (side - lvl.bound * p) // 2
        if i == 0:
            hole_lo, hole_hi = 0, 0  # no hole: keep everything
        else:
            hole = pattern.levels[i - 1].bound // lvl.stride
            margin = (lvl.grid - hole) // 2
            hole_lo, hole_hi = margin, margin + hole
        for row in range(lvl.grid):
            for col in range(lvl.grid):
                if i > 0 and hole_lo <= row < hole_hi and hole_lo <= col < hole_hi:
                    continue
                rect = (offset + col * cell, offset + row * cell, cell, cell)
                patches.append(PatchSpec(level=i, stride=lvl.stride, rect=rect))
    return tuple(patches)


def token_count(pattern: FoveationPattern) -> int:
    """Closed-form kept-token count: grid totals minus interior redundancy."""
    require_valid(pattern)
    total = sum(lvl.grid**2 for lvl in pattern.levels)
    for i in range(1, len(pattern.levels)):
        total -= (pattern.levels[i - 1].bound // pattern.levels[i].stride) ** 2
    return total


def kept_counts(pattern: FoveationPattern) -> tuple[int, ...]:
    """Per-level kept-token counts."""
    require_valid(pattern)
    counts = [pattern.levels[0].grid ** 2]
    for i in range(1, len(pattern.levels)):
        hole = pattern.levels[i - 1].bound // pattern.levels[i].stride
        counts.append(pattern.levels[i].grid ** 2 - hole**2)
    return tuple(counts)


def pattern_size(pattern: FoveationPattern) -> int:
    """Crop side length in pixels."""
    require_valid(pattern)
    return pattern.side


def pixel_count(pattern: FoveationPattern) -> int:
    """Samples actually transmitted: kept tokens times patch_size squared."""
    return token_count(pattern) * pattern.patch_size**2


def token_strides(pattern: FoveationPattern) -> tuple[int, ...]:
    """Per-token stride, in enumeration order."""
    return tuple(spec.stride for spec in enumerate_patches(pattern))


def half_extents(pattern: FoveationPattern) -> tuple[float, ...]:
    """Half-side of each level's bounding box in pixels, innermost first."""
    require_valid(pattern)
    return tuple(lvl.bound * pattern.patch_size / 2 for lvl in pattern.levels)


def stride_at(pattern: FoveationPattern, d: float) -> tuple[int, int]:
    """Input and output stride at distance ``d`` (pixels from center, on-axis).

    The output stride equals the input stride: the decoder emits a
    patch_size x patch_size label map per token, matching input resolution.
    """
    require_valid(pattern)
    if d < 0 or 2 * d >= pattern.side:
        raise PatternError(f"distance {d} outside pattern (half side {pattern.side / 2})")
    for lvl in pattern.levels:
        if lvl.bound * pattern.patch_size > 2 * d:
            return (lvl.stride, lvl.stride)
    raise AssertionError("unreachable: outermost level covers the whole crop")


_TOP_KEYS = {"patch_size", "levels"}
_LEVEL_KEYS = {"stride", "grid"}


def _as_positive_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise PatternError(f"{what} must be an integer, got {value!r}")
    if value < 1:
        raise PatternError(f"{what} must be >= 1, got {value}")
    return value


def parse_pattern(text: str) -> FoveationPattern:
    """Parse a JSON pattern config. Unknown keys are rejected."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise PatternError(f"malformed pattern config: {e}") from None
    if not isinstance(obj, dict):
        raise PatternError("pattern config must be a JSON object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise PatternError(f"unknown keys in pattern config: {sorted(unknown)}")
    if "levels" not in obj:
        raise PatternError("pattern config missing 'levels'")
    raw_levels = obj["levels"]
    if not isinstance(raw_levels, list) or not raw_levels:
        raise PatternError("empty levels")
    patch_size = _as_positive_int(obj.get("patch_size", DEFAULT_PATCH_SIZE), "patch_size")
    levels = []
    for n, entry in enumerate(raw_levels):
        if not isinstance(entry, dict):
            raise PatternError(f"level {n} must be an object")
        unknown = set(entry) - _LEVEL_KEYS
        if unknown:
            raise PatternError(f"unknown keys in level {n}: {sorted(unknown)}")
        if "stride" not in entry or "grid" not in entry:
            raise PatternError(f"level {n} must have 'stride' and 'grid'")
        levels.append(
            FoveationLevel(
                stride=_as_positive_int(entry["stride"], f"level {n} stride"),
                grid=_as_positive_int(entry["grid"], f"level {n} grid"),
            )
        )
    pattern = FoveationPattern(levels=tuple(levels), patch_size=patch_size)
    require_valid(pattern)
    return pattern


def serialize_pattern(pattern: FoveationPattern) -> str:
    """Config text for a pattern; parse_pattern inverts this exactly."""
    obj = {
        "patch_size": pattern.patch_size,
        "levels": [{"stride": lvl.stride, "grid": lvl.grid} for lvl in pattern.levels],
    }
    return json.dumps(obj, indent=2) + "\n"
