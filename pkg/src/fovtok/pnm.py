"""Binary PGM (P5) and PPM (P6) readers and writers, 8-bit only.

Masks are PGM files where any nonzero sample is a positive pixel.
"""

from __future__ import annotations

import numpy as np

from .tokenizer import Image


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments, then read one ASCII token
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated header")
    return data[start:pos], pos


def read_pnm(path) -> Image:
    with open(path, "rb") as f:
        data = f.read()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported format {magic!r}: only binary P5/P6")
    channels = 1 if magic == b"P5" else 3
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError("bad image dimensions")
    if not 0 < maxval < 256:
        raise ValueError(f"maxval {maxval} unsupported: 8-bit samples required")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * channels
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ValueError("truncated raster")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return Image(pixels=pixels.copy())


def write_pnm(image: Image, path) -> None:
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    with open(path, "wb") as f:
        f.write(header)
        f.write(image.pixels.tobytes())


def read_mask(path) -> np.ndarray:
    """Read a PGM mask; nonzero means positive. Returns (H, W) bool."""
    image = read_pnm(path)
    if image.channels != 1:
        raise ValueError("masks must be single-channel PGM")
    return image.pixels[:, :, 0] != 0


def write_mask(mask: np.ndarray, path) -> None:
    pixels = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    write_pnm(Image(pixels=pixels[:, :, None]), path)
