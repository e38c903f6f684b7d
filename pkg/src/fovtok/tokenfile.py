"""FTOK token container: a fixed 12-byte header plus validity and sample bytes.

Layout, little-endian:

    offset  size  field
    0       4     magic "FTOK"
    4       2     version (u16) = 1
    6       1     patch_size (u8)
    7       1     channels (u8)
    8       4     token_count (u32)
    12      N     validity bytes, 0 or 1 per token
    12+N    N*T*T*C  samples, u8, token-major, row-major, channel-interleaved

Samples are quantized to 8 bits on write (round to nearest); reading maps
them back to [0, 1] as value/255, so read -> write reproduces a file
byte-for-byte.
"""

from __future__ import annotations

import struct
from os import PathLike

import numpy as np

from .pattern import FoveationPattern, token_count
from .tokenizer import TokenTensor

MAGIC = b"FTOK"
VERSION = 1
_HEADER = struct.Struct("<4sHBBI")


class TokenFileError(ValueError):
    """Raised for malformed or mismatched token files."""


def quantize_samples(data: np.ndarray) -> np.ndarray:
    """Map [0, 1] float samples onto the 8-bit wire grid."""
    return np.rint(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_tokens(tokens: TokenTensor, sink) -> None:
    """Write a TokenTensor to a path or binary file object."""
    n = tokens.token_count
    t = tokens.pattern.patch_size
    if t > 255:
        raise TokenFileError(f"patch size {t} exceeds the wire format limit of 255")
    header = _HEADER.pack(MAGIC, VERSION, t, tokens.channels, n)
    payload = quantize_samples(tokens.data)
    payload[~tokens.valid] = 0
    body = tokens.valid.astype(np.uint8).tobytes() + payload.tobytes()
    if isinstance(sink, (str, bytes, PathLike)):
        with open(sink, "wb") as f:
            f.write(header + body)
    else:
        sink.write(header + body)


def read_tokens(source, pattern: FoveationPattern) -> TokenTensor:
    """Read an FTOK file and validate it against the declared pattern."""
    if isinstance(source, (str, bytes, PathLike)):
        with open(source, "rb") as f:
            blob = f.read()
    else:
        blob = source.read()
    if len(blob) < _HEADER.size:
        raise TokenFileError("truncated payload: missing header")
    magic, version, patch_size, channels, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise TokenFileError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TokenFileError(f"version mismatch: got {version}, expected {VERSION}")
    if channels not in (1, 3):
        raise TokenFileError(f"invalid channel count {channels}")
    if patch_size != pattern.patch_size:
        raise TokenFileError(
            f"count mismatch: file patch size {patch_size}, pattern {pattern.patch_size}"
        )
    expected_count = token_count(pattern)
    if count != expected_count:
        raise TokenFileError(
            f"count mismatch: file has {count} tokens, pattern defines {expected_count}"
        )
    t = patch_size
    expected_len = _HEADER.size + count + count * t * t * channels
    if len(blob) != expected_len:
        raise TokenFileError(
            f"truncated payload: {len(blob)} bytes, expected {expected_len}"
        )
    validity = np.frombuffer(blob, dtype=np.uint8, count=count, offset=_HEADER.size)
    if not np.isin(validity, (0, 1)).all():
        raise TokenFileError("validity bytes must be 0 or 1")
    valid = validity.astype(bool)
    samples = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size + count).reshape(
        count, t, t, channels
    )
    data = samples.astype(np.float64) / 255.0
    data[~valid] = 0.0
    return TokenTensor(pattern=pattern, data=data, valid=valid.copy())
