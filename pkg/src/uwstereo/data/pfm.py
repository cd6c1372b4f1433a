"""Portable Float Map codec for single-channel disparity maps."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class PFMError(ValueError):
    pass


class PFMFormatError(PFMError):
    """Header is malformed or describes an unsupported variant."""


class PFMTruncatedError(PFMError):
    """Payload is shorter than the header promises."""


# The scale line ends at exactly one newline; payload bytes may themselves look like whitespace.
_HEADER = re.compile(rb"\A(P[fF])\s*\n\s*(\d+)\s+(\d+)\s*\n\s*([-+0-9.eE]+)[ \t]*\r?\n")


def encode_pfm(values, byteorder: str = "little") -> bytes:
    """Serialize a 2-D map; scale -1.0 marks little-endian, +1.0 big-endian. Rows go bottom-up."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise PFMError(f"expected a 2-D map, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PFMError("map contains non-finite values")
    if byteorder not in ("little", "big"):
        raise ValueError(f"byteorder must be 'little' or 'big', got {byteorder!r}")
    h, w = arr.shape
    scale = "-1.0" if byteorder == "little" else "1.0"
    dtype = "<f4" if byteorder == "little" else ">f4"
    header = f"Pf\n{w} {h}\n{scale}\n".encode("ascii")
    return header + np.flipud(arr).astype(dtype).tobytes()


def decode_pfm(data: bytes) -> np.ndarray:
    m = _HEADER.match(data)
    if m is None:
        raise PFMFormatError("malformed PFM header")
    if m.group(1) == b"PF":
        raise PFMFormatError("3-channel PFM ('PF') is not supported")
    w, h = int(m.group(2)), int(m.group(3))
    try:
        scale = float(m.group(4))
    except ValueError as e:
        raise PFMFormatError(f"bad scale line {m.group(4)!r}") from e
    if scale == 0:
        raise PFMFormatError("scale must be non-zero")
    dtype = "<f4" if scale < 0 else ">f4"
    payload = data[m.end():]
    need = 4 * w * h
    if len(payload) < need:
        raise PFMTruncatedError(f"payload has {len(payload)} bytes, expected {need}")
    arr = np.frombuffer(payload[:need], dtype=dtype).reshape(h, w)
    return np.flipud(arr).astype(np.float32)


def write_pfm(path, values) -> None:
    Path(path).write_bytes(encode_pfm(values))


def read_pfm(path) -> np.ndarray:
    return decode_pfm(Path(path).read_bytes())
