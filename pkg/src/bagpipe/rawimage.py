"""Grayscale raster payloads used by image-processing user logic.

Layout (integers little-endian):

    width  u32
    height u32
    pixels width*height bytes, row-major, one byte per pixel
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

_DIMS = struct.Struct("<II")


@dataclass(frozen=True, slots=True)
class RawImage:
    width: int
    height: int
    pixels: bytes

    def at(self, row: int, col: int) -> int:
        return self.pixels[row * self.width + col]


def encode(image: RawImage) -> bytes:
    if len(image.pixels) != image.width * image.height:
        raise ValueError(
            f"pixel buffer holds {len(image.pixels)} bytes, "
            f"expected {image.width * image.height}"
        )
    return _DIMS.pack(image.width, image.height) + image.pixels


def parse(data: bytes) -> RawImage:
    if len(data) < _DIMS.size:
        raise ValueError("image shorter than its dimension header")
    width, height = _DIMS.unpack_from(data)
    expected = _DIMS.size + width * height
    if len(data) != expected:
        raise ValueError(f"image holds {len(data)} bytes, expected {expected}")
    return RawImage(width, height, data[_DIMS.size :])


def rotate90_cw(image: RawImage) -> RawImage:
    """Rotate clockwise: out[r][c] = in[h-1-c][r], result is h x w."""
    w, h = image.width, image.height
    src = image.pixels
    out = bytearray(w * h)
    for r in range(w):
        base = r * h
        for c in range(h):
            out[base + c] = src[(h - 1 - c) * w + r]
    return RawImage(h, w, bytes(out))
