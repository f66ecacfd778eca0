"""Deterministic trace overlays: integer Bresenham segments, no anti-aliasing.

Trace coordinates live on the [0, 255] grid and map to pixels with
``px = round_half_up(u * (width - 1) / 255)`` (identity for 256x256 images).
Consecutive points are joined by width-2 strokes; a single-point trace draws a
filled 5x5 square.  Colors: yellow for single-arm (and left) traces, cyan for
the right arm, right drawn last.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .traces import VisualTrace
from .validation import readonly

YELLOW = (255, 255, 0)
CYAN = (0, 255, 255)

POINT_EDGE = 5  # square drawn for single-point traces


@dataclass(frozen=True)
class RgbImage:
    """An 8-bit RGB image; the pixel buffer is immutable."""

    pixels: np.ndarray  # (height, width, 3) uint8, read-only

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected (h, w, 3) uint8 pixels, got {arr.shape}")
        object.__setattr__(self, "pixels", readonly(arr))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, color=(0, 0, 0)) -> "RgbImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = color
        return cls(pixels=arr)

    @classmethod
    def load(cls, path: str | Path) -> "RgbImage":
        with Image.open(path) as img:
            return cls(pixels=np.asarray(img.convert("RGB"), dtype=np.uint8))

    def save(self, path: str | Path) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")


def _round_half_up_ratio(num: int, den: int) -> int:
    return (2 * num + den) // (2 * den)


def trace_to_pixels(trace: VisualTrace, width: int, height: int) -> list[tuple[int, int]]:
    """Map trace points from the [0, 255] grid to pixel coordinates."""
    return [
        (
            _round_half_up_ratio(u * (width - 1), 255),
            _round_half_up_ratio(v * (height - 1), 255),
        )
        for u, v in trace.points
    ]


def line_pixels(p0: tuple[int, int], p1: tuple[int, int]) -> list[tuple[int, int]]:
    """Integer Bresenham pixels for one segment.

    The segment is canonicalized so the major axis increases, making the
    pixel set independent of endpoint order.
    """
    x0, y0 = p0
    x1, y1 = p1
    x_major = abs(x1 - x0) >= abs(y1 - y0)
    if x_major:
        if x0 > x1:
            x0, y0, x1, y1 = x1, y1, x0, y0
        adx = x1 - x0
        ady = abs(y1 - y0)
        sy = 1 if y1 >= y0 else -1
        p = 2 * ady - adx
        y = y0
        out = []
        for i in range(adx + 1):
            out.append((x0 + i, y))
            if p >= 0:
                y += sy
                p -= 2 * adx
            p += 2 * ady
        return out
    if y0 > y1:
        x0, y0, x1, y1 = x1, y1, x0, y0
    ady = y1 - y0
    adx = abs(x1 - x0)
    sx = 1 if x1 >= x0 else -1
    p = 2 * adx - ady
    x = x0
    out = []
    for i in range(ady + 1):
        out.append((x, y0 + i))
        if p >= 0:
            x += sx
            p -= 2 * ady
        p += 2 * adx
    return out


def stroke_pixels(p0: tuple[int, int], p1: tuple[int, int]) -> set[tuple[int, int]]:
    """Width-2 stroke: each line pixel plus its neighbor perpendicular to the
    segment's major axis."""
    x_major = abs(p1[0] - p0[0]) >= abs(p1[1] - p0[1])
    pixels = set()
    for x, y in line_pixels(p0, p1):
        pixels.add((x, y))
        pixels.add((x, y + 1) if x_major else (x + 1, y))
    return pixels


def trace_pixels(trace: VisualTrace, width: int, height: int) -> set[tuple[int, int]]:
    """All pixels a trace paints on a width x height canvas (clipped)."""
    points = trace_to_pixels(trace, width, height)
    pixels = set()
    if len(points) == 1:
        cx, cy = points[0]
        half = POINT_EDGE // 2
        for x in range(cx - half, cx + half + 1):
            for y in range(cy - half, cy + half + 1):
                pixels.add((x, y))
    else:
        for p0, p1 in zip(points, points[1:]):
            pixels |= stroke_pixels(p0, p1)
    return {(x, y) for x, y in pixels if 0 <= x < width and 0 <= y < height}


def _paint(canvas: np.ndarray, pixels: set[tuple[int, int]], color) -> None:
    for x, y in pixels:
        canvas[y, x] = color


def overlay_trace(img: RgbImage, trace: VisualTrace, color=YELLOW) -> RgbImage:
    """Return a new image with the trace drawn on; the input is unmodified."""
    canvas = img.pixels.copy()
    _paint(canvas, trace_pixels(trace, img.width, img.height), color)
    return RgbImage(pixels=canvas)


def overlay_bimanual(
    img: RgbImage,
    left: VisualTrace,
    right: VisualTrace,
    left_color=YELLOW,
    right_color=CYAN,
) -> RgbImage:
    """Draw the left trace first, then the right; the right color wins on
    overlapping pixels."""
    canvas = img.pixels.copy()
    _paint(canvas, trace_pixels(left, img.width, img.height), left_color)
    _paint(canvas, trace_pixels(right, img.width, img.height), right_color)
    return RgbImage(pixels=canvas)
