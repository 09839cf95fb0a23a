"""Scanplot rasterization: fixation sequences become small RGB images.

The temporal gradient runs from blue (0, 0, 1) at the first fixation to
red (1, 0, 0) at the last, interpolated linearly by fixation index.
Geometry is drawn with integer Bresenham lines and hard-edged discs (no
anti-aliasing) so identical inputs yield identical bytes on every
platform. Page coordinates map directly to image coordinates, keeping
each fixation's global page position.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import DocumentLayout, Fixation
from .errors import TooFewFixations

#: Letter-aspect default raster (8.5 : 11).
DEFAULT_WIDTH_PX = 85
DEFAULT_HEIGHT_PX = 110
WORD_BOX_GRAY = 0.5


@dataclass(frozen=True)
class RenderConfig:
    """Raster dimensions and drawing options."""

    width_px: int = DEFAULT_WIDTH_PX
    height_px: int = DEFAULT_HEIGHT_PX
    disc_radius: int = 2
    draw_word_boxes: bool = False

    def __post_init__(self) -> None:
        if self.width_px < 4 or self.height_px < 4:
            raise ValueError("raster must be at least 4x4 px")


@dataclass(frozen=True, eq=False)
class ScanplotImage:
    """A rendered scanplot: float pixels in [0,1], plus provenance."""

    width_px: int
    height_px: int
    pixels: np.ndarray  # (height, width, 3) float64
    provenance: dict = field(default_factory=dict)

    def chw(self) -> np.ndarray:
        """Channel-first view for model input."""
        return np.ascontiguousarray(self.pixels.transpose(2, 0, 1))


def vertex_colors(n: int) -> np.ndarray:
    """Blue-to-red gradient by index: row i is ((i/(n-1)), 0, 1-(i/(n-1)))."""
    if n == 1:
        return np.array([[0.0, 0.0, 1.0]])
    f = np.arange(n, dtype=np.float64) / (n - 1)
    return np.stack([f, np.zeros(n), 1.0 - f], axis=1)


def _to_pixels(
    fixations: Sequence[Fixation], config: RenderConfig
) -> "tuple[np.ndarray, np.ndarray, bool]":
    xs = np.array([f.centroid.x for f in fixations])
    ys = np.array([f.centroid.y for f in fixations])
    clamped = bool(np.any((xs < 0) | (xs > 1) | (ys < 0) | (ys > 1)))
    px = np.clip(np.rint(xs * (config.width_px - 1)).astype(np.int64), 0, config.width_px - 1)
    py = np.clip(np.rint(ys * (config.height_px - 1)).astype(np.int64), 0, config.height_px - 1)
    return px, py, clamped


def render_points(
    xs: np.ndarray, ys: np.ndarray, config: Optional[RenderConfig] = None
) -> np.ndarray:
    """Rasterize a page-coordinate polyline; returns (3, H, W) pixels.

    This is the raw drawing path shared by window rendering and model
    input preparation, so augmented coordinates rasterize exactly like
    unaugmented ones.
    """
    config = config or RenderConfig()
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size < 2 or xs.shape != ys.shape:
        raise TooFewFixations(f"need at least 2 points, got {xs.size}")
    px = np.clip(np.rint(xs * (config.width_px - 1)).astype(np.int64), 0, config.width_px - 1)
    py = np.clip(np.rint(ys * (config.height_px - 1)).astype(np.int64), 0, config.height_px - 1)
    colors = vertex_colors(xs.size)
    return kernels.rasterize_scanpath(
        px, py, colors, config.width_px, config.height_px, config.disc_radius
    )


def render_window(
    fixations: Sequence[Fixation],
    config: Optional[RenderConfig] = None,
    session_id: str = "",
    index_offset: int = 0,
) -> ScanplotImage:
    """Rasterize a fixation window onto a black canvas.

    ``index_offset`` records where this window sits in the session's
    fixation sequence (provenance only; it does not affect pixels).
    """
    config = config or RenderConfig()
    if len(fixations) < 2:
        raise TooFewFixations(f"need at least 2 fixations, got {len(fixations)}")
    xs = np.array([f.centroid.x for f in fixations])
    ys = np.array([f.centroid.y for f in fixations])
    clamped = bool(np.any((xs < 0) | (xs > 1) | (ys < 0) | (ys > 1)))
    chw = render_points(xs, ys, config)
    return ScanplotImage(
        width_px=config.width_px,
        height_px=config.height_px,
        pixels=np.ascontiguousarray(chw.transpose(1, 2, 0)),
        provenance={
            "session_id": session_id,
            "fixation_range": [index_offset, index_offset + len(fixations) - 1],
            "clamped": clamped,
        },
    )


def _draw_word_boxes(
    pixels: np.ndarray, layout: DocumentLayout, page_index: int, config: RenderConfig
) -> None:
    try:
        page = layout.page(page_index)
    except KeyError:
        return
    w, h = config.width_px, config.height_px
    for word in page.words:
        x0 = int(np.clip(round(word.x0 * (w - 1)), 0, w - 1))
        x1 = int(np.clip(round(word.x1 * (w - 1)), 0, w - 1))
        y0 = int(np.clip(round(word.y0 * (h - 1)), 0, h - 1))
        y1 = int(np.clip(round(word.y1 * (h - 1)), 0, h - 1))
        pixels[y0, x0 : x1 + 1, :] = WORD_BOX_GRAY
        pixels[y1, x0 : x1 + 1, :] = WORD_BOX_GRAY
        pixels[y0 : y1 + 1, x0, :] = WORD_BOX_GRAY
        pixels[y0 : y1 + 1, x1, :] = WORD_BOX_GRAY


def render_session(
    fixations: Sequence[Fixation],
    layout: DocumentLayout,
    config: Optional[RenderConfig] = None,
    session_id: str = "",
) -> ScanplotImage:
    """Full-session overlay, optionally over gray word-box outlines."""
    config = config or RenderConfig()
    if len(fixations) < 2:
        raise TooFewFixations(f"need at least 2 fixations, got {len(fixations)}")
    px, py, clamped = _to_pixels(fixations, config)
    colors = vertex_colors(len(fixations))
    chw = kernels.rasterize_scanpath(
        px, py, colors, config.width_px, config.height_px, config.disc_radius
    )
    pixels = np.ascontiguousarray(chw.transpose(1, 2, 0))
    if config.draw_word_boxes and layout.pages:
        background = np.zeros_like(pixels)
        _draw_word_boxes(background, layout, fixations[0].centroid.page_index, config)
        ink = pixels.any(axis=2, keepdims=True)
        pixels = np.where(ink, pixels, background)
    return ScanplotImage(
        width_px=config.width_px,
        height_px=config.height_px,
        pixels=pixels,
        provenance={
            "session_id": session_id,
            "fixation_range": [0, len(fixations) - 1],
            "clamped": clamped,
        },
    )


# ---------------------------------------------------------------------------
# PNG + raw-float export
# ---------------------------------------------------------------------------

def _png_chunk(tag: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + tag
        + data
        + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
    )


def encode_png(pixels: np.ndarray) -> bytes:
    """Encode an (H, W, 3) float image in [0,1] as 8-bit RGB PNG bytes.

    Fixed-level zlib with filter type 0 on every scanline: byte-stable
    output for byte-stable input.
    """
    h, w, _ = pixels.shape
    u8 = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    raw = b"".join(b"\x00" + u8[row].tobytes() for row in range(h))
    out = [b"\x89PNG\r\n\x1a\n"]
    out.append(_png_chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)))
    out.append(_png_chunk(b"IDAT", zlib.compress(raw, 9)))
    out.append(_png_chunk(b"IEND", b""))
    return b"".join(out)


def save_png(image: ScanplotImage, path: "str | Path") -> None:
    Path(path).write_bytes(encode_png(image.pixels))


def save_raw(image: ScanplotImage, path: "str | Path") -> None:
    """Uncompressed float64 sidecar for training pipelines."""
    np.save(path, image.pixels, allow_pickle=False)
