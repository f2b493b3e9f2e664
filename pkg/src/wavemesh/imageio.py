"""Image and dataset ingestion, power-of-two padding, and overlay rendering.

All geometry downstream of padding lives in the padded-square frame.  The
original content is anchored with symmetric margins (the extra pixel goes to
the high side when the margin is odd), so the content rectangle's position is
always derivable from the padded side and the crop size alone.
"""

from __future__ import annotations

import gzip
import io
import math
import struct
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from .errors import FormatError, InvalidInputError

if TYPE_CHECKING:
    from .mesh import SuperpixelMesh

__all__ = [
    "Image",
    "OverlayOptions",
    "load_png_or_pgm",
    "load_label_map",
    "load_idx",
    "load_cifar_batch",
    "pad_image",
    "render_overlay",
]

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049
CIFAR_ROW_BYTES = 3073  # 1 label byte + 3 * 1024 channel-planar bytes


def _next_pow2(n: int) -> int:
    return 1 << max(1, (n - 1).bit_length())


@dataclass(frozen=True)
class Image:
    """Multi-channel intensity grid with padding bookkeeping.

    ``values`` has shape (C, H, W) with intensities in [0, 1]; ``crop`` is the
    original (width, height).  After ``pad_image`` the grid is the padded
    square and ``crop`` still names the embedded content rectangle.
    """

    values: np.ndarray
    crop: tuple[int, int]

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.shape[0] not in (1, 3):
            raise InvalidInputError(f"values must be (C, H, W) with C in {{1, 3}}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("image contains non-finite values")
        w, h = self.crop
        if w < 1 or h < 1:
            raise InvalidInputError(f"crop must be positive, got {self.crop}")
        n = _next_pow2(max(w, h))
        if v.shape[1:] not in ((h, w), (n, n)):
            raise InvalidInputError(
                f"values shape {v.shape[1:]} matches neither the crop {(h, w)} "
                f"nor the padded square {(n, n)}"
            )

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.crop[0]

    @property
    def height(self) -> int:
        return self.crop[1]

    @property
    def padded_side(self) -> int:
        return _next_pow2(max(self.crop))

    @property
    def is_padded(self) -> bool:
        n = self.padded_side
        return self.values.shape[1] == n and self.values.shape[2] == n

    @property
    def offset(self) -> tuple[int, int]:
        """(x, y) of the content rectangle inside the padded square."""
        n = self.padded_side
        return (n - self.crop[0]) // 2, (n - self.crop[1]) // 2

    def content(self) -> np.ndarray:
        """The original (C, height, width) region, padded or not."""
        if not self.is_padded:
            return self.values
        ox, oy = self.offset
        w, h = self.crop
        return self.values[:, oy : oy + h, ox : ox + w]


def pad_image(image: Image, mode: str = "zero") -> Image:
    """Embed the image in the smallest power-of-two square.

    ``zero`` fills margins with 0; ``edge`` replicates border pixels.  Already
    padded images are returned unchanged.
    """
    if mode not in ("zero", "edge"):
        raise InvalidInputError(f"pad mode must be 'zero' or 'edge', got {mode!r}")
    if image.is_padded:
        return image
    n = image.padded_side
    w, h = image.crop
    left = (n - w) // 2
    top = (n - h) // 2
    pad = ((0, 0), (top, n - h - top), (left, n - w - left))
    if mode == "zero":
        values = np.pad(image.values, pad, mode="constant", constant_values=0.0)
    else:
        values = np.pad(image.values, pad, mode="edge")
    return Image(values=values, crop=image.crop)


def _read_bytes(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data[:2] == b"\x1f\x8b":
        try:
            data = gzip.decompress(data)
        except OSError as exc:
            raise FormatError(f"{path}: bad gzip stream ({exc})") from exc
    return data


def _open_pil(path) -> PILImage.Image:
    try:
        img = PILImage.open(path)
        img.load()
    except (OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return img


def load_png_or_pgm(path) -> Image:
    """Load an 8- or 16-bit grayscale/RGB image, scaled by the max sample value."""
    img = _open_pil(path)
    mode = img.mode
    if mode == "L":
        arr = np.asarray(img, dtype=np.float64)[None] / 255.0
    elif mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64)[None] / 65535.0
    elif mode == "RGB":
        arr = np.asarray(img, dtype=np.float64).transpose(2, 0, 1) / 255.0
    else:
        raise FormatError(f"{path}: unsupported image mode {mode!r}")
    h, w = arr.shape[1:]
    return Image(values=arr, crop=(w, h))


def load_label_map(path) -> np.ndarray:
    """Load a grayscale image as an integer segment-id map (no rescaling)."""
    img = _open_pil(path)
    if img.mode == "P":
        img = img.convert("L")
    if img.mode not in ("L", "I;16", "I;16B", "I;16L", "I"):
        raise FormatError(f"{path}: unsupported label-map mode {img.mode!r}")
    return np.asarray(img, dtype=np.int32)


def load_idx(images_path, labels_path, limit: int | None = None) -> list[tuple[Image, int]]:
    """Load big-endian IDX image/label files (gzip accepted transparently)."""
    if limit is not None and limit < 1:
        raise InvalidInputError(f"limit must be >= 1 when given, got {limit}")

    raw = _read_bytes(images_path)
    if len(raw) < 16:
        raise FormatError(f"{images_path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"{images_path}: bad IDX magic {magic}, expected {IDX_IMAGES_MAGIC}")
    if len(raw) != 16 + count * rows * cols:
        raise FormatError(f"{images_path}: size does not match header ({count}x{rows}x{cols})")

    lraw = _read_bytes(labels_path)
    if len(lraw) < 8:
        raise FormatError(f"{labels_path}: truncated IDX header")
    lmagic, lcount = struct.unpack(">II", lraw[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise FormatError(f"{labels_path}: bad IDX magic {lmagic}, expected {IDX_LABELS_MAGIC}")
    if lcount != count or len(lraw) != 8 + lcount:
        raise FormatError(f"{labels_path}: label count does not match {count} images")

    n = count if limit is None else min(limit, count)
    pixels = np.frombuffer(raw, np.uint8, count=n * rows * cols, offset=16)
    pixels = pixels.reshape(n, rows, cols).astype(np.float64) / 255.0
    labels = np.frombuffer(lraw, np.uint8, count=n, offset=8)
    return [
        (Image(values=pixels[i][None], crop=(cols, rows)), int(labels[i])) for i in range(n)
    ]


def load_cifar_batch(path, limit: int | None = None) -> list[tuple[Image, int]]:
    """Load a CIFAR-10 binary batch: rows of 1 label byte + 3072 pixel bytes."""
    if limit is not None and limit < 1:
        raise InvalidInputError(f"limit must be >= 1 when given, got {limit}")
    raw = _read_bytes(path)
    if len(raw) == 0 or len(raw) % CIFAR_ROW_BYTES != 0:
        raise FormatError(f"{path}: size {len(raw)} is not a positive multiple of {CIFAR_ROW_BYTES}")
    count = len(raw) // CIFAR_ROW_BYTES
    n = count if limit is None else min(limit, count)
    rows = np.frombuffer(raw, np.uint8, count=n * CIFAR_ROW_BYTES).reshape(n, CIFAR_ROW_BYTES)
    labels = rows[:, 0]
    pixels = rows[:, 1:].reshape(n, 3, 32, 32).astype(np.float64) / 255.0
    return [(Image(values=pixels[i], crop=(32, 32)), int(labels[i])) for i in range(n)]


@dataclass(frozen=True)
class OverlayOptions:
    boundary_color: tuple[int, int, int] = (255, 0, 0)
    draw_centroids: bool = False
    centroid_color: tuple[int, int, int] = (255, 220, 0)


def render_overlay(image: Image, mesh: "SuperpixelMesh", options: OverlayOptions | None = None) -> bytes:
    """PNG bytes of the content region with 1-pixel cell boundaries drawn in.

    Optionally adds centroid dots whose radius grows with the cell area.
    Deterministic for fixed inputs and options.
    """
    opts = options or OverlayOptions()
    if not image.is_padded:
        raise InvalidInputError("image must be padded before rendering")
    if mesh.side != image.padded_side or mesh.crop_size != image.crop:
        raise InvalidInputError(
            f"mesh (side {mesh.side}, crop {mesh.crop_size}) does not match "
            f"image (side {image.padded_side}, crop {image.crop})"
        )
    ox, oy = image.offset
    w, h = image.crop
    content = image.content()
    rgb = np.round(content * 255.0).astype(np.uint8)
    if rgb.shape[0] == 1:
        rgb = np.repeat(rgb, 3, axis=0)
    canvas = rgb.transpose(1, 2, 0).copy()

    color = np.array(opts.boundary_color, dtype=np.uint8)
    for x0, y0, cw, ch in mesh.clipped_cells():
        x, y = x0 - ox, y0 - oy
        canvas[y, x : x + cw] = color
        canvas[y + ch - 1, x : x + cw] = color
        canvas[y : y + ch, x] = color
        canvas[y : y + ch, x + cw - 1] = color

    pil = PILImage.fromarray(canvas, mode="RGB")
    if opts.draw_centroids:
        draw = ImageDraw.Draw(pil)
        for x0, y0, cw, ch in mesh.clipped_cells():
            cx = x0 - ox + cw / 2.0
            cy = y0 - oy + ch / 2.0
            r = max(1.0, round(math.sqrt(cw * ch) / 4.0))
            draw.ellipse((cx - r, cy - r, cx + r, cy + r), fill=opts.centroid_color)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()
