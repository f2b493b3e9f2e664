"""Tagged quadtrees over filter masks and the adapted superpixel grid.

A node of the tag tree at scale s covers a 2^s x 2^s pixel block; a tagged
node splits its block into four quadrants during mesh generation, so the
leaves of the refinement are the superpixels.  Tags are unioned across
channels and directions, then closed upward so every ancestor of a tagged
node is tagged too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, UnreachableTargetError
from .filtering import FilterMask, Threshold, apply_threshold, estimate_threshold
from .imageio import Image
from .wavelet import WaveletPyramid, _is_pow2, forward_haar

__all__ = [
    "TagTree",
    "SuperpixelMesh",
    "build_tag_tree",
    "generate_mesh",
    "superpixel_image",
    "superpixel_pipeline",
    "calibrate_multiplier",
]


@dataclass(frozen=True)
class TagTree:
    """Boolean refinement tags per scale; levels[s-1] has shape (N/2^s, N/2^s)."""

    side: int
    levels: tuple[np.ndarray, ...]

    @property
    def height(self) -> int:
        return len(self.levels)

    def validate(self) -> None:
        if self.side < 2 or not _is_pow2(self.side):
            raise InvalidInputError(f"tree side must be a power of two >= 2, got {self.side}")
        if self.height != self.side.bit_length() - 1:
            raise InvalidInputError(
                f"tree height {self.height} does not match side {self.side}"
            )
        for s, lvl in enumerate(self.levels, start=1):
            n = self.side >> s
            if lvl.shape != (n, n):
                raise InvalidInputError(
                    f"tag level at scale {s} has shape {lvl.shape}, expected {(n, n)}"
                )
        for s in range(self.height - 1):
            lv = self.levels[s]
            up = lv[0::2, 0::2] | lv[0::2, 1::2] | lv[1::2, 0::2] | lv[1::2, 1::2]
            if np.any(up & ~self.levels[s + 1]):
                raise InvalidInputError(f"ancestor closure violated between scales {s + 1} and {s + 2}")


@dataclass(frozen=True)
class SuperpixelMesh:
    """Axis-aligned tiling by power-of-two cells, row-major by (y, x) origin.

    ``crop``, when set, is the (width, height) of the embedded content
    rectangle; cells entirely outside it are dropped at construction and the
    remaining ones are interpreted through their intersection with it.
    """

    side: int
    cells: tuple[tuple[int, int, int], ...]
    crop: tuple[int, int] | None = None

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    @property
    def crop_size(self) -> tuple[int, int]:
        return self.crop if self.crop is not None else (self.side, self.side)

    @property
    def crop_origin(self) -> tuple[int, int]:
        w, h = self.crop_size
        return (self.side - w) // 2, (self.side - h) // 2

    def clipped_cells(self) -> list[tuple[int, int, int, int]]:
        """Cells intersected with the crop rectangle, as (x0, y0, w, h) rects."""
        ox, oy = self.crop_origin
        w, h = self.crop_size
        out = []
        for x, y, size in self.cells:
            x0 = max(x, ox)
            y0 = max(y, oy)
            x1 = min(x + size, ox + w)
            y1 = min(y + size, oy + h)
            if x1 > x0 and y1 > y0:
                out.append((x0, y0, x1 - x0, y1 - y0))
        return out

    def label_map(self) -> np.ndarray:
        """Per-pixel cell ids over the crop rectangle (crop-local coordinates)."""
        w, h = self.crop_size
        ox, oy = self.crop_origin
        labels = np.full((h, w), -1, dtype=np.int32)
        for idx, (x, y, size) in enumerate(self.cells):
            x0 = max(x, ox) - ox
            y0 = max(y, oy) - oy
            x1 = min(x + size, ox + w) - ox
            y1 = min(y + size, oy + h) - oy
            if x1 > x0 and y1 > y0:
                labels[y0:y1, x0:x1] = idx
        if (labels < 0).any():
            raise InvalidInputError("mesh cells do not cover the crop rectangle")
        return labels

    def to_json_obj(self) -> dict:
        return {
            "side": self.side,
            "crop": list(self.crop) if self.crop is not None else None,
            "cells": [list(c) for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @staticmethod
    def from_json(text: str) -> "SuperpixelMesh":
        try:
            obj = json.loads(text)
            side = int(obj["side"])
            crop = obj["crop"]
            cells = [(int(x), int(y), int(s)) for x, y, s in obj["cells"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed mesh JSON: {exc}") from exc
        if crop is not None:
            crop = (int(crop[0]), int(crop[1]))
        mesh = SuperpixelMesh(side=side, cells=tuple(sorted(cells, key=lambda c: (c[1], c[0]))), crop=crop)
        mesh.validate()
        return mesh

    def validate(self) -> None:
        if self.side < 1 or not _is_pow2(self.side):
            raise InvalidInputError(f"mesh side must be a power of two, got {self.side}")
        if self.crop is not None:
            w, h = self.crop
            if not (1 <= w <= self.side and 1 <= h <= self.side):
                raise InvalidInputError(f"crop {self.crop} does not fit side {self.side}")
        for x, y, size in self.cells:
            if size < 1 or not _is_pow2(size) or size > self.side:
                raise InvalidInputError(f"cell size {size} invalid for side {self.side}")
            if x % size or y % size or x < 0 or y < 0 or x + size > self.side or y + size > self.side:
                raise InvalidInputError(f"cell {(x, y, size)} is not size-aligned inside the grid")


def build_tag_tree(masks: Sequence[FilterMask]) -> TagTree:
    """Union channel masks across directions, then close tags toward the root."""
    if not masks:
        raise InvalidInputError("at least one filter mask is required")
    first = masks[0]
    for other in masks[1:]:
        if not first.congruent_with(other):
            raise InvalidInputError("filter masks have mismatched shapes")
    if not first.levels:
        raise InvalidInputError("filter mask has no levels")

    levels = [np.zeros(lvl.shape[1:], dtype=bool) for lvl in first.levels]
    for mask in masks:
        for s, lvl in enumerate(mask.levels):
            levels[s] |= lvl.any(axis=0)
    for s in range(len(levels) - 1):
        lv = levels[s]
        levels[s + 1] |= lv[0::2, 0::2] | lv[0::2, 1::2] | lv[1::2, 0::2] | lv[1::2, 1::2]

    side = 2 * first.levels[0].shape[1]
    tree = TagTree(side=side, levels=tuple(levels))
    tree.validate()
    return tree


def generate_mesh(tree: TagTree, side: int) -> SuperpixelMesh:
    """Recursively split tagged regions from the root down into the adapted grid."""
    if side != tree.side:
        raise InvalidInputError(f"side {side} does not match tree side {tree.side}")
    tree.validate()

    cells: list[tuple[int, int, int]] = []

    def descend(x: int, y: int, scale: int) -> None:
        if tree.levels[scale - 1][y >> scale, x >> scale]:
            half = 1 << (scale - 1)
            if scale == 1:
                cells.extend(((x, y, 1), (x + 1, y, 1), (x, y + 1, 1), (x + 1, y + 1, 1)))
            else:
                descend(x, y, scale - 1)
                descend(x + half, y, scale - 1)
                descend(x, y + half, scale - 1)
                descend(x + half, y + half, scale - 1)
        else:
            cells.append((x, y, 1 << scale))

    descend(0, 0, tree.height)
    cells.sort(key=lambda c: (c[1], c[0]))
    return SuperpixelMesh(side=side, cells=tuple(cells), crop=None)


def _attach_crop(mesh: SuperpixelMesh, crop: tuple[int, int]) -> SuperpixelMesh:
    w, h = crop
    if (w, h) == (mesh.side, mesh.side):
        return mesh
    ox, oy = (mesh.side - w) // 2, (mesh.side - h) // 2
    kept = tuple(
        (x, y, size)
        for x, y, size in mesh.cells
        if x < ox + w and x + size > ox and y < oy + h and y + size > oy
    )
    return SuperpixelMesh(side=mesh.side, cells=kept, crop=(w, h))


def superpixel_pipeline(
    image: Image, multiplier: float = 1.0
) -> tuple[SuperpixelMesh, list[Threshold]]:
    """Full per-image pipeline; also returns the per-channel thresholds."""
    if multiplier < 0:
        raise InvalidInputError(f"multiplier must be >= 0, got {multiplier}")
    if not image.is_padded:
        raise InvalidInputError("image must be padded to a square power-of-two grid first")
    masks = []
    thresholds = []
    for channel in image.values:
        pyramid = forward_haar(channel)
        t = estimate_threshold(pyramid).scaled(multiplier)
        masks.append(apply_threshold(pyramid, t))
        thresholds.append(t)
    mesh = generate_mesh(build_tag_tree(masks), image.padded_side)
    return _attach_crop(mesh, image.crop), thresholds


def superpixel_image(image: Image, multiplier: float = 1.0) -> SuperpixelMesh:
    """Adapted superpixel mesh for a padded image at the given threshold multiplier."""
    mesh, _ = superpixel_pipeline(image, multiplier)
    return mesh


def _prepare(images: Iterable[Image]) -> list[tuple[int, tuple[int, int], list[tuple[WaveletPyramid, Threshold]]]]:
    prepared = []
    for image in images:
        if not image.is_padded:
            raise InvalidInputError("images must be padded before calibration")
        chans = []
        for channel in image.values:
            pyramid = forward_haar(channel)
            chans.append((pyramid, estimate_threshold(pyramid)))
        prepared.append((image.padded_side, image.crop, chans))
    return prepared


def calibrate_multiplier(
    images: Sequence[Image],
    target_mean_count: float,
    iters: int = 20,
    tolerance: float = 0.05,
) -> float:
    """Bisect the threshold multiplier so the mean cell count approaches a target.

    The mean count is non-increasing in the multiplier, so bisection on
    [1, hi] is sound once doubling has found an upper bracket.  Returns the
    first iterate within ``tolerance`` of the target, or the best iterate
    after ``iters`` bisection steps.  Multipliers below 1 are not considered;
    a target above the count at multiplier 1 is an error.
    """
    if not images:
        raise InvalidInputError("at least one image is required")
    if target_mean_count < 1:
        raise InvalidInputError(f"target mean count must be >= 1, got {target_mean_count}")
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")

    prepared = _prepare(images)

    def mean_count(multiplier: float) -> float:
        counts = []
        for side, crop, chans in prepared:
            masks = [apply_threshold(pyr, t.scaled(multiplier)) for pyr, t in chans]
            mesh = _attach_crop(generate_mesh(build_tag_tree(masks), side), crop)
            counts.append(mesh.cell_count)
        return float(np.mean(counts))

    base = mean_count(1.0)
    if abs(base - target_mean_count) <= tolerance * target_mean_count:
        return 1.0
    if base < target_mean_count:
        raise UnreachableTargetError(
            f"mean count {base:.1f} at multiplier 1 is already below target {target_mean_count}"
        )

    lo, hi = 1.0, 2.0
    while True:
        c_hi = mean_count(hi)
        if abs(c_hi - target_mean_count) <= tolerance * target_mean_count:
            return hi
        if c_hi <= target_mean_count:
            break
        lo, hi = hi, hi * 2.0
        if hi > 2.0**24:  # count floor (fully merged meshes) still above target
            break

    best_err, best = abs(c_hi - target_mean_count), hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        c_mid = mean_count(mid)
        err = abs(c_mid - target_mean_count)
        if err < best_err:
            best_err, best = err, mid
        if err <= tolerance * target_mean_count:
            return mid
        if c_mid > target_mean_count:
            lo = mid
        else:
            hi = mid
    return best
