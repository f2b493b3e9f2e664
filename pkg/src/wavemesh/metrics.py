"""Superpixel quality metrics and dataset-level mesh statistics.

ASA scores how well a labeling of whole superpixels could reproduce a ground
truth segmentation; EV is the fraction of image variance captured by the
superpixel means.  Both are evaluated over the crop rectangle (the true image
region) and treat color channels jointly by summing squared deviations.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .imageio import Image
from .mesh import SuperpixelMesh

__all__ = ["MeshStats", "asa", "explained_variation", "mesh_stats"]


def asa(mesh: SuperpixelMesh, gt) -> float:
    """Achievable segmentation accuracy of the mesh against integer gt labels."""
    gt = np.asarray(gt)
    if gt.ndim != 2:
        raise InvalidInputError(f"ground truth must be 2D, got shape {gt.shape}")
    if not np.issubdtype(gt.dtype, np.integer):
        raise InvalidInputError(f"ground truth labels must be integers, got dtype {gt.dtype}")
    w, h = mesh.crop_size
    if gt.shape != (h, w):
        raise InvalidInputError(f"ground truth shape {gt.shape} does not match mesh crop {(h, w)}")
    if gt.min() < 0:
        raise InvalidInputError("ground truth labels must be non-negative")

    labels = mesh.label_map()
    nseg = int(gt.max()) + 1
    combined = labels.astype(np.int64).ravel() * nseg + gt.astype(np.int64).ravel()
    counts = np.bincount(combined, minlength=mesh.cell_count * nseg).reshape(mesh.cell_count, nseg)
    return float(counts.max(axis=1).sum() / labels.size)


def explained_variation(mesh: SuperpixelMesh, image: Image) -> float:
    """Between-superpixel variance over total variance; 1.0 for constant images."""
    if not image.is_padded:
        raise InvalidInputError("image must be padded to the mesh grid")
    if mesh.side != image.padded_side or mesh.crop_size != image.crop:
        raise InvalidInputError(
            f"mesh (side {mesh.side}, crop {mesh.crop_size}) does not match "
            f"image (side {image.padded_side}, crop {image.crop})"
        )
    content = image.content()  # (C, h, w)
    mu = content.mean(axis=(1, 2))
    denom = float(((content - mu[:, None, None]) ** 2).sum())
    if denom == 0.0:
        return 1.0

    labels = mesh.label_map()
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=mesh.cell_count).astype(np.float64)
    numer = 0.0
    for c in range(image.channels):
        sums = np.bincount(flat, weights=content[c].ravel(), minlength=mesh.cell_count)
        means = sums / areas
        numer += float(areas @ (means - mu[c]) ** 2)
    return numer / denom


@dataclass(frozen=True)
class MeshStats:
    """Cell-count statistics and an area histogram over a collection of meshes."""

    per_image_counts: tuple[int, ...]
    count_mean: float
    count_std: float  # population std
    area_histogram: dict[int, int]
    clipped_cells: int

    def to_json_obj(self) -> dict:
        return {
            "count_mean": self.count_mean,
            "count_std": self.count_std,
            "per_image_counts": list(self.per_image_counts),
            "area_histogram": {str(k): v for k, v in sorted(self.area_histogram.items())},
            "clipped_cells": self.clipped_cells,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())


def mesh_stats(meshes) -> MeshStats:
    """Aggregate counts and the cell-area histogram; crop-clipped cells are
    tallied separately since their areas are not powers of two."""
    meshes = list(meshes)
    if not meshes:
        raise InvalidInputError("at least one mesh is required")
    counts = np.array([m.cell_count for m in meshes], dtype=np.int64)
    hist: Counter[int] = Counter()
    clipped = 0
    for mesh in meshes:
        rects = mesh.clipped_cells()
        if len(rects) != mesh.cell_count:
            raise InvalidInputError("mesh contains cells entirely outside its crop")
        for (x, y, size), (_, _, w, h) in zip(mesh.cells, rects):
            if w == size and h == size:
                hist[size * size] += 1
            else:
                clipped += 1
    return MeshStats(
        per_image_counts=tuple(int(c) for c in counts),
        count_mean=float(counts.mean()),
        count_std=float(counts.std()),
        area_histogram=dict(hist),
        clipped_cells=clipped,
    )
