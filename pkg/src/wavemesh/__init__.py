"""Content-adaptive multiscale superpixels from wavelet thresholding.

The pipeline: transform each channel with the orthonormal Haar pyramid,
hard-threshold detail coefficients with an iteratively estimated universal
threshold, tag the coefficient quadtree, and split tagged regions into the
adapted superpixel grid.  On top of the grid: region adjacency graphs for
GNN consumption, quadtree-aware pooling, and quality metrics.
"""

from .errors import (
    ConvergenceError,
    FormatError,
    InvalidInputError,
    UnreachableTargetError,
    WaveMeshError,
)
from .filtering import (
    FilterMask,
    Threshold,
    apply_threshold,
    estimate_threshold,
    split_pyramid,
    universal_threshold,
)
from .graph import PoolAssignment, RagGraph, build_rag, wavepool
from .imageio import (
    Image,
    OverlayOptions,
    load_cifar_batch,
    load_idx,
    load_label_map,
    load_png_or_pgm,
    pad_image,
    render_overlay,
)
from .mesh import (
    SuperpixelMesh,
    TagTree,
    build_tag_tree,
    calibrate_multiplier,
    generate_mesh,
    superpixel_image,
    superpixel_pipeline,
)
from .metrics import MeshStats, asa, explained_variation, mesh_stats
from .wavelet import WaveletPyramid, forward_haar, inverse_haar

__version__ = "0.1.0"

__all__ = [
    "WaveMeshError",
    "InvalidInputError",
    "FormatError",
    "ConvergenceError",
    "UnreachableTargetError",
    "WaveletPyramid",
    "forward_haar",
    "inverse_haar",
    "Threshold",
    "FilterMask",
    "universal_threshold",
    "estimate_threshold",
    "apply_threshold",
    "split_pyramid",
    "TagTree",
    "SuperpixelMesh",
    "build_tag_tree",
    "generate_mesh",
    "superpixel_image",
    "superpixel_pipeline",
    "calibrate_multiplier",
    "RagGraph",
    "PoolAssignment",
    "build_rag",
    "wavepool",
    "MeshStats",
    "asa",
    "explained_variation",
    "mesh_stats",
    "Image",
    "OverlayOptions",
    "load_png_or_pgm",
    "load_label_map",
    "load_idx",
    "load_cifar_batch",
    "pad_image",
    "render_overlay",
    "__version__",
]
