"""Shared helpers: synthetic inputs, dataset discovery, and file writers.

Real datasets are looked up under $WAVEMESH_DATA (default: <repo>/data) with
the layout described in the README; tests that need them skip when absent.
"""

import io
import os
from pathlib import Path

import numpy as np
import pytest
from PIL import Image as PILImage

from wavemesh import Image, pad_image

DATA_ROOT = Path(os.environ.get("WAVEMESH_DATA", Path(__file__).resolve().parent.parent / "data"))


def _first_existing(*candidates):
    for c in candidates:
        if c.exists():
            return c
    return None


def mnist_paths(root=None):
    base = Path(root) if root else DATA_ROOT / "mnist"
    images = _first_existing(base / "train-images-idx3-ubyte", base / "train-images-idx3-ubyte.gz")
    labels = _first_existing(base / "train-labels-idx1-ubyte", base / "train-labels-idx1-ubyte.gz")
    return (images, labels) if images and labels else None


def fashion_mnist_paths():
    return mnist_paths(DATA_ROOT / "fashion-mnist")


def cifar10_path():
    return _first_existing(
        DATA_ROOT / "cifar-10-batches-bin" / "data_batch_1.bin",
        DATA_ROOT / "cifar10" / "data_batch_1.bin",
    )


def bsd300_pairs(min_count=20):
    images = sorted((DATA_ROOT / "bsd300" / "images").glob("*.png"))
    gts = sorted((DATA_ROOT / "bsd300" / "groundtruth").glob("*.png"))
    if len(images) >= min_count and len(images) == len(gts):
        return list(zip(images, gts))
    return None


def skip_unless(resource, name):
    if resource is None:
        pytest.skip(
            f"{name} not found under {DATA_ROOT} (set WAVEMESH_DATA; see README data layout)"
        )
    return resource


def structured_channel(side, seed, noise=0.08):
    """Piecewise-constant blocks plus noise: multiscale structure with a noise floor."""
    rng = np.random.default_rng(seed)
    img = np.full((side, side), 0.3)
    img[: side // 2, :] = 0.6
    x0, y0 = rng.integers(0, side // 2, size=2)
    w = max(2, side // 4)
    img[y0 : y0 + w, x0 : x0 + w] = 0.95
    x1, y1 = rng.integers(side // 2, max(side // 2 + 1, side - 2), size=2)
    img[y1:, x1:] = 0.05
    img += rng.normal(0.0, noise, (side, side))
    return img.clip(0.0, 1.0)


def structured_image(side, seed, channels=1, noise=0.08):
    values = np.stack([structured_channel(side, seed + 101 * c, noise) for c in range(channels)])
    return Image(values=values, crop=(side, side))


def digit_like_image(seed):
    """28x28 stroke pattern on zero background, zero-padded to 32."""
    rng = np.random.default_rng(seed)
    img = np.zeros((28, 28))
    r0, c0 = rng.integers(3, 10, size=2)
    length = rng.integers(12, 20)
    thick = rng.integers(2, 4)
    for i in range(length):
        r = min(27, r0 + i)
        c = min(27 - thick, c0 + (i // 2))
        img[r, c : c + thick] = rng.uniform(0.6, 1.0)
    img[r0 : r0 + thick, c0 : c0 + length // 2] = rng.uniform(0.6, 1.0)
    return pad_image(Image(values=img[None], crop=(28, 28)), "zero")


def write_png(path, array):
    """Save a (H, W) or (H, W, 3) float [0,1] array as an 8-bit PNG."""
    arr = np.round(np.asarray(array) * 255.0).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    PILImage.fromarray(arr, mode=mode).save(path, format="PNG")


def png_bytes(array):
    arr = np.round(np.asarray(array) * 255.0).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()
