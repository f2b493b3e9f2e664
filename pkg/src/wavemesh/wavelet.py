"""Orthonormal 2D Haar multiresolution transform.

Coefficient convention (stable; serialized artifacts and all downstream
modules rely on it):

* pixel values are divided by the side length N before the first analysis
  step, so the sum of squared coefficients equals the mean of the squared
  pixels and the final approximation coefficient equals the global pixel mean;
* one analysis step maps each 2x2 block ``(a b / c d)`` of the running
  approximation grid to::

      approx    = (a + b + c + d) / 2
      detail[0] = (a - b + c - d) / 2     horizontal (differences across x)
      detail[1] = (a + b - c - d) / 2     vertical   (differences across y)
      detail[2] = (a - b - c + d) / 2     diagonal

* detail grids are stored per scale s = 1..S as float64 arrays of shape
  ``(3, N >> s, N >> s)``, finest scale first, indexed ``[row, col]``; the
  grid entry (i, j) at scale s covers the pixel block
  ``rows [i * 2**s, (i+1) * 2**s), cols [j * 2**s, (j+1) * 2**s)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["WaveletPyramid", "forward_haar", "inverse_haar"]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class WaveletPyramid:
    """Detail coefficients per scale and direction plus one approximation value."""

    side: int
    details: tuple[np.ndarray, ...]
    approx: float

    @property
    def levels(self) -> int:
        return len(self.details)

    def detail_vector(self) -> np.ndarray:
        """All detail coefficients as one flat array, finest scale first."""
        return np.concatenate([lvl.ravel() for lvl in self.details])

    def validate(self) -> None:
        if self.side < 2 or not _is_pow2(self.side):
            raise InvalidInputError(f"pyramid side must be a power of two >= 2, got {self.side}")
        if self.levels != self.side.bit_length() - 1:
            raise InvalidInputError(
                f"pyramid has {self.levels} levels, expected {self.side.bit_length() - 1} for side {self.side}"
            )
        for s, lvl in enumerate(self.details, start=1):
            n = self.side >> s
            if lvl.shape != (3, n, n):
                raise InvalidInputError(
                    f"detail grid at scale {s} has shape {lvl.shape}, expected {(3, n, n)}"
                )
        if not np.isfinite(self.approx):
            raise InvalidInputError("approximation coefficient is not finite")


def forward_haar(channel) -> WaveletPyramid:
    """Decompose a square power-of-two channel into its full Haar pyramid."""
    arr = np.asarray(channel, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"channel must be a square 2D grid, got shape {arr.shape}")
    n = arr.shape[0]
    if n < 2 or not _is_pow2(n):
        raise InvalidInputError(f"channel side must be a power of two >= 2, got {n}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("channel contains non-finite values")

    cur = arr / n
    details = []
    while cur.shape[0] > 1:
        a = cur[0::2, 0::2]
        b = cur[0::2, 1::2]
        c = cur[1::2, 0::2]
        d = cur[1::2, 1::2]
        details.append(np.stack(((a - b + c - d), (a + b - c - d), (a - b - c + d))) / 2.0)
        cur = (a + b + c + d) / 2.0
    return WaveletPyramid(side=n, details=tuple(details), approx=float(cur[0, 0]))


def inverse_haar(pyramid: WaveletPyramid) -> np.ndarray:
    """Synthesize the pixel grid back from a pyramid (exact up to rounding)."""
    pyramid.validate()
    cur = np.full((1, 1), pyramid.approx, dtype=np.float64)
    for lvl in reversed(pyramid.details):
        d1, d2, d3 = lvl
        m = cur.shape[0]
        out = np.empty((2 * m, 2 * m), dtype=np.float64)
        out[0::2, 0::2] = (cur + d1 + d2 + d3) / 2.0
        out[0::2, 1::2] = (cur - d1 + d2 - d3) / 2.0
        out[1::2, 0::2] = (cur + d1 - d2 - d3) / 2.0
        out[1::2, 1::2] = (cur - d1 - d2 + d3) / 2.0
        cur = out
    return cur * pyramid.side
