"""Hard thresholding of detail coefficients with iterative variance estimation.

The remainder variance sigma^2 is accumulated directly in wavelet space as the
sum of squared sub-threshold detail coefficients, which under the transform's
normalization equals the pixel-space variance of the remainder field (the
approximation coefficient carries the mean and is always retained).  The
threshold follows the universal rule ``T = sqrt(2 sigma^2 ln(N^2))``.

T is an amplitude on the pixel scale, so membership tests compare it against
``side * |coefficient|``, the pixel-amplitude magnitude of a coefficient under
the pixel/N normalization.  Comparing raw coefficients against T would leave
the very first threshold above every coefficient of any [0,1] image (a
Cauchy-Schwarz bound), masking nothing, ever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .wavelet import WaveletPyramid, _is_pow2

__all__ = [
    "Threshold",
    "FilterMask",
    "universal_threshold",
    "estimate_threshold",
    "apply_threshold",
    "split_pyramid",
]


@dataclass(frozen=True)
class Threshold:
    """Converged threshold value with its variance estimate and iteration count.

    ``value`` includes the multiplier: value = multiplier * sqrt(2 variance ln N^2).
    """

    value: float
    variance: float
    iterations: int
    multiplier: float = 1.0

    def scaled(self, multiplier: float) -> "Threshold":
        """Same estimate with the multiplier replaced (applied post hoc)."""
        if multiplier < 0:
            raise InvalidInputError(f"multiplier must be >= 0, got {multiplier}")
        if self.multiplier <= 0:
            raise InvalidInputError("cannot rescale a threshold whose multiplier is 0")
        return Threshold(
            value=self.value * (multiplier / self.multiplier),
            variance=self.variance,
            iterations=self.iterations,
            multiplier=multiplier,
        )


@dataclass(frozen=True)
class FilterMask:
    """Boolean retention mask congruent to a pyramid's detail grids.

    True marks a retained coefficient; the approximation coefficient is always
    retained and therefore not represented here.
    """

    levels: tuple[np.ndarray, ...]

    def congruent_with(self, other: "FilterMask") -> bool:
        return [lvl.shape for lvl in self.levels] == [lvl.shape for lvl in other.levels]


def universal_threshold(variance: float, side: int) -> float:
    """Threshold sqrt(2 * variance * ln(side^2)); 0 when the variance is 0."""
    if variance < 0:
        raise InvalidInputError(f"variance must be >= 0, got {variance}")
    if side < 2 or not _is_pow2(side):
        raise InvalidInputError(f"side must be a power of two >= 2, got {side}")
    if variance == 0:
        return 0.0
    return math.sqrt(2.0 * variance * math.log(side * side))


def estimate_threshold(
    pyramid: WaveletPyramid, rel_tol: float = 1e-3, max_iter: int = 100
) -> Threshold:
    """Fixed-point estimate of the threshold from the pyramid's own statistics.

    Starts from the variance of the whole signal (total detail energy) and
    repeatedly re-estimates the remainder variance from the coefficients that
    fall below the current threshold, until the relative change in the
    threshold is at most ``rel_tol``.  Also stops when the threshold hits 0 or
    no coefficient lies strictly below it.
    """
    if rel_tol <= 0:
        raise InvalidInputError(f"rel_tol must be > 0, got {rel_tol}")
    if max_iter < 1:
        raise InvalidInputError(f"max_iter must be >= 1, got {max_iter}")
    pyramid.validate()

    coeffs = pyramid.detail_vector()
    squares = coeffs * coeffs
    magnitudes = pyramid.side * np.abs(coeffs)  # pixel-amplitude scale, same as T

    sigma2 = float(np.sum(squares))
    value = universal_threshold(sigma2, pyramid.side)
    iterations = 1
    while value > 0.0:
        below = magnitudes < value
        if not below.any():
            break
        new_sigma2 = float(np.sum(squares[below]))
        new_value = universal_threshold(new_sigma2, pyramid.side)
        converged = abs(new_value - value) <= rel_tol * value
        sigma2, value = new_sigma2, new_value
        iterations += 1
        if converged:
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"threshold iteration did not converge within {max_iter} iterations",
                last=Threshold(value=value, variance=sigma2, iterations=iterations),
            )
    return Threshold(value=value, variance=sigma2, iterations=iterations)


def apply_threshold(pyramid: WaveletPyramid, t: Threshold) -> FilterMask:
    """Mask of retained coefficients: side * |coef| >= t.value and coef != 0.

    Exactly-zero coefficients are never retained, even at threshold 0; they
    carry no structure and would otherwise force full refinement of flat
    regions.
    """
    if t.value < 0:
        raise InvalidInputError(f"threshold value must be >= 0, got {t.value}")
    pyramid.validate()
    levels = []
    for lvl in pyramid.details:
        mag = pyramid.side * np.abs(lvl)
        levels.append((mag >= t.value) & (lvl != 0.0))
    return FilterMask(levels=tuple(levels))


def split_pyramid(
    pyramid: WaveletPyramid, mask: FilterMask
) -> tuple[WaveletPyramid, WaveletPyramid]:
    """Split into (retained, remainder) pyramids with disjoint detail support.

    The approximation coefficient goes to the retained part; the remainder gets
    0 there.  Reconstructing both and summing reproduces the original signal.
    """
    if len(mask.levels) != len(pyramid.details) or any(
        m.shape != lvl.shape for m, lvl in zip(mask.levels, pyramid.details)
    ):
        raise InvalidInputError("mask shape does not match pyramid shape")
    kept = tuple(np.where(m, lvl, 0.0) for lvl, m in zip(pyramid.details, mask.levels))
    rest = tuple(np.where(m, 0.0, lvl) for lvl, m in zip(pyramid.details, mask.levels))
    retained = WaveletPyramid(side=pyramid.side, details=kept, approx=pyramid.approx)
    remainder = WaveletPyramid(side=pyramid.side, details=rest, approx=0.0)
    return retained, remainder
