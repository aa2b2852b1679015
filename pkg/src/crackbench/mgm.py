"""Otsu thresholding and the mean-global-threshold (MGM) baseline.

Consider the pixels split by a candidate level k into a dark class C0 (bins
<= k) and a light class C1 (bins > k), with weights w0, w1 and means u0, u1.
The between-class variance is w0 * w1 * (u1 - u0)**2; Otsu's threshold is the
k that maximizes it. Intensities are quantized to 256 bins, so the scan over
all candidates is exhaustive. Cracks are the dark class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import BinaryMask, GrayPatch
from .errors import DataError, NoContrastError

NBINS = 256


@dataclass(frozen=True)
class OtsuResult:
    threshold: float
    between_class_variance: float

    @property
    def bin(self) -> int:
        return int(round(self.threshold * (NBINS - 1)))


@dataclass(frozen=True)
class GlobalThreshold:
    value: float
    calibration_size: int = 1
    skipped: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.calibration_size < 1:
            raise ValueError("calibration_size must be >= 1")


def quantize(values) -> np.ndarray:
    """Map [0, 1] intensities onto integer bins 0..255."""
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.rint(v * (NBINS - 1)), 0, NBINS - 1).astype(np.intp)


def otsu_histogram(hist: np.ndarray) -> tuple[int, float]:
    """Otsu scan over a 256-bin histogram; returns ``(bin, sigma_b^2)``.

    Bin centres are ``k / 255``. Ties go to the smallest bin.
    """
    hist = np.asarray(hist)
    if np.count_nonzero(hist) < 2:
        raise NoContrastError()
    levels = np.arange(hist.size) / (hist.size - 1)
    c0 = np.cumsum(hist)
    total = c0[-1]
    c1 = total - c0
    s0 = np.cumsum(hist * levels)
    valid = (c0 > 0) & (c1 > 0)
    sb = np.zeros(hist.size)
    u0 = s0[valid] / c0[valid]
    u1 = (s0[-1] - s0[valid]) / c1[valid]
    sb[valid] = (c0[valid] / total) * (c1[valid] / total) * (u1 - u0) ** 2
    k = int(np.argmax(sb))  # first maximum
    return k, float(sb[k])


def otsu_threshold(p: GrayPatch) -> OtsuResult:
    """Per-patch Otsu threshold; raises :class:`NoContrastError` on constant patches."""
    hist = np.bincount(quantize(p.data).ravel(), minlength=NBINS)
    k, sb = otsu_histogram(hist)
    return OtsuResult(k / (NBINS - 1), sb)


def calibrate_global(patches: Iterable[GrayPatch]) -> GlobalThreshold:
    """Average per-patch Otsu thresholds into one global threshold.

    Patches without contrast are skipped and counted in ``skipped``.
    """
    thresholds = []
    skipped = 0
    for p in patches:
        try:
            thresholds.append(otsu_threshold(p).threshold)
        except NoContrastError:
            skipped += 1
    if not thresholds:
        if skipped == 0:
            raise ValueError("calibrate_global needs at least one patch")
        raise DataError(f"all {skipped} calibration patches have no contrast")
    # exact sum so the result does not depend on patch order
    value = math.fsum(thresholds) / len(thresholds)
    return GlobalThreshold(min(max(value, 0.0), 1.0), len(thresholds), skipped)


def segment_mgm(p: GrayPatch, t: GlobalThreshold) -> BinaryMask:
    """Crack mask: pixels at or below the global threshold."""
    return BinaryMask(p.data <= t.value)
