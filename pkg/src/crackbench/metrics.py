"""Pixel confusion counts, F1/IoU, and the Boundary Proximity Metric (BPM).

BPM compares skeletons instead of raw masks and forgives near misses: with
P = skeleton(pred), G = skeleton(truth) and D_r the Euclidean disk of radius r,

    TP = |P & (G + D_r)|      predicted skeleton within r of the truth
    FP = |P - (G + D_r)|      predicted skeleton farther than r from it
    FN = |G - (P + D_r)|      truth skeleton farther than r from the prediction
    TN = total - TP - FP - FN

where ``+`` is morphological dilation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import BinaryMask
from .errors import DimensionMismatchError

DEFAULT_BPM_RADIUS = 2


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class BpmConfig:
    radius: int = DEFAULT_BPM_RADIUS

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class ScorePair:
    f1: float
    iou: float


def _check_dims(a: BinaryMask, b: BinaryMask):
    if a.shape != b.shape:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape} vs {b.shape}")


def confusion(pred: BinaryMask, truth: BinaryMask) -> EvalCounts:
    """Per-pixel confusion counts with crack as the positive class."""
    _check_dims(pred, truth)
    p, t = pred.data, truth.data
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return EvalCounts(tp, fp, fn, p.size - tp - fp - fn)


def scores(c: EvalCounts) -> ScorePair:
    """F1 (Dice) and IoU (Jaccard).

    If there is nothing to find and nothing was predicted (tp + fp + fn == 0)
    both scores are 1.
    """
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return ScorePair(1.0, 1.0)
    iou = c.tp / denom
    f1 = 2 * c.tp / (2 * c.tp + c.fp + c.fn)
    return ScorePair(f1, iou)


# Neighbour offsets in Zhang-Suen order P2..P9 (clockwise from north).
_ZS_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _zs_neighbours(img: np.ndarray) -> list[np.ndarray]:
    h, w = img.shape
    pad = np.pad(img, 1)
    return [pad[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in _ZS_OFFSETS]


def skeletonize(m: BinaryMask) -> BinaryMask:
    """Zhang-Suen thinning; pixels outside the image count as background."""
    img = m.data.astype(np.uint8)
    while True:
        changed = False
        for step in (0, 1):
            nb = _zs_neighbours(img)
            p2, p3, p4, p5, p6, p7, p8, p9 = nb
            b = sum(nb)
            seq = nb + [p2]
            a = sum(((seq[k] == 0) & (seq[k + 1] == 1)).astype(np.uint8) for k in range(8))
            if step == 0:
                c1 = (p2 * p4 * p6) == 0
                c2 = (p4 * p6 * p8) == 0
            else:
                c1 = (p2 * p4 * p8) == 0
                c2 = (p2 * p6 * p8) == 0
            kill = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            if kill.any():
                img = img.copy()
                img[kill] = 0
                changed = True
        if not changed:
            return BinaryMask(img.astype(bool))


def disk(r: int) -> np.ndarray:
    """Flat disk structuring element {(dy, dx): dx^2 + dy^2 <= r^2}."""
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    return (x * x + y * y) <= r * r


def dilate_disk(m: BinaryMask, r: int) -> BinaryMask:
    if r < 0:
        raise ValueError("radius must be >= 0")
    if r == 0 or not m.data.any():
        return m
    return BinaryMask(ndimage.binary_dilation(m.data, structure=disk(r)))


def bpm_masks(pred: BinaryMask, truth: BinaryMask, cfg: BpmConfig = BpmConfig()):
    """Pixel sets behind :func:`bpm_counts`: ``(tp, fp, fn)`` boolean arrays."""
    _check_dims(pred, truth)
    p = skeletonize(pred)
    g = skeletonize(truth)
    g_band = dilate_disk(g, cfg.radius).data
    p_band = dilate_disk(p, cfg.radius).data
    return p.data & g_band, p.data & ~g_band, g.data & ~p_band


def bpm_counts(pred: BinaryMask, truth: BinaryMask, cfg: BpmConfig = BpmConfig()) -> EvalCounts:
    """Skeleton confusion counts with an ``r``-pixel tolerance band."""
    tp, fp, fn = (int(np.count_nonzero(s)) for s in bpm_masks(pred, truth, cfg))
    return EvalCounts(tp, fp, fn, pred.data.size - tp - fp - fn)
