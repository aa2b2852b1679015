from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from crackbench.core import BinaryMask
from crackbench.errors import DimensionMismatchError
from crackbench.metrics import (
    BpmConfig,
    EvalCounts,
    bpm_counts,
    bpm_masks,
    confusion,
    dilate_disk,
    disk,
    scores,
    skeletonize,
)

masks = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda s: st.tuples(arrays(np.bool_, s), arrays(np.bool_, s))
)


def M(a):
    return BinaryMask(np.asarray(a, dtype=bool))


def zhang_suen_oracle(img):
    """Textbook Zhang-Suen thinning, one pixel at a time."""
    img = [list(map(int, row)) for row in img]
    h, w = len(img), len(img[0])

    def px(r, c):
        return img[r][c] if 0 <= r < h and 0 <= c < w else 0

    changed = True
    while changed:
        changed = False
        for step in range(2):
            marked = []
            for r in range(h):
                for c in range(w):
                    if not img[r][c]:
                        continue
                    P = [px(r - 1, c), px(r - 1, c + 1), px(r, c + 1), px(r + 1, c + 1),
                         px(r + 1, c), px(r + 1, c - 1), px(r, c - 1), px(r - 1, c - 1)]
                    p2, p3, p4, p5, p6, p7, p8, p9 = P
                    B = sum(P)
                    A = sum(1 for k in range(8) if P[k] == 0 and P[(k + 1) % 8] == 1)
                    if step == 0:
                        ok = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        ok = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= B <= 6 and A == 1 and ok:
                        marked.append((r, c))
            for r, c in marked:
                img[r][c] = 0
            changed = changed or bool(marked)
    return np.array(img, dtype=bool)


# ---------------------------------------------------------------- confusion

def test_confusion_identity():
    t = np.zeros((4, 5), bool)
    t[1, 1:4] = True
    assert confusion(M(t), M(t)) == EvalCounts(3, 0, 0, 17)


def test_confusion_empty_pred():
    t = np.eye(4, dtype=bool)
    assert confusion(M(np.zeros((4, 4))), M(t)) == EvalCounts(0, 0, 4, 12)


def test_confusion_direct():
    assert confusion(M([[1, 1, 1, 0]]), M([[1, 1, 0, 1]])) == EvalCounts(2, 1, 1, 0)


def test_confusion_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        confusion(M(np.zeros((2, 2))), M(np.zeros((2, 3))))


@settings(max_examples=80, deadline=None)
@given(masks)
def test_confusion_partition_and_swap(pair):
    p, t = M(pair[0]), M(pair[1])
    c = confusion(p, t)
    assert c.total == p.data.size
    s = confusion(t, p)
    assert (s.tp, s.fp, s.fn, s.tn) == (c.tp, c.fn, c.fp, c.tn)


# ---------------------------------------------------------------- scores

def test_scores_examples():
    s = scores(EvalCounts(2, 1, 1, 0))
    assert s.iou == 0.5 and s.f1 == pytest.approx(2 / 3, abs=1e-16)
    assert scores(EvalCounts(0, 0, 0, 9)) == (s.__class__(1.0, 1.0))
    z = scores(EvalCounts(0, 3, 0, 1))
    assert z.iou == 0.0 and z.f1 == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_dice_jaccard_identity(tp, fp, fn):
    if tp + fp + fn == 0:
        return
    s = scores(EvalCounts(tp, fp, fn, 0))
    iou = Fraction(tp, tp + fp + fn)
    f1 = Fraction(2 * tp, 2 * tp + fp + fn)
    assert f1 == 2 * iou / (1 + iou)
    assert s.iou == float(iou) and s.f1 == float(f1)
    assert 0.0 <= s.iou <= s.f1 <= 1.0


# ---------------------------------------------------------------- skeleton

def test_skeleton_thin_line_unchanged():
    m = np.zeros((5, 9), bool)
    m[2, 1:8] = True
    assert skeletonize(M(m)) == M(m)


def test_skeleton_empty():
    assert skeletonize(M(np.zeros((3, 3)))).count() == 0


def test_skeleton_block_matches_oracle():
    block = np.ones((3, 3), bool)
    assert np.array_equal(skeletonize(M(block)).data, zhang_suen_oracle(block))
    padded = np.pad(block, 2)
    assert np.array_equal(skeletonize(M(padded)).data, zhang_suen_oracle(padded))


@settings(max_examples=60, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 10), st.integers(1, 10))))
def test_skeleton_matches_oracle(m):
    assert np.array_equal(skeletonize(M(m)).data, zhang_suen_oracle(m))


@settings(max_examples=60, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_skeleton_idempotent_subset(m):
    s = skeletonize(M(m))
    assert skeletonize(s) == s
    assert not (s.data & ~m).any()


# ---------------------------------------------------------------- dilation

def _single(n=7):
    m = np.zeros((n, n), bool)
    m[n // 2, n // 2] = True
    return M(m)


def test_disk_sizes():
    assert disk(0).sum() == 1
    assert disk(1).sum() == 5
    assert disk(2).sum() == 13
    assert dilate_disk(_single(), 1).count() == 5
    assert dilate_disk(_single(), 2).count() == 13


def test_disk_matches_enumeration():
    for r in range(5):
        want = {(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dx * dx + dy * dy <= r * r}
        got = {(int(y) - r, int(x) - r) for y, x in zip(*np.nonzero(disk(r)))}
        assert got == want


@settings(max_examples=40, deadline=None)
@given(arrays(np.bool_, (8, 8)))
def test_dilation_identity_and_nesting(m):
    assert dilate_disk(M(m), 0) == M(m)
    prev = m
    for r in range(1, 4):
        cur = dilate_disk(M(m), r).data
        assert not (prev & ~cur).any()
        prev = cur


# ---------------------------------------------------------------- bpm

def _diag_line(n=16, shift=0):
    m = np.zeros((n, n), bool)
    for k in range(2, n - 2):
        m[k, k + shift] = True
    return m


def test_bpm_identity_r0():
    g = _diag_line()
    c = bpm_counts(M(g), M(g), BpmConfig(0))
    assert (c.tp, c.fp, c.fn) == (skeletonize(M(g)).count(), 0, 0)


def test_bpm_shift_forgiven():
    g = np.zeros((16, 16), bool)
    g[8, 2:14] = True
    p = np.roll(g, 1, axis=1)
    plain = scores(confusion(M(p), M(g)))
    c = bpm_counts(M(p), M(g), BpmConfig(2))
    assert plain.f1 < 1
    assert c.fp == 0 and c.fn == 0 and scores(c).f1 == 1.0


def test_bpm_far_apart():
    g = np.zeros((16, 16), bool)
    g[2, 2:14] = True
    p = np.zeros((16, 16), bool)
    p[12, 2:14] = True
    c = bpm_counts(M(p), M(g), BpmConfig(2))
    assert (c.tp, c.fp, c.fn) == (0, 12, 12)
    assert c.total == 256


@settings(max_examples=60, deadline=None)
@given(st.tuples(arrays(np.bool_, (10, 10)), arrays(np.bool_, (10, 10))))
def test_bpm_properties(pair):
    p, g = M(pair[0]), M(pair[1])
    prev = None
    sp = skeletonize(p).count()
    for r in range(4):
        c = bpm_counts(p, g, BpmConfig(r))
        assert c.tp + c.fp == sp
        assert c.total == 100
        if prev is not None:
            assert c.tp >= prev.tp and c.fp <= prev.fp and c.fn <= prev.fn
        prev = c


def test_bpm_masks_disjoint():
    p, g = M(_diag_line(shift=1)), M(_diag_line())
    tp, fp, fn = bpm_masks(p, g, BpmConfig(1))
    assert not (tp & fp).any()
    assert tp.sum() == bpm_counts(p, g, BpmConfig(1)).tp


def test_bpm_config_validation():
    with pytest.raises(ValueError):
        BpmConfig(-1)
    with pytest.raises(ValueError):
        EvalCounts(-1, 0, 0, 0)
