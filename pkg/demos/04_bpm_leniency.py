"""Why the boundary proximity metric exists.

A prediction that traces the crack one pixel off scores poorly per pixel,
yet it found the crack. BPM compares skeletons with an r-pixel tolerance.
"""

import numpy as np

from crackbench.bench import emit_overlay
from crackbench.core import BinaryMask, SynthConfig, synth_generate
from crackbench.metrics import BpmConfig, bpm_counts, confusion, scores, skeletonize

_, truth = synth_generate(SynthConfig(seed=6, size=16, noise_sigma=0.0))
skel = skeletonize(truth).data
shifted = np.zeros_like(skel)
shifted[:, 1:] = skel[:, :-1]
pred = BinaryMask(shifted)

plain = scores(confusion(pred, truth))
print(f"pixel F1 {plain.f1:.3f}, IoU {plain.iou:.3f}")
for r in range(4):
    c = bpm_counts(pred, truth, BpmConfig(r))
    s = scores(c)
    print(f"BPM r={r}: TP {c.tp:2d} FP {c.fp:2d} FN {c.fn:2d}  F1 {s.f1:.3f}  IoU {s.iou:.3f}")

emit_overlay(pred, truth, "bpm_plain.png")
emit_overlay(pred, truth, "bpm_r2.png", bpm=BpmConfig(2))
print("overlays written to bpm_plain.png and bpm_r2.png (green TP, red FP, blue FN)")
