"""Look inside the quantum-inspired method on one small patch.

Prints the patch, the negative-energy occupation density and the resulting
mask as text so the localization on the crack is visible without plotting.
"""

import numpy as np

from crackbench.core import SynthConfig, normalize_contrast, synth_generate
from crackbench.qi_hamiltonian import (
    HamiltonianConfig,
    binarize_density,
    build_hamiltonian,
    eigendecompose_symmetric,
    localization_density,
)

patch, truth = synth_generate(SynthConfig(seed=1, size=12))
patch = normalize_contrast(patch)
cfg = HamiltonianConfig(sigma=0.1)

h = build_hamiltonian(patch, cfg)
es = eigendecompose_symmetric(h)
print(f"{h.n_sites} sites, {np.count_nonzero(es.eigenvalues < 0)} negative-energy states")

density = localization_density(es, patch.shape)
mask = binarize_density(density, cfg)

np.set_printoptions(precision=2, linewidth=120)
print("\npatch (crack is dark):")
print(patch.data)
print("\ndensity:")
print(density.data)
print(f"\nmean density on crack {density.data[truth.data].mean():.3f}, "
      f"elsewhere {density.data[~truth.data].mean():.3f}")


def show(m):
    for row in m:
        print("".join("#" if v else "." for v in row))


print("\nground truth:")
show(truth.data)
print("\nQI mask (Otsu on density):")
show(mask.data)
print("\nQI mask (fixed threshold 0.42):")
show(binarize_density(density, HamiltonianConfig(binarize=0.42)).data)
