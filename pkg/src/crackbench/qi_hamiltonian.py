"""Quantum-inspired segmentation from Anderson localization.

The patch is embedded as a single-particle tight-binding Hamiltonian on the
pixel lattice: pixel values are the on-site potentials and nearest neighbours
are coupled by a Gaussian similarity kernel,

    H[l, l] = a_l
    H[l, k] = exp(-(a_l - a_k)**2 / (2 sigma**2))   for 4-neighbours l, k

Dark, rough regions act as strong disorder, so low-energy eigenstates
localize there. The crack-likelihood map is the per-site occupation of all
negative-energy eigenstates, which is then binarized.

Off-diagonals are kept positive (no physics-style minus sign on hopping); the
"negative eigenvalue" selection is relative to this convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp

from .core import BinaryMask, GrayPatch, normalize_contrast
from .eigen import EigenSystem, eigh
from .errors import NoContrastError
from .lattice import lattice_pairs
from .mgm import NBINS, otsu_histogram, quantize

DENSITY_MODES = ("squared", "abs")


@dataclass(frozen=True)
class HamiltonianConfig:
    """Parameters of the QI pipeline.

    sigma : Gaussian kernel width in [0, 1] intensity units.
    binarize : ``"otsu"`` or a fixed density threshold in [0, 1].
    density : ``"squared"`` sums v**2 (occupation probability); ``"abs"`` sums |v|.
    solver : ``"lapack"`` or ``"jacobi"``.
    """

    sigma: float = 0.1
    binarize: Union[str, float] = "otsu"
    density: str = "squared"
    solver: str = "lapack"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if isinstance(self.binarize, str):
            if self.binarize != "otsu":
                raise ValueError(f"unknown binarization rule {self.binarize!r}")
        elif not 0.0 <= float(self.binarize) <= 1.0:
            raise ValueError("fixed threshold must be in [0, 1]")
        if self.density not in DENSITY_MODES:
            raise ValueError(f"density must be one of {DENSITY_MODES}")


@dataclass(frozen=True)
class LatticeHamiltonian:
    """Sparse symmetric Hamiltonian in COO form (both triangles stored)."""

    lattice_dims: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @property
    def n_sites(self) -> int:
        m, n = self.lattice_dims
        return m * n

    @property
    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n_sites)
        on = self.rows == self.cols
        d[self.rows[on]] = self.values[on]
        return d

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=(self.n_sites,) * 2)

    def to_dense(self) -> np.ndarray:
        h = np.zeros((self.n_sites, self.n_sites))
        h[self.rows, self.cols] = self.values
        return h


@dataclass(frozen=True)
class DensityMap:
    data: np.ndarray

    @property
    def shape(self):
        return self.data.shape


def gaussian_kernel(a_i, a_j, sigma: float):
    return np.exp(-((np.asarray(a_i) - np.asarray(a_j)) ** 2) / (2.0 * sigma * sigma))


def build_hamiltonian(p: GrayPatch, cfg: HamiltonianConfig = HamiltonianConfig()) -> LatticeHamiltonian:
    """Embed a patch as a lattice Hamiltonian.

    Raises :class:`NoContrastError` for patches flagged degenerate by
    :func:`~crackbench.core.normalize_contrast`.
    """
    if p.degenerate:
        raise NoContrastError()
    m, n = p.shape
    a = p.data.ravel()
    i, j = lattice_pairs(m, n)
    g = gaussian_kernel(a[i], a[j], cfg.sigma)
    diag = np.arange(m * n)
    rows = np.concatenate([diag, i, j])
    cols = np.concatenate([diag, j, i])
    values = np.concatenate([a, g, g])
    return LatticeHamiltonian((m, n), rows, cols, values)


def eigendecompose_symmetric(h, method: str = "lapack") -> EigenSystem:
    """Full spectrum (ascending) and orthonormal eigenvectors of ``h``.

    ``h`` may be a :class:`LatticeHamiltonian` or a dense symmetric array.
    """
    a = h.to_dense() if isinstance(h, LatticeHamiltonian) else np.asarray(h, dtype=np.float64)
    return eigh(a, method=method)


def localization_density(es: EigenSystem, dims, mode: str = "squared") -> DensityMap:
    """Per-site occupation summed over eigenstates with negative energy."""
    neg = es.eigenvalues < 0
    v = es.eigenvectors[:, neg]
    if mode == "squared":
        d = np.sum(v * v, axis=1)
    elif mode == "abs":
        d = np.sum(np.abs(v), axis=1)
    else:
        raise ValueError(f"density must be one of {DENSITY_MODES}")
    return DensityMap(d.reshape(dims))


def binarize_density(d: DensityMap, cfg: HamiltonianConfig = HamiltonianConfig()) -> BinaryMask:
    """Threshold the density map; crack is the HIGH-density class.

    Otsu rule: the map is min-max rescaled, quantized to 256 bins and split
    with the same scan as the MGM baseline; bins above the Otsu bin are crack,
    and a constant map gives an all-false mask. A fixed threshold ``t`` is a
    plain ``density >= t`` comparison.
    """
    data = d.data
    if cfg.binarize != "otsu":
        return BinaryMask(data >= float(cfg.binarize))
    lo, hi = data.min(), data.max()
    if hi == lo:
        return BinaryMask(np.zeros(data.shape, dtype=bool))
    bins = quantize((data - lo) / (hi - lo))
    try:
        k, _ = otsu_histogram(np.bincount(bins.ravel(), minlength=NBINS))
    except NoContrastError:
        return BinaryMask(np.zeros(data.shape, dtype=bool))
    return BinaryMask(bins > k)


def qi_density(p: GrayPatch, cfg: HamiltonianConfig = HamiltonianConfig()) -> DensityMap:
    q = normalize_contrast(p)
    h = build_hamiltonian(q, cfg)
    es = eigendecompose_symmetric(h, cfg.solver)
    return localization_density(es, q.shape, cfg.density)


def segment_qi(p: GrayPatch, cfg: HamiltonianConfig = HamiltonianConfig()) -> BinaryMask:
    """Full QI pipeline: contrast normalization, embedding, eigensolve, density, mask.

    Constant patches raise :class:`NoContrastError`.
    """
    return binarize_density(qi_density(p, cfg), cfg)
