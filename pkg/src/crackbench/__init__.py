"""Label-free crack segmentation: Otsu/MGM, a quantum-inspired lattice
Hamiltonian method and max-cut/QUBO segmentation, with confusion-matrix and
boundary-proximity evaluation."""

from .core import (
    BinaryMask,
    DatasetManifest,
    GrayPatch,
    SynthConfig,
    load_manifest,
    load_mask,
    load_patch,
    normalize_contrast,
    save_mask,
    save_patch,
    synth_generate,
    write_synthetic_dataset,
)
from .errors import CrackBenchError, DataError, NoContrastError
from .metrics import BpmConfig, EvalCounts, bpm_counts, confusion, scores, skeletonize
from .mgm import GlobalThreshold, calibrate_global, otsu_threshold, segment_mgm
from .qi_hamiltonian import HamiltonianConfig, segment_qi
from .qseg import AnnealSchedule, segment_qseg

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "BinaryMask",
    "BpmConfig",
    "CrackBenchError",
    "DataError",
    "DatasetManifest",
    "EvalCounts",
    "GlobalThreshold",
    "GrayPatch",
    "HamiltonianConfig",
    "NoContrastError",
    "SynthConfig",
    "bpm_counts",
    "calibrate_global",
    "confusion",
    "load_manifest",
    "load_mask",
    "load_patch",
    "normalize_contrast",
    "otsu_threshold",
    "save_mask",
    "save_patch",
    "scores",
    "segment_mgm",
    "segment_qi",
    "segment_qseg",
    "skeletonize",
    "synth_generate",
    "write_synthetic_dataset",
]
