"""Domain types, image I/O, dataset manifests and the synthetic crack generator.

Intensities live in [0, 1] everywhere inside the package. Files on disk are
8-bit grayscale (binary PGM ``P5`` or PNG); the [0, 255] range is purely an
I/O concern.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from PIL import Image

from .errors import DataError, DimensionMismatchError, ManifestError

__all__ = [
    "GrayPatch",
    "BinaryMask",
    "ManifestEntry",
    "DatasetManifest",
    "SynthConfig",
    "load_patch",
    "save_patch",
    "normalize_contrast",
    "load_mask",
    "save_mask",
    "load_manifest",
    "write_manifest",
    "synth_generate",
    "write_pgm16",
    "write_synthetic_dataset",
]

BACKGROUND_LEVEL = 0.7


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrayPatch:
    """Grayscale patch, shape ``(height, width)``, values in [0, 1].

    ``degenerate`` is set by :func:`normalize_contrast` when the input had no
    contrast; downstream methods decide what that means for them.
    """

    data: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise DataError(f"patch must be a non-empty 2D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise DataError("patch intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(a, np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayPatch):
            return NotImplemented
        return self.degenerate == other.degenerate and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel crack labelling, ``True`` = crack."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise DataError(f"mask must be a 2D array, got shape {a.shape}")
        object.__setattr__(self, "data", _frozen(a.astype(bool), bool))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"BinaryMask(shape={self.shape}, crack_pixels={self.count()})"


# ---------------------------------------------------------------------------
# 8-bit image I/O
# ---------------------------------------------------------------------------


def _read_pgm(raw: bytes, path) -> np.ndarray:
    """Parse a binary (P5) PGM. Only maxval <= 255 is accepted."""
    if raw[:2] != b"P5":
        raise DataError(f"unreadable PGM (bad magic): {path}")
    tokens = []
    pos = 2
    n = len(raw)
    while len(tokens) < 3:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError(f"unreadable PGM (truncated header): {path}")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DataError(f"unreadable PGM (bad header): {path}") from None
    if maxval < 1 or maxval > 255:
        raise DataError(f"unreadable PGM: only 8-bit files are supported ({path})")
    if w == 0 or h == 0:
        raise DataError(f"zero-size image: {path}")
    body = raw[pos : pos + w * h]
    if len(body) != w * h:
        raise DataError(f"unreadable PGM (truncated pixel data): {path}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def _read_u8(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"unreadable file {path}: {exc}") from exc
    if raw[:2] == b"P5":
        return _read_pgm(raw, path)
    if raw[:2] in (b"P6", b"P3", b"P2"):
        raise DataError(f"unreadable or multi-channel PNM variant: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "1":
                im = im.convert("L")
                mode = "L"
            if mode != "L":
                if mode in ("RGB", "RGBA", "LA", "P", "CMYK", "YCbCr", "PA"):
                    raise DataError(f"multi-channel image ({mode}) not supported: {path}")
                raise DataError(f"unreadable: unsupported image mode {mode}: {path}")
            a = np.asarray(im, dtype=np.uint8).copy()
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc
    if a.size == 0:
        raise DataError(f"zero-size image: {path}")
    return a


def _write_u8(a: np.ndarray, path) -> None:
    path = Path(path)
    a = np.ascontiguousarray(a, dtype=np.uint8)
    try:
        if path.suffix.lower() == ".png":
            Image.fromarray(a, mode="L").save(path, format="PNG")
        else:
            h, w = a.shape
            with open(path, "wb") as fh:
                fh.write(b"P5\n%d %d\n255\n" % (w, h))
                fh.write(a.tobytes())
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def write_pgm16(values: np.ndarray, path) -> None:
    """Dump a [0, 1]-valued map as a 16-bit big-endian PGM scaled by 65535."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    q = np.rint(v * 65535.0).astype(">u2")
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (w, h))
        fh.write(q.tobytes())


def load_patch(path) -> GrayPatch:
    """Read an 8-bit single-channel PGM/PNG and scale it to [0, 1] by 1/255."""
    return GrayPatch(_read_u8(path).astype(np.float64) / 255.0)


def save_patch(p: GrayPatch, path) -> None:
    _write_u8(np.rint(p.data * 255.0), path)


def normalize_contrast(p: GrayPatch) -> GrayPatch:
    """Min-max rescale to the full [0, 1] range.

    A constant patch maps to all zeros with ``degenerate=True``.
    """
    lo = p.data.min()
    hi = p.data.max()
    if hi == lo:
        return GrayPatch(np.zeros(p.shape), degenerate=True)
    return GrayPatch(np.clip((p.data - lo) / (hi - lo), 0.0, 1.0))


def save_mask(m: BinaryMask, path) -> None:
    """Write a mask as 8-bit PGM/PNG with crack = 255, background = 0."""
    _write_u8(np.where(m.data, 255, 0), path)


def load_mask(path) -> BinaryMask:
    a = _read_u8(path)
    bad = (a != 0) & (a != 255)
    if bad.any():
        v = int(a[bad][0])
        raise DataError(f"non-binary mask value {v} in {path}")
    return BinaryMask(a == 255)


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["root", "entries"],
    "properties": {
        "root": {"type": "string"},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["patch"],
                "properties": {
                    "patch": {"type": "string"},
                    "truth": {"type": ["string", "null"]},
                    "external": {
                        "type": "object",
                        "additionalProperties": {"type": "string"},
                    },
                },
                "additionalProperties": False,
            },
        },
    },
}


@dataclass(frozen=True)
class ManifestEntry:
    patch: Path
    truth: Path | None = None
    external: dict[str, Path] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.patch.stem


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]

    def __len__(self):
        return len(self.entries)

    def external_methods(self) -> set[str]:
        names = set()
        for e in self.entries:
            names.update(e.external)
        return names


def load_manifest(path) -> DatasetManifest:
    """Load and validate a JSON manifest.

    A relative ``root`` is resolved against the manifest's directory; entry
    paths are resolved against ``root``. Every referenced file is opened so
    that missing files and dimension mismatches fail here, not mid-run.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ManifestError(f"manifest {path} violates schema: {exc.message}") from None

    root = Path(doc["root"])
    if not root.is_absolute():
        root = path.parent / root

    def resolve(rel):
        p = Path(rel)
        p = p if p.is_absolute() else root / p
        if not p.is_file():
            raise ManifestError(f"missing file referenced by manifest: {p}")
        return p

    entries = []
    for item in doc["entries"]:
        patch = resolve(item["patch"])
        truth = resolve(item["truth"]) if item.get("truth") else None
        external = {k: resolve(v) for k, v in item.get("external", {}).items()}
        shape = _read_u8(patch).shape
        for other in ([truth] if truth else []) + list(external.values()):
            oshape = _read_u8(other).shape
            if oshape != shape:
                raise DimensionMismatchError(
                    f"dimension mismatch: {patch} is {shape}, {other} is {oshape}"
                )
        entries.append(ManifestEntry(patch, truth, external))
    return DatasetManifest(root, tuple(entries))


def write_manifest(manifest_path, root, entries) -> None:
    """Write a manifest. ``entries`` holds dicts with patch/truth/external keys
    (paths relative to ``root``)."""
    doc = {"root": str(root), "entries": [
        {"patch": str(e["patch"]), "truth": None if e.get("truth") is None else str(e["truth"]),
         "external": {k: str(v) for k, v in e.get("external", {}).items()}}
        for e in entries
    ]}
    Path(manifest_path).write_text(json.dumps(doc, indent=2) + os.linesep)


# ---------------------------------------------------------------------------
# Synthetic cracks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    size: int = 32
    crack_width: int = 1
    crack_depth: float = 0.6
    noise_sigma: float = 0.05
    # probability that a walk step advances towards the far border
    advance_prob: float = 0.6

    def __post_init__(self):
        if self.size < 8:
            raise ValueError("size must be >= 8")
        if not 1 <= self.crack_width <= 3:
            raise ValueError("crack_width must be in [1, 3]")
        if not 0.0 < self.crack_depth <= 1.0:
            raise ValueError("crack_depth must be in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 < self.advance_prob <= 1.0:
            raise ValueError("advance_prob must be in (0, 1]")


def _crack_walk(rng: np.random.Generator, size: int, advance_prob: float) -> list[tuple[int, int]]:
    """4-connected biased walk from column 0 to column ``size - 1``."""
    row = int(rng.integers(size // 4, size - size // 4))
    col = 0
    path = [(row, col)]
    side = (1.0 - advance_prob) / 2.0
    while col < size - 1:
        u = rng.random()
        if u < advance_prob:
            col += 1
        elif u < advance_prob + side:
            row = max(row - 1, 0)
        else:
            row = min(row + 1, size - 1)
        if path[-1] != (row, col):
            path.append((row, col))
    return path


def synth_generate(cfg: SynthConfig) -> tuple[GrayPatch, BinaryMask]:
    """Generate a noisy light patch crossed by one dark crack.

    The crack is a seeded biased random walk between opposite borders
    (horizontal or vertical, chosen by the seed), thickened perpendicular to
    its direction to ``crack_width`` pixels. Returns the patch and the exact
    crack support as ground truth.
    """
    n = cfg.size
    rng = np.random.default_rng(cfg.seed)
    vertical = bool(rng.integers(0, 2))
    walk = _crack_walk(rng, n, cfg.advance_prob)

    mask = np.zeros((n, n), dtype=bool)
    lo = (cfg.crack_width - 1) // 2
    hi = cfg.crack_width // 2
    for r, c in walk:
        mask[max(r - lo, 0) : min(r + hi, n - 1) + 1, c] = True
    if vertical:
        mask = mask.T.copy()

    background = BACKGROUND_LEVEL + (rng.normal(0.0, cfg.noise_sigma, (n, n)) if cfg.noise_sigma > 0 else 0.0)
    background = np.clip(np.broadcast_to(background, (n, n)), 0.0, 1.0)
    img = np.where(mask, np.clip(background - cfg.crack_depth, 0.0, 1.0), background)
    return GrayPatch(img), BinaryMask(mask)


def write_synthetic_dataset(out_dir, count: int, seed: int = 0, **cfg_kwargs) -> Path:
    """Write ``count`` synthetic patches, their masks and a manifest.

    Patch ``k`` uses a seed spawned from ``seed``, so datasets with different
    master seeds do not share patches. Returns the manifest path.
    """
    out = Path(out_dir)
    (out / "patches").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    children = np.random.SeedSequence(seed).spawn(count)
    width = len(str(max(count - 1, 0)))
    entries = []
    for k, child in enumerate(children):
        cfg = SynthConfig(seed=int(child.generate_state(1, np.uint64)[0]), **cfg_kwargs)
        patch, mask = synth_generate(cfg)
        name = f"synth_{k:0{width}d}.pgm"
        save_patch(patch, out / "patches" / name)
        save_mask(mask, out / "masks" / name)
        entries.append({"patch": f"patches/{name}", "truth": f"masks/{name}"})
    manifest = out / "manifest.json"
    write_manifest(manifest, ".", entries)
    return manifest
