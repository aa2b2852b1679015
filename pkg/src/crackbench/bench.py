"""Benchmark harness: run every method over a manifest and aggregate scores.

Output directory layout::

    masks/<method>/<patch>.pgm      predicted masks
    per_patch.json                  per-patch counts, scores and timings
    report.{csv,md,json}            one row per method
    overlays/<method>/<patch>.png   optional TP/FP/FN overlays (+ _bpm.png)
    density/<patch>.pgm             optional 16-bit QI density dumps
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

from .core import (
    BinaryMask,
    GrayPatch,
    load_manifest,
    load_mask,
    load_patch,
    normalize_contrast,
    save_mask,
    write_pgm16,
)
from .errors import ConfigError, DataError, DimensionMismatchError, NoContrastError
from .metrics import BpmConfig, bpm_counts, bpm_masks, confusion, scores
from .mgm import calibrate_global, segment_mgm
from .qi_hamiltonian import HamiltonianConfig, binarize_density, qi_density
from .qseg import AnnealSchedule, segment_qseg

log = logging.getLogger(__name__)

BUILTIN_METHODS = ("mgm", "qi", "qseg")
REPORT_COLUMNS = (
    "method",
    "avg_iou", "std_iou", "avg_f1", "std_f1",
    "avg_iou_bpm", "std_iou_bpm", "avg_f1_bpm", "std_f1_bpm",
    "time_mean_s", "time_std_s",
)


@dataclass(frozen=True)
class MethodRow:
    method: str
    avg_iou: float
    std_iou: float
    avg_f1: float
    std_f1: float
    avg_iou_bpm: float
    std_iou_bpm: float
    avg_f1_bpm: float
    std_f1_bpm: float
    time_mean_s: float
    time_std_s: float


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    out_dir: Path
    methods: tuple[str, ...] = BUILTIN_METHODS
    hamiltonian: HamiltonianConfig = HamiltonianConfig()
    schedule: AnnealSchedule = AnnealSchedule()
    bpm: BpmConfig = BpmConfig()
    calib_manifest: Optional[Path] = None
    sampler: str = "local"
    qseg_offset: Union[str, float] = "otsu"
    overlays: bool = False
    dump_density: bool = False
    report_format: str = "csv"
    seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        for m in self.methods:
            if m not in BUILTIN_METHODS and not m.startswith("external:"):
                raise ConfigError(f"unknown method {m!r}")
        if self.report_format not in REPORT_FORMATS:
            raise ConfigError(f"report format must be one of {sorted(REPORT_FORMATS)}")


def method_label(method: str, sampler: str = "local") -> str:
    """Report name of a method. Q-Seg carries its sampler backend."""
    if method == "qseg":
        backend = "local" if sampler == "local" else sampler.split(":", 1)[0]
        return f"qseg[{backend}]"
    if method.startswith("external:"):
        return method.split(":", 1)[1]
    return method


def _patch_seed(seed: int, name: str) -> int:
    # depends on the patch name only, not its position in the manifest
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Population mean and standard deviation, independent of value order."""
    if not values:
        return math.nan, math.nan
    vals = sorted(float(v) for v in values)
    mu = math.fsum(vals) / len(vals)
    var = math.fsum(sorted((v - mu) ** 2 for v in vals)) / len(vals)
    return mu, math.sqrt(var)


def _entry_name(entry, root: Path) -> str:
    try:
        rel = entry.patch.relative_to(root)
    except ValueError:
        rel = Path(entry.patch.name)
    return str(rel.with_suffix("")).replace("/", "__").replace("\\", "__")


def _predict(method, patch, cfg, global_t, seed):
    """Return (mask, density or None). ``patch`` is contrast-normalized."""
    if method == "mgm":
        return segment_mgm(patch, global_t), None
    if method == "qi":
        d = qi_density(patch, cfg.hamiltonian)
        return binarize_density(d, cfg.hamiltonian), d
    if method == "qseg":
        s = replace(cfg.schedule, seed=seed)
        return segment_qseg(patch, s, sampler=cfg.sampler, offset=cfg.qseg_offset), None
    raise ConfigError(f"unknown method {method!r}")


def run_benchmark(cfg: RunConfig) -> list[MethodRow]:
    """Predict, time and score every selected method on every manifest entry.

    Patches are contrast-normalized before prediction (not timed). Timing
    covers the full segmentation call. Patches without contrast give an empty
    mask for every built-in method.
    """
    manifest = load_manifest(cfg.manifest)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    patches, truths = [], []
    for e in manifest.entries:
        if e.truth is None:
            raise DataError(f"missing ground truth for scored entry {e.patch}")
        patches.append(normalize_contrast(load_patch(e.patch)))
        truths.append(load_mask(e.truth))
    # file stems where unique, so masks pair with ground truth by name
    names = [e.patch.stem for e in manifest.entries]
    if len(set(names)) != len(names):
        names = [_entry_name(e, manifest.root) for e in manifest.entries]
        if len(set(names)) != len(names):
            raise DataError("patch names in the manifest are not unique")

    global_t = None
    if "mgm" in cfg.methods:
        if cfg.calib_manifest is not None:
            calib = [normalize_contrast(load_patch(e.patch)) for e in load_manifest(cfg.calib_manifest).entries]
        else:
            calib = patches
        global_t = calibrate_global(calib)
        log.info("global threshold %.6f from %d patches", global_t.value, global_t.calibration_size)

    records = []
    rows = []
    for method in cfg.methods:
        label = method_label(method, cfg.sampler)
        mask_dir = out / "masks" / label
        mask_dir.mkdir(parents=True, exist_ok=True)
        external = method.split(":", 1)[1] if method.startswith("external:") else None
        if external is None and patches:
            # warm-up call so one-time costs (imports, BLAS setup) are not timed
            probe = next((p for p in patches if not p.degenerate), None)
            if probe is not None:
                _predict(method, probe, cfg, global_t, 0)

        per = {"iou": [], "f1": [], "iou_bpm": [], "f1_bpm": [], "time": []}
        for entry, name, patch, truth in zip(manifest.entries, names, patches, truths):
            density = None
            elapsed = 0.0
            if external is not None:
                if external not in entry.external:
                    raise ConfigError(f"entry {entry.patch} has no external prediction {external!r}")
                pred = load_mask(entry.external[external])
            elif patch.degenerate:
                pred = BinaryMask(np.zeros(patch.shape, dtype=bool))
            else:
                seed = _patch_seed(cfg.seed, name)
                t0 = time.perf_counter()
                try:
                    pred, density = _predict(method, patch, cfg, global_t, seed)
                except NoContrastError:
                    pred = BinaryMask(np.zeros(patch.shape, dtype=bool))
                elapsed = time.perf_counter() - t0
            if pred.shape != truth.shape:
                raise DimensionMismatchError(f"{label} prediction for {name} has shape {pred.shape}")

            save_mask(pred, mask_dir / f"{name}.pgm")
            if density is not None and cfg.dump_density:
                (out / "density").mkdir(exist_ok=True)
                write_pgm16(density.data, out / "density" / f"{name}.pgm")
            if cfg.overlays:
                odir = out / "overlays" / label
                odir.mkdir(parents=True, exist_ok=True)
                emit_overlay(pred, truth, odir / f"{name}.png", background=patch)
                emit_overlay(pred, truth, odir / f"{name}_bpm.png", bpm=cfg.bpm, background=patch)

            plain = confusion(pred, truth)
            lenient = bpm_counts(pred, truth, cfg.bpm)
            sp_, sb_ = scores(plain), scores(lenient)
            per["iou"].append(sp_.iou)
            per["f1"].append(sp_.f1)
            per["iou_bpm"].append(sb_.iou)
            per["f1_bpm"].append(sb_.f1)
            per["time"].append(elapsed)
            records.append({
                "method": label,
                "patch": name,
                "degenerate": bool(patch.degenerate),
                "counts": asdict(plain),
                "bpm_counts": asdict(lenient),
                "iou": sp_.iou,
                "f1": sp_.f1,
                "iou_bpm": sb_.iou,
                "f1_bpm": sb_.f1,
                "time_s": elapsed,
            })

        stats = {k: mean_std(v) for k, v in per.items()}
        rows.append(MethodRow(
            label,
            *stats["iou"], *stats["f1"], *stats["iou_bpm"], *stats["f1_bpm"], *stats["time"],
        ))

    sidecar = {
        "bpm_radius": cfg.bpm.radius,
        "global_threshold": None if global_t is None else asdict(global_t),
        "records": sorted(records, key=lambda r: (r["method"], r["patch"])),
    }
    (out / "per_patch.json").write_text(json.dumps(sidecar, indent=2))
    ext = {"csv": "csv", "markdown": "md", "md": "md", "json": "json"}[cfg.report_format]
    emit_report(rows, cfg.report_format, out / f"report.{ext}")
    return rows


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

REPORT_FORMATS = {"csv", "markdown", "md", "json"}


def _fmt(v: float) -> str:
    return "nan" if v != v else f"{v:.4f}"


def render_report(rows: Sequence[MethodRow], fmt: str) -> str:
    """Rows as CSV, markdown (mean ± std cells) or JSON text."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r.method] + [repr(float(getattr(r, c))) for c in REPORT_COLUMNS[1:]])
        text = buf.getvalue()
    elif fmt in ("markdown", "md"):
        head = ["Method", "Avg IoU", "Avg F1", "Avg IoU (BPM)", "Avg F1 (BPM)", "Prediction time (s)"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for r in rows:
            cells = [
                r.method,
                f"{_fmt(r.avg_iou)} ± {_fmt(r.std_iou)}",
                f"{_fmt(r.avg_f1)} ± {_fmt(r.std_f1)}",
                f"{_fmt(r.avg_iou_bpm)} ± {_fmt(r.std_iou_bpm)}",
                f"{_fmt(r.avg_f1_bpm)} ± {_fmt(r.std_f1_bpm)}",
                f"{r.time_mean_s:.4g} ± {r.time_std_s:.2g}",
            ]
            lines.append("| " + " | ".join(cells) + " |")
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = json.dumps([asdict(r) for r in rows], indent=2) + "\n"
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    return text


def emit_report(rows: Sequence[MethodRow], fmt: str, path) -> None:
    """Write :func:`render_report` output to ``path``."""
    text = render_report(rows, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write report {path}: {exc}") from exc


def load_report(path) -> list[MethodRow]:
    """Read a CSV or JSON report back into rows."""
    path = Path(path)
    if path.suffix == ".json":
        return [MethodRow(**d) for d in json.loads(path.read_text())]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise DataError(f"unexpected report columns in {path}")
        return [MethodRow(d["method"], *(float(d[c]) for c in REPORT_COLUMNS[1:])) for d in reader]


# ---------------------------------------------------------------------------
# Overlays
# ---------------------------------------------------------------------------

TP_COLOR = (0, 255, 0)
FP_COLOR = (255, 0, 0)
FN_COLOR = (0, 0, 255)


def overlay_rgb(pred: BinaryMask, truth: BinaryMask, bpm: Optional[BpmConfig] = None,
                background: Optional[GrayPatch] = None) -> np.ndarray:
    """RGB overlay: TP green, FP red, FN blue, everything else grayscale.

    With ``bpm`` the classes are the BPM pixel sets on the skeletons.
    """
    if pred.shape != truth.shape:
        raise DimensionMismatchError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    if background is not None and background.shape != pred.shape:
        raise DimensionMismatchError("background patch shape differs from masks")
    if bpm is None:
        tp = pred.data & truth.data
        fp = pred.data & ~truth.data
        fn = ~pred.data & truth.data
    else:
        tp, fp, fn = bpm_masks(pred, truth, bpm)
    gray = np.zeros(pred.shape, dtype=np.uint8) if background is None else np.rint(background.data * 255).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    rgb[tp] = TP_COLOR
    rgb[fp] = FP_COLOR
    rgb[fn] = FN_COLOR
    return rgb


def emit_overlay(pred: BinaryMask, truth: BinaryMask, path, bpm: Optional[BpmConfig] = None,
                 background: Optional[GrayPatch] = None) -> None:
    Image.fromarray(overlay_rgb(pred, truth, bpm, background), mode="RGB").save(path, format="PNG")


# ---------------------------------------------------------------------------
# Metrics-only evaluation of mask directories
# ---------------------------------------------------------------------------

MASK_SUFFIXES = (".pgm", ".png")


def _mask_files(d: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(d.iterdir()) if p.suffix.lower() in MASK_SUFFIXES}


def evaluate_dirs(pred_dir, truth_dir, bpm: BpmConfig = BpmConfig()) -> dict:
    """Score every prediction against the ground-truth mask with the same stem."""
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    for d in (pred_dir, truth_dir):
        if not d.is_dir():
            raise DataError(f"not a directory: {d}")
    preds, truths = _mask_files(pred_dir), _mask_files(truth_dir)
    missing = sorted(set(truths) - set(preds))
    if missing:
        raise DataError(f"no prediction for {len(missing)} ground-truth masks, e.g. {missing[0]}")
    if not truths:
        raise DataError(f"no masks found in {truth_dir}")
    per = []
    for stem, tpath in truths.items():
        pred, truth = load_mask(preds[stem]), load_mask(tpath)
        c, b = confusion(pred, truth), bpm_counts(pred, truth, bpm)
        s, sb = scores(c), scores(b)
        per.append({"patch": stem, "iou": s.iou, "f1": s.f1, "iou_bpm": sb.iou, "f1_bpm": sb.f1,
                    "counts": asdict(c), "bpm_counts": asdict(b)})
    summary = {}
    for k in ("iou", "f1", "iou_bpm", "f1_bpm"):
        summary[f"avg_{k}"], summary[f"std_{k}"] = mean_std([r[k] for r in per])
    return {"bpm_radius": bpm.radius, "count": len(per), "summary": summary, "records": per}
