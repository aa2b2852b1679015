"""``crackbench`` command line.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import BUILTIN_METHODS, RunConfig, evaluate_dirs, render_report, run_benchmark
from .core import write_synthetic_dataset
from .errors import ConfigError, CrackBenchError, DataError, SamplerError
from .metrics import DEFAULT_BPM_RADIUS, BpmConfig
from .qi_hamiltonian import HamiltonianConfig
from .qseg import AnnealSchedule

EXIT_CONFIG = 2
EXIT_DATA = 3


def _parse_methods(text: str) -> tuple[str, ...]:
    out = []
    for m in (t.strip() for t in text.split(",")):
        if not m:
            continue
        if m not in BUILTIN_METHODS and not m.startswith("external:"):
            m = f"external:{m}"  # bare names refer to external masks in the manifest
        out.append(m)
    return tuple(out)


def _parse_offset(text: str):
    if text in ("otsu", "mean"):
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--qseg-offset must be 'otsu', 'mean' or a number, got {text!r}") from None


def _parse_sampler(text: str) -> str:
    if text == "local" or text.startswith(("cmd:", "http:", "https:")):
        return text
    raise ConfigError(f"--sampler must be local, cmd:PATH or http:URL, got {text!r}")


def _binarize(text: str):
    if text == "otsu":
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--qi-binarize must be 'otsu' or a number, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crackbench", description="Label-free crack segmentation benchmark.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run methods over a manifest and write a report")
    run.add_argument("--manifest", required=True, type=Path)
    run.add_argument("--methods", default=",".join(BUILTIN_METHODS),
                     help="comma list of mgm, qi, qseg and external mask names (default: %(default)s)")
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--sigma", type=float, default=0.1, help="QI Gaussian kernel width (default: %(default)s)")
    run.add_argument("--qi-binarize", default="otsu", help="'otsu' or a fixed density threshold")
    run.add_argument("--qi-density", choices=("squared", "abs"), default="squared")
    run.add_argument("--qi-solver", choices=("lapack", "jacobi"), default="lapack")
    run.add_argument("--bpm-radius", type=int, default=DEFAULT_BPM_RADIUS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--sweeps", type=int, default=AnnealSchedule.sweeps)
    run.add_argument("--restarts", type=int, default=AnnealSchedule.restarts)
    run.add_argument("--qseg-offset", default="otsu", help="'otsu', 'mean' or a number")
    run.add_argument("--overlays", action="store_true", help="write TP/FP/FN overlay PNGs")
    run.add_argument("--dump-density", action="store_true", help="write QI density maps as 16-bit PGM")
    run.add_argument("--report-format", choices=("csv", "md", "json"), default="csv")
    run.add_argument("--calib-manifest", type=Path, help="calibrate the MGM threshold on this set instead")
    run.add_argument("--sampler", default="local", help="local, cmd:PATH or http:URL")

    syn = sub.add_parser("synth", help="generate a synthetic dataset with manifest")
    syn.add_argument("--count", type=int, required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True, type=Path)
    syn.add_argument("--size", type=int, default=32)
    syn.add_argument("--crack-width", type=int, default=1)
    syn.add_argument("--crack-depth", type=float, default=0.6)
    syn.add_argument("--noise-sigma", type=float, default=0.05)

    ev = sub.add_parser("eval", help="score a directory of predicted masks")
    ev.add_argument("--pred", required=True, type=Path)
    ev.add_argument("--truth", required=True, type=Path)
    ev.add_argument("--bpm-radius", type=int, default=DEFAULT_BPM_RADIUS)
    ev.add_argument("--json", dest="json_out", type=Path, help="also write per-mask results here")
    return ap


def _cmd_run(args) -> int:
    try:
        cfg = RunConfig(
            manifest=args.manifest,
            out_dir=args.out,
            methods=_parse_methods(args.methods),
            hamiltonian=HamiltonianConfig(sigma=args.sigma, binarize=_binarize(args.qi_binarize),
                                          density=args.qi_density, solver=args.qi_solver),
            schedule=AnnealSchedule(sweeps=args.sweeps, restarts=args.restarts, seed=args.seed),
            bpm=BpmConfig(args.bpm_radius),
            calib_manifest=args.calib_manifest,
            sampler=_parse_sampler(args.sampler),
            qseg_offset=_parse_offset(args.qseg_offset),
            overlays=args.overlays,
            dump_density=args.dump_density,
            report_format=args.report_format,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = run_benchmark(cfg)
    print(render_report(rows, "md"), end="")
    return 0


def _cmd_synth(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    try:
        manifest = write_synthetic_dataset(
            args.out, args.count, args.seed, size=args.size, crack_width=args.crack_width,
            crack_depth=args.crack_depth, noise_sigma=args.noise_sigma,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(manifest)
    return 0


def _cmd_eval(args) -> int:
    try:
        bpm = BpmConfig(args.bpm_radius)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = evaluate_dirs(args.pred, args.truth, bpm)
    s = res["summary"]
    print(f"masks: {res['count']}  bpm radius: {bpm.radius}")
    print(f"IoU      {s['avg_iou']:.4f} ± {s['std_iou']:.4f}   F1      {s['avg_f1']:.4f} ± {s['std_f1']:.4f}")
    print(f"IoU(BPM) {s['avg_iou_bpm']:.4f} ± {s['std_iou_bpm']:.4f}   F1(BPM) {s['avg_f1_bpm']:.4f} ± {s['std_f1_bpm']:.4f}")
    if args.json_out:
        args.json_out.write_text(json.dumps(res, indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "synth": _cmd_synth, "eval": _cmd_eval}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"crackbench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SamplerError) as exc:
        print(f"crackbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CrackBenchError as exc:
        print(f"crackbench: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
