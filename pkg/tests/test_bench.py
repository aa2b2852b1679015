import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from crackbench.bench import (
    REPORT_COLUMNS,
    MethodRow,
    RunConfig,
    emit_overlay,
    emit_report,
    evaluate_dirs,
    load_report,
    mean_std,
    method_label,
    overlay_rgb,
    render_report,
    run_benchmark,
)
from crackbench.cli import main
from crackbench.core import BinaryMask, GrayPatch, load_mask, save_mask, write_manifest
from crackbench.errors import ConfigError, DataError
from crackbench.metrics import BpmConfig
from crackbench.qseg import AnnealSchedule

FAST = AnnealSchedule(sweeps=30, restarts=2)


def _entries(manifest):
    return json.loads(Path(manifest).read_text())["entries"]


def test_three_patches_mgm(synth3, tmp_path):
    rows = run_benchmark(RunConfig(synth3, tmp_path / "out", methods=("mgm",)))
    assert len(rows) == 1 and rows[0].method == "mgm"
    side = json.loads((tmp_path / "out" / "per_patch.json").read_text())
    assert len(side["records"]) == 3
    assert side["global_threshold"]["calibration_size"] == 3
    assert len(list((tmp_path / "out" / "masks" / "mgm").glob("*.pgm"))) == 3
    assert (tmp_path / "out" / "report.csv").exists()


def test_external_identity(synth3, tmp_path):
    root = Path(synth3).parent
    entries = _entries(synth3)
    for e in entries:
        e["external"] = {"oracle": e["truth"]}
    mf = root / "with_oracle.json"
    write_manifest(mf, ".", entries)
    rows = run_benchmark(RunConfig(mf, tmp_path / "o", methods=("external:oracle",)))
    r = rows[0]
    assert r.method == "oracle"
    assert r.avg_iou == r.avg_f1 == r.avg_iou_bpm == r.avg_f1_bpm == 1.0
    assert r.std_iou == 0.0 and r.time_mean_s == 0.0


def test_external_missing_key(synth3, tmp_path):
    with pytest.raises(ConfigError):
        run_benchmark(RunConfig(synth3, tmp_path / "o", methods=("external:unet",)))


def test_missing_truth_rejected(synth3, tmp_path):
    root = Path(synth3).parent
    entries = _entries(synth3)
    entries[0]["truth"] = None
    mf = root / "no_truth.json"
    write_manifest(mf, ".", entries)
    with pytest.raises(DataError, match="ground truth"):
        run_benchmark(RunConfig(mf, tmp_path / "o", methods=("mgm",)))


def test_run_config_validation(synth3, tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(synth3, tmp_path, methods=())
    with pytest.raises(ConfigError):
        RunConfig(synth3, tmp_path, methods=("unet",))
    with pytest.raises(ConfigError):
        RunConfig(synth3, tmp_path, report_format="xlsx")


def test_method_labels():
    assert method_label("qseg") == "qseg[local]"
    assert method_label("qseg", "cmd:/bin/solver") == "qseg[cmd]"
    assert method_label("qseg", "http://host:1") == "qseg[http]"
    assert method_label("external:unet") == "unet"
    assert method_label("qi") == "qi"


def test_mean_std_population():
    assert mean_std([1.0, 3.0]) == (2.0, 1.0)
    assert mean_std([0.1, 0.2, 0.3]) == mean_std([0.3, 0.1, 0.2])


def test_sidecar_recompute(synth3, tmp_path):
    out = tmp_path / "o"
    rows = run_benchmark(RunConfig(synth3, out, methods=("mgm", "qseg"), schedule=FAST))
    recs = json.loads((out / "per_patch.json").read_text())["records"]
    for row in rows:
        mine = [r for r in recs if r["method"] == row.method]
        for k in ("iou", "f1", "iou_bpm", "f1_bpm"):
            mu, sd = mean_std([r[k] for r in mine])
            assert getattr(row, f"avg_{k}") == mu
            assert getattr(row, f"std_{k}") == sd


def test_permutation_invariant(synth3, tmp_path):
    root = Path(synth3).parent
    entries = _entries(synth3)
    mf = root / "reversed.json"
    write_manifest(mf, ".", entries[::-1])
    cfg = dict(methods=("mgm", "qseg"), schedule=FAST)
    a = run_benchmark(RunConfig(synth3, tmp_path / "a", **cfg))
    b = run_benchmark(RunConfig(mf, tmp_path / "b", **cfg))
    for ra, rb in zip(a, b):
        assert ra.method == rb.method
        for k in REPORT_COLUMNS[1:9]:
            assert getattr(ra, k) == getattr(rb, k)
    for f in (tmp_path / "a" / "masks").rglob("*.pgm"):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_degenerate_patch_empty_mask(tmp_path):
    Image.fromarray(np.full((8, 8), 90, np.uint8)).save(tmp_path / "flat.png")
    save_mask(BinaryMask(np.zeros((8, 8), bool)), tmp_path / "flat_mask.pgm")
    d = np.full((8, 8), 200, np.uint8)
    d[4] = 30
    Image.fromarray(d).save(tmp_path / "line.png")
    save_mask(BinaryMask(d < 100), tmp_path / "line_mask.pgm")
    mf = tmp_path / "m.json"
    write_manifest(mf, ".", [{"patch": "flat.png", "truth": "flat_mask.pgm"},
                             {"patch": "line.png", "truth": "line_mask.pgm"}])
    rows = run_benchmark(RunConfig(mf, tmp_path / "o", schedule=FAST))
    for r in rows:
        assert r.avg_f1 == 1.0, r
    assert load_mask(tmp_path / "o" / "masks" / "qi" / "flat.pgm").count() == 0


def test_overlays_and_density(synth3, tmp_path):
    out = tmp_path / "o"
    run_benchmark(RunConfig(synth3, out, methods=("qi",), overlays=True, dump_density=True))
    assert len(list((out / "overlays" / "qi").glob("*.png"))) == 6
    dumps = list((out / "density").glob("*.pgm"))
    assert len(dumps) == 3
    assert dumps[0].read_bytes().startswith(b"P5\n32 32\n65535\n")


# ---------------------------------------------------------------- reports

def _rows():
    return [MethodRow("mgm", 0.5, 0.1, 2 / 3, 0.05, 0.7, 0.2, 0.8, 0.1, 1e-5, 2e-6),
            MethodRow("qseg[local]", 0.25, 0.0, 0.4, 0.0, 1.0, 0.0, 1.0, 0.0, 0.1, 0.01)]


def test_csv_round_trip(tmp_path):
    emit_report(_rows(), "csv", tmp_path / "r.csv")
    assert load_report(tmp_path / "r.csv") == _rows()
    with open(tmp_path / "r.csv", newline="") as fh:
        assert tuple(next(csv.reader(fh))) == REPORT_COLUMNS


def test_json_round_trip(tmp_path):
    emit_report(_rows(), "json", tmp_path / "r.json")
    assert load_report(tmp_path / "r.json") == _rows()


def test_empty_report_header_only(tmp_path):
    emit_report([], "csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().strip() == ",".join(REPORT_COLUMNS)
    assert load_report(tmp_path / "r.csv") == []


def test_markdown_mean_pm_std():
    md = render_report(_rows(), "md")
    assert "| mgm | 0.5000 ± 0.1000 |" in md
    assert md.count("\n") == 4


# ---------------------------------------------------------------- overlays

def _line(shift=0):
    m = np.zeros((16, 16), bool)
    m[8, 2 + shift:14 + shift] = True
    return BinaryMask(m)


def _colours(rgb):
    return {tuple(int(c) for c in px) for px in rgb.reshape(-1, 3)}


def test_overlay_identity_green_only():
    rgb = overlay_rgb(_line(), _line())
    assert _colours(rgb) == {(0, 0, 0), (0, 255, 0)}
    assert (rgb[_line().data] == (0, 255, 0)).all()


def test_overlay_empty_pred_blue():
    rgb = overlay_rgb(BinaryMask(np.zeros((16, 16), bool)), _line())
    assert _colours(rgb) == {(0, 0, 0), (0, 0, 255)}


def test_overlay_bpm_shift_no_errors(tmp_path):
    rgb = overlay_rgb(_line(1), _line(), bpm=BpmConfig(2))
    assert (255, 0, 0) not in _colours(rgb) and (0, 0, 255) not in _colours(rgb)
    plain = overlay_rgb(_line(1), _line())
    assert (255, 0, 0) in _colours(plain)
    emit_overlay(_line(1), _line(), tmp_path / "o.png", background=GrayPatch(np.full((16, 16), 0.5)))
    im = Image.open(tmp_path / "o.png")
    assert im.mode == "RGB" and im.size == (16, 16)


# ---------------------------------------------------------------- eval dirs

def test_evaluate_dirs(tmp_path):
    (tmp_path / "p").mkdir()
    (tmp_path / "t").mkdir()
    save_mask(_line(1), tmp_path / "p" / "a.pgm")
    save_mask(_line(), tmp_path / "t" / "a.png")
    res = evaluate_dirs(tmp_path / "p", tmp_path / "t", BpmConfig(2))
    assert res["count"] == 1
    assert res["summary"]["avg_f1_bpm"] == 1.0
    assert res["summary"]["avg_f1"] < 1.0
    (tmp_path / "t2").mkdir()
    save_mask(_line(), tmp_path / "t2" / "b.pgm")
    with pytest.raises(DataError):
        evaluate_dirs(tmp_path / "p", tmp_path / "t2")


# ---------------------------------------------------------------- cli

def test_cli_end_to_end(tmp_path, capsys):
    assert main(["synth", "--count", "3", "--seed", "2", "--out", str(tmp_path / "d")]) == 0
    mf = tmp_path / "d" / "manifest.json"
    assert mf.exists()
    rc = main(["run", "--manifest", str(mf), "--methods", "mgm,qseg", "--out", str(tmp_path / "r"),
               "--sweeps", "20", "--restarts", "1", "--report-format", "json"])
    assert rc == 0
    rows = load_report(tmp_path / "r" / "report.json")
    assert [r.method for r in rows] == ["mgm", "qseg[local]"]
    assert "| Method |" in capsys.readouterr().out
    rc = main(["eval", "--pred", str(tmp_path / "r" / "masks" / "mgm"), "--truth", str(tmp_path / "d" / "masks"),
               "--json", str(tmp_path / "e.json")])
    assert rc == 0
    assert json.loads((tmp_path / "e.json").read_text())["count"] == 3


def test_cli_config_error(tmp_path, synth3):
    assert main(["run", "--manifest", str(synth3), "--methods", "mgm", "--out", str(tmp_path),
                 "--bpm-radius", "-1"]) == 2
    assert main(["run", "--manifest", str(synth3), "--out", str(tmp_path), "--sampler", "ftp:x"]) == 2
    assert main(["run", "--manifest", str(synth3), "--out", str(tmp_path), "--sigma", "0"]) == 2
    assert main(["synth", "--count", "0", "--out", str(tmp_path)]) == 2


def test_cli_data_error(tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    assert main(["run", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")]) == 3
    assert main(["eval", "--pred", str(tmp_path / "x"), "--truth", str(tmp_path / "y")]) == 3


def test_cli_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "crackbench.cli", "synth", "--count", "1", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert Path(proc.stdout.strip()).name == "manifest.json"
