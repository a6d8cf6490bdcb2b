import subprocess
import sys

import numpy as np
import pytest

from conftest import small_scene
from densify import cli
from densify.core import PipelineConfig
from densify.errors import InvariantViolation
from densify.kitti_io import discover_frames, load_frame, read_depth_png, save_frame
from densify.metrics import ErrorReport, evaluate, parse_kv
from densify.pipeline import compose_pipeline
from densify.synth import render

FAST = ["--resolutions", "150"]


@pytest.fixture
def two_frames(tmp_path):
    root = tmp_path / "in"
    for seed in (0, 1):
        save_frame(render(small_scene(seed)), root)
    return root


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.setenv("DENSIFY_THREADS", "1")


def test_complete_writes_maps_and_report(two_frames, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["complete", str(two_frames), str(out), "--emit-error-maps", *FAST]) == 0
    assert sorted(p.name for p in (out / "dense").iterdir()) == ["small00.png", "small01.png"]
    assert len(list((out / "error_maps").iterdir())) == 2
    kv = parse_kv((out / "report.txt").read_text())
    assert kv["frames"] == "2" and kv["evaluation"] == "strict"
    # oracle: run the library directly on the same files
    cfg = PipelineConfig(slic_superpixel_counts=(150,))
    reports = []
    for files in discover_frames(two_frames):
        frame = load_frame(files)
        dense = compose_pipeline(frame, cfg)
        reports.append(evaluate(dense, frame.ground_truth))
        assert read_depth_png(out / "dense" / f"{files.frame_id}.png").valid.all()
    pooled = ErrorReport.pooled(reports)
    for key, attr in [("mae_mm", "mae"), ("rmse_mm", "rmse"), ("imae_per_km", "imae"),
                      ("irmse_per_km", "irmse")]:
        assert float(kv[key]) == pytest.approx(getattr(pooled, attr), abs=1e-6)
    assert "pooled" in capsys.readouterr().out
    timing = (out / "timing.txt").read_text().splitlines()
    assert timing[0].split()[1:-1] == ["filter", "segment", "fit", "interpolate", "fuse", "fill"]
    assert len(timing) == 4


def test_fill_none_is_diagnostic(two_frames, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["complete", str(two_frames), str(out), "--fill", "none", *FAST]) == 0
    kv = parse_kv((out / "report.txt").read_text())
    assert kv["evaluation"] == "diagnostic"
    assert 0.9 < float(kv["coverage"]) < 1
    # measurements were quantised to the PNG lattice, planes stay within a few mm
    assert float(kv["mae_mm"]) < 5
    assert cli.main(["complete", str(two_frames), str(out), "--fill", "none", "--strict-eval",
                     *FAST]) == 1


def test_missing_intrinsics_fails(two_frames, tmp_path):
    (two_frames / "intrinsics" / "small01.txt").unlink()
    res = subprocess.run([sys.executable, "-m", "densify", "complete", str(two_frames),
                          str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 1
    assert "no intrinsics for frame small01" in res.stderr and res.stdout == ""


def test_bad_config_and_env(two_frames, tmp_path, monkeypatch):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("tau_rel = 7\n")
    assert cli.main(["complete", str(two_frames), str(tmp_path / "o"), "--config", str(cfg)]) == 1
    assert cli.main(["complete", str(two_frames), str(tmp_path / "o"), "--resolutions", "a,b"]) == 1
    monkeypatch.setenv("DENSIFY_THREADS", "zero")
    assert cli.main(["complete", str(two_frames), str(tmp_path / "o")]) == 1


def test_invariant_violation_exit_code(two_frames, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise InvariantViolation("boom")
    monkeypatch.setattr(cli, "compose_pipeline", broken)
    assert cli.main(["complete", str(two_frames), str(tmp_path / "o")]) == 2


def test_flags_reach_the_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("tau_N = 1.3\nslic_iterations = 3\n")
    args = cli.make_parser().parse_args(
        ["complete", "i", "o", "--config", str(cfg), "--fill", "morph", "--colorspace", "gray",
         "--slic-iters", "20", "--resolutions", "600,1100,1600", "--refine", "--no-hull",
         "--seed", "9"])
    c = cli.build_config(args)
    assert (c.tau_N, c.slic_iterations, c.fill_method, c.colorspace) == (1.3, 20, "morph", "gray")
    assert c.slic_superpixel_counts == (600, 1100, 1600)
    assert c.refine_loss and not c.use_convex_hull and c.rng_seed == 9


def test_ablation_table(two_frames, tmp_path, capsys):
    sweep = tmp_path / "sweep.txt"
    sweep.write_text("# label: overrides\nslic-iter 3: slic_iterations = 3\n"
                     "gray: colorspace = gray; slic_iterations = 20\n")
    assert cli.main(["ablate", str(two_frames), str(sweep), *FAST]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "dMAE" in lines[0] and "dRMSE" in lines[0] and "dTime" in lines[0]
    assert [l.split()[0] for l in lines[1:]] == ["baseline", "slic-iter", "gray"]
    assert len(lines[1].split()) == 6 and len(lines[2].split()) == 12
    sweep.write_text("")
    assert cli.main(["ablate", str(two_frames), str(sweep), *FAST]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2
    sweep.write_text("no colon here\n")
    assert cli.main(["ablate", str(two_frames), str(sweep)]) == 1


def test_render_then_complete_in_parallel(tmp_path, monkeypatch):
    root = tmp_path / "in"
    for seed in range(3):
        save_frame(render(small_scene(seed, noise_mm=20.0)), root)
    runs = {}
    for threads in ("1", "3"):
        monkeypatch.setenv("DENSIFY_THREADS", threads)
        out = tmp_path / f"out{threads}"
        assert cli.main(["complete", str(root), str(out), *FAST]) == 0
        runs[threads] = out
    for p in (runs["1"] / "dense").iterdir():
        assert p.read_bytes() == (runs["3"] / "dense" / p.name).read_bytes()
    assert (runs["1"] / "report.txt").read_bytes() == (runs["3"] / "report.txt").read_bytes()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "densify", "render", str(tmp_path / "r")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert len(list((tmp_path / "r" / "velodyne_raw").iterdir())) == 10
