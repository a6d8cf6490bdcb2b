"""Batch driver.

    densify complete INPUT_DIR OUTPUT_DIR [options]
    densify ablate INPUT_DIR SWEEP_FILE [options]
    densify render OUTPUT_DIR [SCENE ...]

``complete`` writes ``dense/<frame>.png`` (plus ``error_maps/`` on request),
``report.txt`` (key=value metrics, deterministic) and ``timing.txt`` (wall
clock per frame and stage).  ``ablate`` runs the baseline configuration and
every line of the sweep file, printing one row per configuration.  A sweep
line is ``label: key = value; key = value`` with keys from the config file.

DENSIFY_THREADS caps the number of worker processes (default: all cores).
Exit codes: 0 ok, 1 input error, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .core import PipelineConfig, format_config, load_config, parse_config
from .errors import ConfigError, DensifyError, EmptyGroundTruth, InputError, InvariantViolation
from .kitti_io import FrameFiles, discover_frames, load_frame, save_frame, write_depth_png, \
    write_error_map
from .metrics import ErrorReport, evaluate, format_kv, format_table
from .pipeline import STAGES, StageTimer, compose_pipeline
from .synth import bundled_scenes, load_scene, render

log = logging.getLogger("densify")


@dataclass
class FrameResult:
    frame_id: str
    report: ErrorReport | None
    seconds: dict
    stats: dict


def thread_count() -> int:
    env = os.environ.get("DENSIFY_THREADS", "").strip()
    if not env:
        return os.cpu_count() or 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"DENSIFY_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("DENSIFY_THREADS must be >= 1")
    return n


def _process(files: FrameFiles, cfg: PipelineConfig, strict: bool, out_dir: Path | None,
             error_maps: bool) -> FrameResult:
    frame = load_frame(files)
    timer = StageTimer()
    stats = {}
    dense = compose_pipeline(frame, cfg, timer=timer, stats=stats)
    report = None
    if frame.ground_truth is not None:
        report = evaluate(dense, frame.ground_truth, strict=strict)
    if out_dir is not None:
        write_depth_png(dense, out_dir / "dense" / f"{files.frame_id}.png")
        if error_maps and frame.ground_truth is not None:
            write_error_map(dense, frame.ground_truth, out_dir / "error_maps" / f"{files.frame_id}.png")
    return FrameResult(files.frame_id, report, dict(timer.seconds), stats)


def _process_star(args):
    return _process(*args)


def run_frames(frames, cfg, *, strict, out_dir=None, error_maps=False, threads=None):
    """Complete all frames; results come back in frame order whatever the pool size."""
    threads = min(threads or thread_count(), len(frames))
    jobs = [(f, cfg, strict, out_dir, error_maps) for f in frames]
    results = []
    if threads <= 1:
        it = map(_process_star, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=threads)
        it = pool.map(_process_star, jobs)
    try:
        for i, res in enumerate(it, 1):
            total = sum(res.seconds.values())
            log.info("[%d/%d] %s  %.2fs", i, len(frames), res.frame_id, total)
            results.append(res)
    finally:
        if threads > 1:
            pool.shutdown(cancel_futures=True)
    return results


def pooled_report(results) -> ErrorReport | None:
    scored = [r for r in results if r.report is not None]
    if not scored:
        return None
    return ErrorReport.pooled([r.report for r in scored], [r.frame_id for r in scored])


def format_timing(results) -> str:
    lines = ["frame " + " ".join(STAGES) + " total"]
    sums = dict.fromkeys(STAGES, 0.0)
    for r in results:
        for s in STAGES:
            sums[s] += r.seconds[s]
        lines.append(r.frame_id + " " + " ".join(f"{r.seconds[s]:.4f}" for s in STAGES)
                     + f" {sum(r.seconds.values()):.4f}")
    n = max(len(results), 1)
    lines.append("mean " + " ".join(f"{sums[s] / n:.4f}" for s in STAGES)
                 + f" {sum(sums.values()) / n:.4f}")
    return "\n".join(lines) + "\n"


def run_complete(input_dir, output_dir, cfg: PipelineConfig, *, strict: bool = True,
                 error_maps: bool = False, threads: int | None = None) -> ErrorReport | None:
    """Complete every frame of a KITTI-layout directory and write the outputs."""
    frames = discover_frames(input_dir)
    out = Path(output_dir)
    (out / "dense").mkdir(parents=True, exist_ok=True)
    log.info("%d frames, %s evaluation", len(frames), "strict" if strict else "diagnostic")
    results = run_frames(frames, cfg, strict=strict, out_dir=out, error_maps=error_maps,
                         threads=threads)
    pooled = pooled_report(results)
    extra = {"frames": len(results), "evaluation": "strict" if strict else "diagnostic"}
    if pooled is None:
        text = "".join(f"{k}={v}\n" for k, v in extra.items()) + "ground_truth=none\n"
    else:
        text = format_kv(pooled, extra)
        for name, r in pooled.per_frame.items():
            text += "".join(f"{name}.{line}\n" for line in format_kv(r).splitlines())
    (out / "report.txt").write_text(text)
    (out / "config.cfg").write_text(format_config(cfg))
    (out / "timing.txt").write_text(format_timing(results))
    if pooled is not None:
        sys.stdout.write(format_table(pooled))
    return pooled


# ---------------------------------------------------------------------------
# ablation

def parse_sweep(text: str, base: PipelineConfig) -> list[tuple[str, PipelineConfig]]:
    """``label: key = value; key = value`` per line; blank lines and # comments skipped."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        label, sep, body = line.partition(":")
        if not sep or not label.strip():
            raise ConfigError(f"sweep line {lineno}: expected 'label: key = value; ...'")
        try:
            cfg = parse_config(body.replace(";", "\n"), base)
        except ConfigError as exc:
            raise ConfigError(f"sweep line {lineno}: {exc}") from None
        out.append((label.strip(), cfg))
    return out


@dataclass
class AblationRow:
    label: str
    report: ErrorReport
    seconds: float            # mean wall clock per frame


def run_ablation(input_dir, sweep_text: str, base: PipelineConfig, *, strict: bool = True,
                 threads: int | None = None) -> list[AblationRow]:
    """Baseline row followed by one row per sweep entry."""
    frames = discover_frames(input_dir)
    if not any(f.ground_truth is not None for f in frames):
        raise EmptyGroundTruth(f"{input_dir}: ablation needs ground truth")
    rows = []
    for label, cfg in [("baseline", base)] + parse_sweep(sweep_text, base):
        log.info("ablation: %s", label)
        results = run_frames(frames, cfg, strict=strict and cfg.fill_method != "none",
                             threads=threads)
        wall = sum(sum(r.seconds.values()) for r in results)
        rows.append(AblationRow(label, pooled_report(results), wall / len(results)))
    return rows


def format_ablation(rows: list[AblationRow]) -> str:
    head = (f"{'config':<24}{'MAE':>10}{'RMSE':>10}{'iMAE':>8}{'iRMSE':>8}{'Time[s]':>9}"
            f"{'dMAE':>10}{'dRMSE':>10}{'diMAE':>8}{'diRMSE':>8}{'dTime':>8}")
    lines = [head]
    b = rows[0]
    for r in rows:
        m = r.report
        line = (f"{r.label[:24]:<24}{m.mae:>10.2f}{m.rmse:>10.2f}{m.imae:>8.3f}{m.irmse:>8.3f}"
                f"{r.seconds:>9.3f}")
        if r is not b:
            line += (f"{m.mae - b.report.mae:>+10.2f}{m.rmse - b.report.rmse:>+10.2f}"
                     f"{m.imae - b.report.imae:>+8.3f}{m.irmse - b.report.irmse:>+8.3f}"
                     f"{r.seconds - b.seconds:>+8.3f}")
        lines.append(line)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------

def render_scenes(output_dir, scene_paths=None) -> int:
    """Write synthetic scenes (bundled ones by default) in the KITTI layout."""
    paths = [Path(p) for p in scene_paths] if scene_paths else bundled_scenes()
    for p in paths:
        save_frame(render(load_scene(p)), output_dir)
    return len(paths)


def build_config(args) -> PipelineConfig:
    cfg = load_config()
    if args.config:
        cfg = load_config(args.config, cfg)
    changes = {}
    if args.fill:
        changes["fill_method"] = args.fill.replace("-", "_")
    if args.colorspace:
        changes["colorspace"] = args.colorspace
    if args.slic_iters is not None:
        changes["slic_iterations"] = args.slic_iters
    if args.resolutions:
        try:
            changes["slic_superpixel_counts"] = tuple(int(x) for x in args.resolutions.split(","))
        except ValueError:
            raise ConfigError(f"--resolutions expects integers a,b,c, got {args.resolutions!r}") \
                from None
    if args.refine:
        changes["refine_loss"] = True
    if args.no_hull:
        changes["use_convex_hull"] = False
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _pipeline_options(p):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--fill", choices=("nn-jbf", "morph", "none"))
    p.add_argument("--colorspace", choices=("lab", "gray"))
    p.add_argument("--slic-iters", type=int, metavar="N")
    p.add_argument("--resolutions", metavar="a,b,c", help="superpixel count per segmentation")
    p.add_argument("--refine", action="store_true", help="minimise the interpolation loss")
    p.add_argument("--no-hull", action="store_true", help="disable the RANSAC/convex-hull fallback")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--strict-eval", action="store_true",
                   help="fail on missing predictions even with --fill none")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densify", description="Guided LiDAR depth completion.")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    c = sub.add_parser("complete", help="complete a KITTI-layout directory")
    c.add_argument("input_dir")
    c.add_argument("output_dir")
    c.add_argument("--emit-error-maps", action="store_true")
    _pipeline_options(c)
    a = sub.add_parser("ablate", help="compare config variants on a directory")
    a.add_argument("input_dir")
    a.add_argument("sweep", help="sweep file, one 'label: key = value; ...' per line")
    _pipeline_options(a)
    r = sub.add_parser("render", help="write synthetic scenes as a KITTI-layout directory")
    r.add_argument("output_dir")
    r.add_argument("scenes", nargs="*", help=".scene files (default: bundled scenes)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "render":
            n = render_scenes(args.output_dir, args.scenes)
            log.info("wrote %d frames to %s", n, args.output_dir)
            return 0
        cfg = build_config(args)
        strict = args.strict_eval or cfg.fill_method != "none"
        if args.command == "complete":
            run_complete(args.input_dir, args.output_dir, cfg, strict=strict,
                         error_maps=args.emit_error_maps)
        else:
            sweep = Path(args.sweep).read_text()
            sys.stdout.write(format_ablation(run_ablation(args.input_dir, sweep, cfg, strict=strict)))
    except InputError as exc:
        log.error("%s", exc)
        return 1
    except InvariantViolation as exc:
        log.error("invariant violated: %s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 1
    except DensifyError as exc:
        log.error("internal error: %s", exc)
        return 2
    return 0
