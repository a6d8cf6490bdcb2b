"""End-to-end completion of one frame."""
from __future__ import annotations

import time
from collections import Counter
from contextlib import contextmanager

import numpy as np

from .artifact_filter import NeighborhoodSpec, suppress_misalignment
from .core import CameraModel, DepthMap, PipelineConfig
from .errors import DegenerateGeometry, InvariantViolation
from .fusion import fill, median_fuse
from .interpolate import assess, interpolate_pixels, refine
from .kitti_io import FrameBundle
from .plane_fit import backproject_known, fit_tls
from .ransac_hull import hull_interpolation, ransac_plane, ransac_validity
from .superpixel import Superpixel, SuperpixelMap, bind_depths, slic, to_working_space

STAGES = ("filter", "segment", "fit", "interpolate", "fuse", "fill")
_EMPTY = (np.empty((0, 2), dtype=np.int64), np.empty(0))


class StageTimer:
    """Accumulates wall-clock seconds per pipeline stage."""

    def __init__(self):
        self.seconds = dict.fromkeys(STAGES, 0.0)

    @contextmanager
    def __call__(self, stage):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[stage] += time.perf_counter() - t0

    @property
    def total(self) -> float:
        return sum(self.seconds.values())


def complete_superpixel(sp: Superpixel, cam: CameraModel, cfg: PipelineConfig, *,
                        frame_id: str = "", segmentation: int = 0, timer=None, counts=None):
    """Pixels of one superpixel to fill and their depths (0 = left unknown).

    TLS plane first; if it fails the validity check, the RANSAC plane restricted
    to the convex hull of its inliers (when enabled).
    """
    timer = timer or StageTimer()
    with timer("fit"):
        pts = backproject_known(cam, sp.known, sp.known_depth)
        try:
            plane = fit_tls(pts)
        except DegenerateGeometry:
            plane = None
        ok = False
        if plane is not None:
            _, _, ok = assess(plane, cam, sp.known, sp.known_depth, cfg)
        if ok:
            if cfg.refine_loss:
                plane = refine(plane, cam, sp.known, sp.known_depth, cfg.refine_max_evals)
            plane = plane.with_validity(True)
    if ok:
        with timer("interpolate"):
            depths, _ = interpolate_pixels(plane, cam, sp.unknown, cfg.tau_theta)
        if counts is not None:
            counts["tls"] += 1
        return sp.unknown, depths
    if not cfg.use_convex_hull:
        if counts is not None:
            counts["rejected"] += 1
        return _EMPTY
    with timer("fit"):
        score = ransac_plane(sp, cam, cfg, frame_id, segmentation)
        accepted = score is not None and ransac_validity(score, len(sp.known), cfg)
    if not accepted:
        if counts is not None:
            counts["rejected"] += 1
        return _EMPTY
    with timer("interpolate"):
        result = hull_interpolation(sp, score, cam, cfg)
    if counts is not None:
        counts["ransac"] += 1
    return result


def complete_segmentation(spm: SuperpixelMap, filtered: DepthMap, cam: CameraModel,
                          cfg: PipelineConfig, *, frame_id: str = "", segmentation: int = 0,
                          timer=None, counts=None) -> DepthMap:
    """Tentative depth map from one oversegmentation; measurements are kept."""
    out = np.array(filtered.values, copy=True)
    for sp in spm.superpixels:
        if not sp.admissible or len(sp.unknown) == 0:
            continue
        px, z = complete_superpixel(sp, cam, cfg, frame_id=frame_id, segmentation=segmentation,
                                    timer=timer, counts=counts)
        hit = z > 0
        out[px[hit, 1], px[hit, 0]] = z[hit]
    return DepthMap(out)


def compose_pipeline(frame: FrameBundle, cfg: PipelineConfig | None = None, *,
                     timer: StageTimer | None = None, stats: dict | None = None) -> DepthMap:
    """Dense (or, with ``fill_method='none'``, partial) depth map for a frame.

    ``timer`` collects per-stage seconds, ``stats`` receives plane counts and
    the coverage before filling.
    """
    cfg = cfg or PipelineConfig()
    timer = timer or StageTimer()
    counts = Counter()
    with timer("filter"):
        filtered = suppress_misalignment(
            frame.sparse, cfg.tau_N, NeighborhoodSpec(cfg.filter_radius_u, cfg.filter_radius_v))
    tentative = []
    with timer("segment"):
        guide = to_working_space(frame.rgb, cfg.colorspace)
    for i, k in enumerate(cfg.slic_superpixel_counts):
        with timer("segment"):
            spm = bind_depths(slic(guide, k, cfg.slic_iterations, cfg.slic_compactness),
                              filtered, cfg)
        tentative.append(complete_segmentation(spm, filtered, frame.cam, cfg,
                                               frame_id=frame.frame_id, segmentation=i,
                                               timer=timer, counts=counts))
    with timer("fuse"):
        fused = median_fuse(tentative)
    with timer("fill"):
        dense = fill(fused, guide, cfg)
    keep = filtered.valid
    if not np.array_equal(dense.values[keep], filtered.values[keep]):
        raise InvariantViolation("a filtered LiDAR measurement was overwritten")
    if stats is not None:
        stats.update(counts)
        stats["filtered_points"] = filtered.count
        stats["coverage_before_fill"] = fused.count / fused.values.size
    return dense
