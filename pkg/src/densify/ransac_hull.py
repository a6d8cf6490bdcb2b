"""RANSAC fallback for superpixels a single TLS plane does not explain.

Hypotheses are exact 3-point planes.  A known pixel is an inlier when its
interpolation loss ``1/2 (Z_lid - Z_int)^2`` is at most
``cfg.tau_ransac_inlier``.  The winner has the most inliers; ties go to the
smallest ``rho = mean(loss^2)`` over the inliers, then to the lowest
hypothesis index.  Only the convex hull of the winner's inlier pixels is
interpolated.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import CameraModel, PipelineConfig, Plane, counter_rng
from .errors import DegenerateHull
from .interpolate import PARALLEL_PENALTY, interpolate_pixels
from .plane_fit import backproject_known, three_point_coeffs


@dataclass(eq=False)
class HypothesisScore:
    plane: Plane
    inliers: np.ndarray      # indices into the superpixel's known pixels
    losses: np.ndarray       # per-inlier loss, mm^2
    rho: float
    index: int = 0           # position among the evaluated hypotheses

    @property
    def count(self) -> int:
        return len(self.inliers)


@dataclass(eq=False)
class ConvexHullRegion:
    vertices: np.ndarray     # (k, 2) int (u, v), counter-clockwise in image coordinates
    pixels: np.ndarray | None = None


def hypothesis_triples(n: int, iterations: int, rng=None) -> np.ndarray:
    """Index triples to evaluate: all of them when few enough, else a seeded draw."""
    if n < 3:
        return np.empty((0, 3), dtype=np.int64)
    if math.comb(n, 3) <= iterations:
        return np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
    if rng is None:
        rng = counter_rng(0)
    keys = rng.random((iterations, n))
    return np.sort(np.argsort(keys, axis=1, kind="stable")[:, :3], axis=1)


def score_hypotheses(coeffs, ok, rays, l0, zlid, tau_inlier):
    """Inlier counts and rho for a batch of plane hypotheses."""
    h = len(coeffs)
    counts = np.zeros(h, dtype=np.int64)
    rho = np.full(h, np.inf)
    losses = np.full((h, len(zlid)), np.inf)
    if not ok.any():
        return counts, rho, losses
    beta = coeffs[ok] / np.linalg.norm(coeffs[ok, :3], axis=1, keepdims=True)
    a = beta[:, :3] @ rays.T                                      # (h', n)
    b = beta[:, :3] @ l0 + beta[:, 3]
    parallel = np.abs(a) <= 1e-12 * np.linalg.norm(rays, axis=-1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = -1000.0 * b[:, None] / a
        r = zlid[None, :] - z
        loss = 0.5 * r * r
    loss[parallel | ~np.isfinite(loss)] = PARALLEL_PENALTY
    inl = loss <= tau_inlier
    c = inl.sum(1)
    with np.errstate(invalid="ignore"):
        rh = np.where(c > 0, np.where(inl, loss * loss, 0.0).sum(1) / np.maximum(c, 1), np.inf)
    counts[ok] = c
    rho[ok] = rh
    losses[ok] = loss
    return counts, rho, losses


def ransac_plane(sp, cam: CameraModel, cfg: PipelineConfig, frame_id: str = "",
                 segmentation: int = 0) -> HypothesisScore | None:
    """Best 3-point plane for a superpixel's known pixels, or None."""
    known = np.asarray(sp.known)
    n = len(known)
    if n < 3:
        return None
    pts = backproject_known(cam, known, sp.known_depth)
    rng = counter_rng(cfg.rng_seed, frame_id, segmentation, sp.id)
    triples = hypothesis_triples(n, cfg.ransac_iterations, rng)
    coeffs, ok = three_point_coeffs(pts[triples])
    if not ok.any():
        return None
    rays = cam.ray(known)
    zlid = np.asarray(sp.known_depth, dtype=np.float64)
    counts, rho, losses = score_hypotheses(coeffs, ok, rays, np.asarray(cam.center), zlid,
                                           cfg.tau_ransac_inlier)
    order = np.lexsort((np.arange(len(coeffs)), rho, -counts, ~ok))
    best = int(order[0])
    inl = np.flatnonzero(losses[best] <= cfg.tau_ransac_inlier)
    return HypothesisScore(Plane.from_coeffs(coeffs[best], source="ransac"), inl,
                           losses[best, inl], float(rho[best]), best)


def ransac_validity(score: HypothesisScore, k_size: int, cfg: PipelineConfig) -> bool:
    if k_size < 1:
        raise ValueError("superpixel has no known points")
    p = score.count
    return bool(p >= cfg.tau_abs or p / k_size >= cfg.tau_rel)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexHullRegion:
    """Monotone-chain hull of integer pixel coordinates.

    Vertices are input points, without collinear boundary points, ordered
    counter-clockwise in (u, v) (positive cross products).
    """
    pts = sorted({(int(u), int(v)) for u, v in np.asarray(points).reshape(-1, 2)})
    if len(pts) < 3:
        raise DegenerateHull("fewer than 3 distinct points")
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHull("points are collinear")
    return ConvexHullRegion(np.array(hull, dtype=np.int64))


def inside_hull(region: ConvexHullRegion, pixels) -> np.ndarray:
    """Boolean mask of pixels inside or on the hull (exact integer test)."""
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    vert = region.vertices
    inside = np.ones(len(px), dtype=bool)
    for a, b in zip(vert, np.roll(vert, -1, axis=0)):
        cross = (b[0] - a[0]) * (px[:, 1] - a[1]) - (b[1] - a[1]) * (px[:, 0] - a[0])
        inside &= cross >= 0
    return inside


def rasterize_hull(region: ConvexHullRegion, sp) -> np.ndarray:
    """Pixels of ``sp`` that lie inside or on the hull."""
    px = np.asarray(sp.pixels).reshape(-1, 2)
    if len(px) == 0:
        return px
    return px[inside_hull(region, px)]


def hull_interpolation(sp, score: HypothesisScore, cam: CameraModel, cfg: PipelineConfig):
    """Unknown pixels of ``sp`` inside the inlier hull and their depths (mm).

    Returns ``(pixels, depths)``; empty when the inliers are collinear.
    """
    try:
        region = convex_hull(np.asarray(sp.known)[score.inliers])
    except DegenerateHull:
        return np.empty((0, 2), dtype=np.int64), np.empty(0)
    targets = np.asarray(sp.unknown)[inside_hull(region, sp.unknown)]
    depths, _ = interpolate_pixels(score.plane, cam, targets, cfg.tau_theta)
    return targets, depths
