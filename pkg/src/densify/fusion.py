"""Fusing tentative depth maps and filling what no plane reached."""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .core import DepthMap, PipelineConfig
from .errors import DimensionMismatch, EmptyInput


def median_fuse(maps) -> DepthMap:
    """Per-pixel median over the maps that have a value there.

    With an even number of values the lower middle one is taken, so the
    result is always one of the inputs.
    """
    maps = list(maps)
    if not maps:
        raise ValueError("nothing to fuse")
    if len(maps) == 1:
        return maps[0]
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise DimensionMismatch("tentative maps differ in size")
    stack = np.stack([np.where(m.valid, m.values, np.nan) for m in maps])
    stack.sort(axis=0)                       # NaN last
    count = np.isfinite(stack).sum(0)
    idx = np.maximum(count - 1, 0) // 2
    med = np.take_along_axis(stack, idx[None], axis=0)[0]
    return DepthMap(np.where(count > 0, med, 0.0))


def fill_nn_jbf(partial: DepthMap, guide, cfg: PipelineConfig | None = None, *,
                neighbors: int | None = None, sigma_spatial: float | None = None,
                sigma_color: float | None = None) -> DepthMap:
    """Joint bilateral fill over the K nearest measured pixels.

    Every missing pixel gets ``sum(w z) / sum(w)`` over its K spatially nearest
    measurements with ``w = exp(-d_xy^2 / 2 s_s^2 - d_col^2 / 2 s_c^2)``, the
    colour distance taken in the guide image.  Measured pixels are kept.
    """
    cfg = cfg or PipelineConfig()
    k = neighbors or cfg.jbf_neighbors
    ss = sigma_spatial or cfg.jbf_sigma_spatial
    sc = sigma_color or cfg.jbf_sigma_color
    guide = np.asarray(guide, dtype=np.float64)
    if guide.ndim == 2:
        guide = guide[..., None]
    if guide.shape[:2] != partial.shape:
        raise DimensionMismatch(f"guide {guide.shape[:2]} vs depth {partial.shape}")
    d = partial.values
    valid = d > 0
    if not valid.any():
        raise EmptyInput("no measurement to fill from")
    holes = ~valid
    if not holes.any():
        return partial
    sv, su = np.nonzero(valid)
    hv, hu = np.nonzero(holes)
    k = min(k, len(sv))
    tree = cKDTree(np.stack([su, sv], 1).astype(np.float64))
    dist, idx = tree.query(np.stack([hu, hv], 1).astype(np.float64), k=k)
    if k == 1:
        dist, idx = dist[:, None], idx[:, None]
    dcol = ((guide[hv, hu][:, None, :] - guide[sv[idx], su[idx]]) ** 2).sum(-1)
    logw = -dist ** 2 / (2 * ss * ss) - dcol / (2 * sc * sc)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    z = (w * d[sv[idx], su[idx]]).sum(1) / w.sum(1)
    out = d.copy()
    out[hv, hu] = z
    return DepthMap(out)


def fill_morphological(partial: DepthMap, cfg: PipelineConfig | None = None) -> DepthMap:
    """Grow measurements outward one pixel ring (3x3) at a time until dense.

    Each pixel takes the smallest depth among its newly reached neighbours,
    i.e. the nearest measurement in chessboard distance with ties going to
    the closer depth.
    """
    d = np.where(partial.valid, partial.values, np.inf)
    if not np.isfinite(d).any():
        raise EmptyInput("no measurement to fill from")
    while True:
        holes = ~np.isfinite(d)
        if not holes.any():
            break
        grown = ndimage.grey_erosion(d, size=(3, 3), mode="constant", cval=np.inf)
        d = np.where(holes, grown, d)
    return DepthMap(d)


def fill(partial: DepthMap, guide, cfg: PipelineConfig) -> DepthMap:
    if cfg.fill_method == "nn_jbf":
        return fill_nn_jbf(partial, guide, cfg)
    if cfg.fill_method == "morph":
        return fill_morphological(partial, cfg)
    return partial
