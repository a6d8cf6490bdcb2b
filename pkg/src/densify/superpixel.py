"""Colour conversion, SLIC oversegmentation and superpixel admission."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from skimage import color as skcolor
from skimage import measure

from .core import DepthMap, PipelineConfig
from .errors import DimensionMismatch, ImageTooSmall


def to_lab(rgb) -> np.ndarray:
    """8-bit sRGB (H x W x 3) to CIELAB under D65, float64."""
    rgb = np.asarray(rgb)
    if rgb.dtype == np.uint8:
        rgb = rgb.astype(np.float64) / 255.0
    return skcolor.rgb2lab(rgb, illuminant="D65", observer="2")


def to_working_space(rgb, colorspace: str = "lab") -> np.ndarray:
    """Image used for segmentation and fill guidance: H x W x 3 Lab or H x W x 1 L."""
    lab = to_lab(rgb)
    if colorspace == "gray":
        return lab[..., :1].copy()
    if colorspace != "lab":
        raise ValueError(f"unknown colorspace {colorspace!r}")
    return lab


@dataclass(eq=False)
class Superpixel:
    id: int
    pixels: np.ndarray                      # (n, 2) int, columns (u, v)
    known: np.ndarray = None                # (m, 2) pixels with a LiDAR depth
    known_depth: np.ndarray = None          # (m,) mm
    unknown: np.ndarray = None              # (n - m, 2)
    admissible: bool = False

    def __post_init__(self):
        if self.known is None:
            self.known = np.empty((0, 2), dtype=np.int64)
            self.known_depth = np.empty(0)
            self.unknown = self.pixels

    @property
    def size(self) -> int:
        return len(self.pixels)


@dataclass(eq=False)
class SuperpixelMap:
    labels: np.ndarray                      # H x W int
    superpixels: list[Superpixel]
    energy_history: list[float] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.superpixels)


def _grid_shape(k: int, height: int, width: int) -> tuple[int, int]:
    nx = max(1, min(width, round(math.sqrt(k * width / height))))
    ny = max(1, min(height, round(k / nx)))
    return nx, ny


def _gradient(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (gx ** 2).sum(-1) + (gy ** 2).sum(-1)


# 3x3 seed perturbation; centre first so flat images keep the exact grid
_PERTURB = [(0, 0)] + [(dv, du) for dv in (-1, 0, 1) for du in (-1, 0, 1) if (dv, du) != (0, 0)]


def _seed_centers(img, nx, ny):
    H, W, _ = img.shape
    grad = _gradient(img)
    sx, sy = W / nx, H / ny
    seeds = []
    for j in range(ny):
        for i in range(nx):
            u = min(W - 1, int((i + 0.5) * sx))
            v = min(H - 1, int((j + 0.5) * sy))
            best, bu, bv = np.inf, u, v
            for dv, du in _PERTURB:
                uu, vv = u + du, v + dv
                if 0 <= uu < W and 0 <= vv < H and grad[vv, uu] < best:
                    best, bu, bv = grad[vv, uu], uu, vv
            seeds.append((bu, bv))
    seeds = np.array(seeds, dtype=np.float64)
    cols = img[seeds[:, 1].astype(int), seeds[:, 0].astype(int)]
    return np.hstack([cols, seeds])


@numba.njit(cache=True)
def _energy(img, centers, labels, weight):
    H, W, C = img.shape
    out = np.empty((H, W))
    for v in range(H):
        for u in range(W):
            j = labels[v, u]
            d = 0.0
            for c in range(C):
                t = img[v, u, c] - centers[j, c]
                d += t * t
            du = u - centers[j, C]
            dv = v - centers[j, C + 1]
            out[v, u] = d + weight * (du * du + dv * dv)
    return out


@numba.njit(cache=True)
def _assign(img, centers, labels, dist, S, weight):
    """Give every pixel the nearest centre among those whose 2S x 2S window covers it.

    ``dist`` holds the distance to the current label; only strictly better
    centres take over, lower centre index first.
    """
    H, W, C = img.shape
    for j in range(centers.shape[0]):
        cu = centers[j, C]
        cv = centers[j, C + 1]
        u0 = max(0, math.ceil(cu - S))
        u1 = min(W, math.floor(cu + S) + 1)
        v0 = max(0, math.ceil(cv - S))
        v1 = min(H, math.floor(cv + S) + 1)
        for v in range(v0, v1):
            dv = (v - cv) * (v - cv)
            for u in range(u0, u1):
                d = 0.0
                for c in range(C):
                    t = img[v, u, c] - centers[j, c]
                    d += t * t
                du = u - cu
                d += weight * (du * du + dv)
                if d < dist[v, u]:
                    dist[v, u] = d
                    labels[v, u] = j


@numba.njit(cache=True)
def _update(img, centers, labels):
    H, W, C = img.shape
    K = centers.shape[0]
    sums = np.zeros((K, C + 2))
    counts = np.zeros(K, dtype=np.int64)
    for v in range(H):
        for u in range(W):
            j = labels[v, u]
            counts[j] += 1
            for c in range(C):
                sums[j, c] += img[v, u, c]
            sums[j, C] += u
            sums[j, C + 1] += v
    for j in range(K):
        if counts[j] > 0:
            for c in range(C + 2):
                centers[j, c] = sums[j, c] / counts[j]


def _enforce_connectivity(labels: np.ndarray, min_size: int) -> np.ndarray:
    """Split labels into 4-connected parts; absorb parts below min_size.

    An under-sized part joins the largest adjacent part (ties: lower id).
    """
    comp = measure.label(labels, background=-1, connectivity=1)  # ids from 1, raster order
    n = int(comp.max())
    size = np.bincount(comp.ravel(), minlength=n + 1).astype(np.int64)
    parent = np.arange(n + 1)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    small = np.flatnonzero(size[1:] < min_size) + 1
    if len(small) and n > 1:
        pairs = [np.stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()], 1),
                 np.stack([comp[:-1, :].ravel(), comp[1:, :].ravel()], 1)]
        pairs = np.concatenate(pairs)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        pairs = np.sort(pairs, axis=1)
        codes = np.unique(pairs[:, 0] * (n + 1) + pairs[:, 1])
        adj = {}
        for a, b in zip((codes // (n + 1)).tolist(), (codes % (n + 1)).tolist()):
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        for o in sorted(small.tolist(), key=lambda c: (size[c], c)):
            r = find(o)
            if size[r] >= min_size:
                continue
            nbrs = {find(x) for x in adj.get(r, ())} - {r}
            if not nbrs:
                continue
            t = min(nbrs, key=lambda c: (-size[c], c))
            parent[r] = t
            size[t] += size[r]
            adj.setdefault(t, set()).update(adj.pop(r, set()))
    roots = np.array([find(c) for c in range(n + 1)])
    _, inverse = np.unique(roots, return_inverse=True)  # roots[0] == 0 is not a part
    return inverse.ravel()[comp] - 1


def _group_pixels(labels: np.ndarray) -> list[np.ndarray]:
    W = labels.shape[1]
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    groups = []
    for i in range(len(counts)):
        idx = order[bounds[i]:bounds[i + 1]]
        groups.append(np.stack([idx % W, idx // W], axis=1))
    return groups


def slic(image, k: int, iters: int = 5, compactness: float = 10.0) -> SuperpixelMap:
    """Simple linear iterative clustering.

    Parameters
    ----------
    image : (H, W, C) array
        Working-space image (Lab or L).
    k : int
        Target number of superpixels.
    iters : int
        Assignment/update rounds.
    compactness : float
        Weight ``m`` of the spatial term; the combined squared distance is
        ``d_color^2 + (m / S)^2 d_xy^2`` with grid step ``S``.

    The returned map carries the clustering energy after every round; it is
    non-increasing because each pixel may always keep its current centre.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    H, W, C = img.shape
    if k < 1 or iters < 1:
        raise ValueError("k and iters must be >= 1")
    if k > H * W:
        raise ImageTooSmall(f"{k} superpixels requested for {H * W} pixels")
    nx, ny = _grid_shape(k, H, W)
    S = math.sqrt((W / nx) * (H / ny))
    weight = (compactness / S) ** 2
    centers = _seed_centers(img, nx, ny)
    labels = np.zeros((H, W), dtype=np.int64)
    dist = np.full((H, W), np.inf)
    history = []
    for it in range(iters):
        if it > 0:
            dist = _energy(img, centers, labels, weight)
        _assign(img, centers, labels, dist, S, weight)
        _update(img, centers, labels)
        history.append(float(_energy(img, centers, labels, weight).sum()))

    labels = _enforce_connectivity(labels, max(1, int(S * S / 4)))
    sps = [Superpixel(i, px) for i, px in enumerate(_group_pixels(labels))]
    return SuperpixelMap(labels, sps, history)


def bind_depths(sp: SuperpixelMap, filtered: DepthMap, cfg: PipelineConfig) -> SuperpixelMap:
    """Split every superpixel into known/unknown pixels and set admission.

    Admissible: at least ``cfg.tau_m_min_points`` measurements, spanning >= 2 px
    in both the row and the column direction.
    """
    if sp.labels.shape != filtered.shape:
        raise DimensionMismatch(f"labels {sp.labels.shape} vs depth {filtered.shape}")
    d = filtered.values
    out = []
    for s in sp.superpixels:
        px = s.pixels
        z = d[px[:, 1], px[:, 0]]
        m = z > 0
        known = px[m]
        admissible = bool(
            len(known) >= cfg.tau_m_min_points
            and np.ptp(known[:, 0]) >= 2
            and np.ptp(known[:, 1]) >= 2
        )
        out.append(Superpixel(s.id, px, known, z[m], px[~m], admissible))
    return SuperpixelMap(sp.labels, out, list(sp.energy_history))


def boundary_overlay(rgb, labels, color=(255, 0, 0)) -> np.ndarray:
    """Copy of ``rgb`` with superpixel boundaries painted in ``color``."""
    out = np.array(rgb, dtype=np.uint8, copy=True)
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edge[:-1, :] |= labels[:-1, :] != labels[1:, :]
    out[edge] = color
    return out
