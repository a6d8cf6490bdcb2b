"""Synthetic piecewise-planar scenes rendered through a pinhole camera.

Scene file format (one directive per line, ``#`` comments)::

    size 1216 352                   # width height
    camera 721.5 721.5 609.6 172.9  # fx fy cx cy  (or 12 reals of P)
    scan 4 2 0                      # row step, column stride, first row
    noise 0                         # depth noise sigma, mm
    outliers 0                      # fraction of samples with a wrong depth
    misalign 0                      # px, see inject_misalignment
    seed 0
    patch A B C D ; R G B [; u0 v0 u1 v1 ...]

A patch is the plane ``A X + B Y + C Z + D = 0`` (metres) painted with colour
RGB over the polygon (image coordinates, whole image when omitted).  Later
patches are painted over earlier ones; every pixel must be covered.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from skimage.draw import polygon2mask

from .core import CameraModel, DepthMap, counter_rng
from .errors import PatchBehindCamera, SceneError
from .interpolate import plane_depth
from .kitti_io import FrameBundle


@dataclass(frozen=True, eq=False)
class Patch:
    plane: tuple[float, float, float, float]
    color: tuple[int, int, int]
    polygon: tuple[tuple[float, float], ...] | None = None   # (u, v) vertices


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    width: int
    height: int
    camera: CameraModel
    patches: tuple[Patch, ...]
    scan_row_step: int = 4
    scan_col_stride: int = 2
    scan_row_offset: int = 0
    noise_mm: float = 0.0
    outlier_fraction: float = 0.0
    misalign_px: int = 0
    seed: int = 0
    name: str = "scene"
    extra: dict = field(default_factory=dict)

    def replace(self, **changes) -> SyntheticScene:
        return dataclasses.replace(self, **changes)

    @property
    def scan_pattern(self) -> list[tuple[int, int]]:
        """(row, column stride) of every emulated LiDAR layer."""
        rows = range(self.scan_row_offset, self.height, self.scan_row_step)
        return [(r, self.scan_col_stride) for r in rows]


def patch_ids(scene: SyntheticScene) -> np.ndarray:
    ids = np.full((scene.height, scene.width), -1, dtype=np.int64)
    for i, p in enumerate(scene.patches):
        if p.polygon is None:
            ids[:] = i
        else:
            rc = np.array([(v, u) for u, v in p.polygon], dtype=np.float64)
            ids[polygon2mask((scene.height, scene.width), rc)] = i
    if (ids < 0).any():
        raise SceneError(f"{scene.name}: {(ids < 0).sum()} pixels are not covered by any patch")
    return ids


def ground_truth(scene: SyntheticScene, ids: np.ndarray | None = None) -> np.ndarray:
    ids = patch_ids(scene) if ids is None else ids
    gt = np.zeros((scene.height, scene.width))
    for i, p in enumerate(scene.patches):
        vv, uu = np.nonzero(ids == i)
        if len(vv) == 0:
            continue
        z = plane_depth(np.array(p.plane, dtype=np.float64), scene.camera, np.stack([uu, vv], 1))
        if not np.all(np.isfinite(z) & (z > 0)):
            raise PatchBehindCamera(f"{scene.name}: patch {i} is not in front of the camera")
        gt[vv, uu] = z
    return gt


def render(scene: SyntheticScene) -> FrameBundle:
    """RGB, dense ground truth and LiDAR-like sparse samples of a scene."""
    ids = patch_ids(scene)
    gt = ground_truth(scene, ids)
    colors = np.array([p.color for p in scene.patches], dtype=np.uint8)
    rgb = colors[ids]
    scan = np.zeros(gt.shape, dtype=bool)
    scan[scene.scan_row_offset::scene.scan_row_step, ::scene.scan_col_stride] = True
    sparse = np.where(scan, gt, 0.0)
    if scene.noise_mm > 0 or scene.outlier_fraction > 0:
        rng = counter_rng(scene.seed, scene.name, "samples")
        vv, uu = np.nonzero(scan)
        z = sparse[vv, uu]
        if scene.noise_mm > 0:
            z = z + rng.normal(0.0, scene.noise_mm, len(z))
        if scene.outlier_fraction > 0:
            hit = rng.random(len(z)) < scene.outlier_fraction
            z = np.where(hit, z * rng.uniform(0.5, 2.0, len(z)), z)
        sparse[vv, uu] = np.maximum(z, 0.0)
    frame = FrameBundle(rgb=rgb, sparse=DepthMap(sparse), cam=scene.camera, frame_id=scene.name,
                        ground_truth=DepthMap(gt))
    if scene.misalign_px:
        frame = inject_misalignment(frame, scene.misalign_px)
    return frame


def inject_misalignment(frame: FrameBundle, offset_px: int, min_ratio: float = 1.5) -> FrameBundle:
    """Move background samples sideways onto nearer surfaces.

    A sample at (u, v) with depth d is moved to (u + j, v), j <= offset_px the
    largest shift whose target has no sample and a ground-truth depth at most
    d / min_ratio.  The shift is thereby clipped to the nearer region.  Samples
    with no such target stay where they are.
    """
    if offset_px <= 0:
        return frame
    if frame.ground_truth is None:
        raise SceneError("misalignment injection needs ground truth")
    gt = frame.ground_truth.values
    sp = np.array(frame.sparse.values, copy=True)
    H, W = sp.shape
    vv, uu = np.nonzero(sp > 0)
    d = sp[vv, uu]
    best = np.zeros(len(d), dtype=np.int64)
    for j in range(1, offset_px + 1):
        tu = uu + j
        inb = tu < W
        tuc = np.minimum(tu, W - 1)
        ok = inb & (gt[vv, tuc] * min_ratio <= d) & (sp[vv, tuc] == 0)
        best = np.where(ok, j, best)
    moved = best > 0
    # sequential writes keep the outcome independent of how collisions are ordered
    for v, u, j, z in zip(vv[moved], uu[moved], best[moved], d[moved]):
        if sp[v, u + j] == 0:
            sp[v, u + j] = z
            sp[v, u] = 0.0
    return dataclasses.replace(frame, sparse=DepthMap(sp))


# ---------------------------------------------------------------------------
# scene files

def _floats(tokens, n=None, what=""):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise SceneError(f"bad number in {what}: {' '.join(tokens)}") from exc
    if n is not None and len(vals) not in (n if isinstance(n, tuple) else (n,)):
        raise SceneError(f"{what} expects {n} numbers, got {len(vals)}")
    return vals


def parse_scene(text: str, name: str = "scene") -> SyntheticScene:
    fields = {"name": name}
    patches = []
    cam_vals = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        tok = rest.split()
        if key == "name":
            fields["name"] = rest.strip()
        elif key == "size":
            w, h = _floats(tok, 2, "size")
            fields["width"], fields["height"] = int(w), int(h)
        elif key == "camera":
            cam_vals = _floats(tok, (4, 12), "camera")
        elif key == "scan":
            vals = [int(v) for v in _floats(tok, (2, 3), "scan")]
            fields["scan_row_step"], fields["scan_col_stride"] = vals[:2]
            if len(vals) == 3:
                fields["scan_row_offset"] = vals[2]
        elif key == "noise":
            fields["noise_mm"] = _floats(tok, 1, "noise")[0]
        elif key == "outliers":
            fields["outlier_fraction"] = _floats(tok, 1, "outliers")[0]
        elif key == "misalign":
            fields["misalign_px"] = int(_floats(tok, 1, "misalign")[0])
        elif key == "seed":
            fields["seed"] = int(_floats(tok, 1, "seed")[0])
        elif key == "patch":
            parts = [p.split() for p in rest.split(";")]
            if len(parts) not in (2, 3):
                raise SceneError(f"line {lineno}: patch needs 'plane ; color [; polygon]'")
            plane = tuple(_floats(parts[0], 4, "patch plane"))
            color = tuple(int(c) for c in _floats(parts[1], 3, "patch color"))
            poly = None
            if len(parts) == 3:
                pv = _floats(parts[2], None, "patch polygon")
                if len(pv) < 6 or len(pv) % 2:
                    raise SceneError(f"line {lineno}: polygon needs >= 3 (u, v) pairs")
                poly = tuple(zip(pv[0::2], pv[1::2]))
            patches.append(Patch(plane, color, poly))
        else:
            raise SceneError(f"line {lineno}: unknown directive {key!r}")
    if "width" not in fields or cam_vals is None or not patches:
        raise SceneError("scene needs size, camera and at least one patch")
    if len(cam_vals) == 4:
        cam = CameraModel.from_intrinsics(*cam_vals)
    else:
        cam = CameraModel(np.array(cam_vals).reshape(3, 4))
    return SyntheticScene(camera=cam, patches=tuple(patches), **fields)


def load_scene(path) -> SyntheticScene:
    path = Path(path)
    return parse_scene(path.read_text(), name=path.stem)


def format_scene(scene: SyntheticScene) -> str:
    P = scene.camera.P
    canonical = P[0, 1] == 0 and P[1, 0] == 0 and np.array_equal(P[2], [0, 0, 1, 0]) \
        and not P[:2, 3].any()
    if canonical:
        cam = " ".join(repr(float(P[i, j])) for i, j in ((0, 0), (1, 1), (0, 2), (1, 2)))
    else:
        cam = " ".join(repr(float(v)) for v in P.ravel())
    lines = [
        f"name {scene.name}",
        f"size {scene.width} {scene.height}",
        f"camera {cam}",
        f"scan {scene.scan_row_step} {scene.scan_col_stride} {scene.scan_row_offset}",
        f"noise {scene.noise_mm!r}",
        f"outliers {scene.outlier_fraction!r}",
        f"misalign {scene.misalign_px}",
        f"seed {scene.seed}",
    ]
    for p in scene.patches:
        s = "patch " + " ".join(repr(float(c)) for c in p.plane) + " ; " + " ".join(map(str, p.color))
        if p.polygon is not None:
            s += " ; " + " ".join(f"{float(u)!r} {float(v)!r}" for u, v in p.polygon)
        lines.append(s)
    return "\n".join(lines) + "\n"


def save_scene(scene: SyntheticScene, path) -> None:
    Path(path).write_text(format_scene(scene))


def bundled_scenes() -> list[Path]:
    """The versioned regression scenes shipped with the package."""
    from importlib import resources
    root = resources.files("densify").joinpath("data/scenes")
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".scene"))
