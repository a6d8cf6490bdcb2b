"""KITTI depth-completion file formats.

Depth PNG: 16-bit grayscale, ``depth_m = raw / 256``, raw 0 = invalid.
Intrinsics: 12 whitespace separated reals (3x4 projection matrix, row major),
optionally prefixed by a ``name:`` label as in KITTI calibration files.  A
file holding only 9 reals is read as ``K`` with ``p4 = 0``; this is what the
depth-completion validation set ships.

Directory layout consumed by the CLI::

    root/velodyne_raw/<name>.png     sparse depth (defines the frame set)
    root/image/<name>.png            RGB
    root/groundtruth/<name>.png      optional (``groundtruth_depth`` also accepted)
    root/intrinsics/<name>.txt       per frame, or root/intrinsics.txt per sequence

KITTI's own file names are matched too: ``velodyne_raw`` in a file name is
swapped for ``image`` / ``groundtruth_depth`` when looking up siblings.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import CameraModel, DepthMap
from .errors import (DepthOverflow, DimensionMismatch, NotFound, ParseError, SingularMatrix,
                     WrongBitDepth, WrongChannelCount)

RAW_PER_M = 256.0
MM_PER_RAW = 1000.0 / RAW_PER_M  # 3.90625, exact in binary
MAX_DEPTH_MM = 65535 * MM_PER_RAW


@dataclass(frozen=True)
class FrameBundle:
    rgb: np.ndarray  # H x W x 3 uint8
    sparse: DepthMap
    cam: CameraModel
    frame_id: str = "frame"
    ground_truth: DepthMap | None = None

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
            raise WrongChannelCount(f"rgb must be H x W x 3 uint8, got {rgb.shape} {rgb.dtype}")
        if rgb.shape[:2] != self.sparse.shape:
            raise DimensionMismatch(f"rgb {rgb.shape[:2]} vs sparse {self.sparse.shape}")
        if self.ground_truth is not None and self.ground_truth.shape != self.sparse.shape:
            raise DimensionMismatch(f"ground truth {self.ground_truth.shape} vs sparse {self.sparse.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.sparse.shape


def read_depth_png(path) -> DepthMap:
    path = Path(path)
    if not path.is_file():
        raise NotFound(f"no such depth map: {path}")
    with Image.open(path) as im:
        if im.mode in ("RGB", "RGBA", "LA", "P", "CMYK", "YCbCr"):
            raise WrongChannelCount(f"{path}: expected single channel, got mode {im.mode}")
        if im.mode in ("1", "L"):
            raise WrongBitDepth(f"{path}: expected 16-bit depth PNG, got 8-bit mode {im.mode}")
        raw = np.array(im)
    if raw.ndim != 2:
        raise WrongChannelCount(f"{path}: expected single channel")
    if raw.dtype != np.uint16:
        # Pillow may hand 16-bit grayscale back as int32 ("I" mode)
        if raw.min() < 0 or raw.max() > 65535:
            raise WrongBitDepth(f"{path}: values outside 16-bit range")
    return DepthMap(raw.astype(np.float64) * MM_PER_RAW)


def quantize_mm(depth_mm) -> np.ndarray:
    """Raw 16-bit values for depths in mm (round to nearest quantum)."""
    d = np.asarray(depth_mm, dtype=np.float64)
    if np.any(d > MAX_DEPTH_MM + MM_PER_RAW / 2):
        raise DepthOverflow(f"depth exceeds the PNG range ({MAX_DEPTH_MM:.3f} mm)")
    return np.rint(d / MM_PER_RAW).astype(np.uint16)


def write_depth_png(depth: DepthMap, path) -> None:
    raw = quantize_mm(depth.values)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raw).save(path, optimize=False)


def read_rgb(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise NotFound(f"no such image: {path}")
    with Image.open(path) as im:
        if im.mode == "RGBA" or im.mode == "P":
            im = im.convert("RGB")
        if im.mode != "RGB":
            raise WrongChannelCount(f"{path}: expected RGB image, got mode {im.mode}")
        return np.array(im, dtype=np.uint8)


def write_rgb(rgb: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path, optimize=False)


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$")


def parse_intrinsics(text: str, key: str | None = None) -> CameraModel:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        label = None
        if ":" in line:
            label, line = (s.strip() for s in line.split(":", 1))
        tokens = line.split()
        if not all(_NUMBER.match(t) for t in tokens):
            if label is not None:
                continue  # non-numeric calib entry, e.g. calib_time
            raise ParseError(f"non-numeric intrinsics entry: {line!r}")
        rows.append((label, [float(t) for t in tokens]))
    if key is not None:
        rows = [r for r in rows if r[0] == key]
    elif any(r[0] is not None for r in rows):
        preferred = [r for r in rows if r[0] in ("P2", "P_rect_02")]
        rows = preferred or [r for r in rows if len(r[1]) in (9, 12)][:1]
    if len(rows) > 1 and all(r[0] is None for r in rows):
        values = [v for r in rows for v in r[1]]
    elif rows:
        values = rows[0][1]
    else:
        values = []
    if len(values) not in (9, 12):
        raise ParseError(f"expected 12 (or 9) reals, found {len(values)}")
    P = np.array(values).reshape(3, -1)
    return CameraModel(P)


def read_intrinsics(path, key: str | None = None) -> CameraModel:
    path = Path(path)
    if not path.is_file():
        raise NotFound(f"no such intrinsics file: {path}")
    try:
        return parse_intrinsics(path.read_text(), key)
    except SingularMatrix:
        raise
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_intrinsics(cam: CameraModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(" ".join(f"{v:.12e}" for v in cam.P.ravel()) + "\n")


# ---------------------------------------------------------------------------
# error maps: |pred - gt| mapped linearly onto the anchors below, saturating
# at max_error_mm; pixels without ground truth are black.

ERROR_COLORMAP = np.array([
    [0.00, 49, 54, 149],
    [0.25, 116, 173, 209],
    [0.50, 254, 224, 144],
    [0.75, 244, 109, 67],
    [1.00, 165, 0, 38],
])


def error_map_rgb(pred: DepthMap, gt: DepthMap, max_error_mm: float = 2000.0) -> np.ndarray:
    if pred.shape != gt.shape:
        raise DimensionMismatch("prediction and ground truth differ in size")
    err = np.abs(pred.values - gt.values)
    t = np.clip(err / max_error_mm, 0.0, 1.0)
    rgb = np.stack([np.interp(t, ERROR_COLORMAP[:, 0], ERROR_COLORMAP[:, c]) for c in (1, 2, 3)],
                   axis=-1)
    rgb[~gt.valid] = 0
    return np.rint(rgb).astype(np.uint8)


def write_error_map(pred: DepthMap, gt: DepthMap, path, max_error_mm: float = 2000.0) -> None:
    write_rgb(error_map_rgb(pred, gt, max_error_mm), path)


# ---------------------------------------------------------------------------
# directory layout

@dataclass(frozen=True)
class FrameFiles:
    frame_id: str
    sparse: Path
    rgb: Path
    intrinsics: Path
    ground_truth: Path | None = None


def _sibling(root: Path, dirnames, name: str, swaps) -> Path | None:
    for d in dirnames:
        for cand in [name] + [name.replace("velodyne_raw", s) for s in swaps if "velodyne_raw" in name]:
            p = root / d / cand
            if p.is_file():
                return p
    return None


def discover_frames(root) -> list[FrameFiles]:
    """Frames under ``root`` sorted by id.  Raises NotFound on missing inputs."""
    root = Path(root)
    sparse_dir = root / "velodyne_raw"
    if not sparse_dir.is_dir():
        raise NotFound(f"{root}: missing velodyne_raw/ directory")
    frames = []
    for sparse in sorted(sparse_dir.glob("*.png")):
        name = sparse.name
        rgb = _sibling(root, ["image"], name, ["image"])
        if rgb is None:
            raise NotFound(f"no RGB image for frame {sparse.stem}")
        gt = _sibling(root, ["groundtruth", "groundtruth_depth"], name, ["groundtruth_depth"])
        txt = Path(name).with_suffix(".txt").name
        intr = _sibling(root, ["intrinsics"], txt, ["image"])
        if intr is None:
            for cand in ("intrinsics.txt", "calib.txt"):
                if (root / cand).is_file():
                    intr = root / cand
                    break
        if intr is None:
            raise NotFound(f"no intrinsics for frame {sparse.stem}")
        frames.append(FrameFiles(sparse.stem, sparse, rgb, intr, gt))
    if not frames:
        raise NotFound(f"{sparse_dir}: no depth maps found")
    return frames


def load_frame(files: FrameFiles) -> FrameBundle:
    gt = read_depth_png(files.ground_truth) if files.ground_truth is not None else None
    return FrameBundle(rgb=read_rgb(files.rgb), sparse=read_depth_png(files.sparse),
                       cam=read_intrinsics(files.intrinsics), frame_id=files.frame_id,
                       ground_truth=gt)


def save_frame(frame: FrameBundle, root) -> None:
    """Write a frame in the layout read by :func:`discover_frames`."""
    root = Path(root)
    name = f"{frame.frame_id}.png"
    write_depth_png(frame.sparse, root / "velodyne_raw" / name)
    write_rgb(frame.rgb, root / "image" / name)
    write_intrinsics(frame.cam, root / "intrinsics" / f"{frame.frame_id}.txt")
    if frame.ground_truth is not None:
        write_depth_png(frame.ground_truth, root / "groundtruth" / name)
