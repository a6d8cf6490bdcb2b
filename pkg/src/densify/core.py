"""Shared data types and camera geometry.

Units: depth maps hold millimetres (0 = no measurement); 3-D points are in
metres in the frame of the projection matrix ``P = [M | p4]``.

"Depth" of a pixel is the scale ``Z`` in ``P [X; 1] = Z [u, v, 1]``.  With
``l = M^-1 [u, v, 1]`` the back-projected point is ``center + Z * l``, so the
depth is also the ray parameter.  For the usual ``P = K [I | 0]`` this is the
camera-frame Z coordinate.
"""
from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

from .errors import ConfigError, NonPositiveDepth, SingularMatrix

MM_PER_M = 1000.0


class PixelCoord(NamedTuple):
    u: int  # column
    v: int  # row


class DepthMap:
    """Immutable H x W grid of depths in millimetres, 0 meaning unknown."""

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"depth map must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("depth values must be finite and non-negative")
        arr.flags.writeable = False
        self._values = arr

    @classmethod
    def empty(cls, height: int, width: int) -> DepthMap:
        return cls(np.zeros((height, width)))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def height(self) -> int:
        return self._values.shape[0]

    @property
    def width(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    @property
    def valid(self) -> np.ndarray:
        return self._values > 0

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self._values))

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __repr__(self):
        return f"DepthMap({self.width}x{self.height}, {self.count} measured)"


class CameraModel:
    """Pinhole projection ``P = [M | p4]`` with invertible ``M``."""

    def __init__(self, P):
        P = np.asarray(P, dtype=np.float64)
        if P.shape == (3, 3):
            P = np.hstack([P, np.zeros((3, 1))])
        if P.shape != (3, 4) or not np.all(np.isfinite(P)):
            raise SingularMatrix(f"projection matrix must be finite 3x4, got shape {P.shape}")
        M = P[:, :3].copy()
        if abs(np.linalg.det(M)) <= 1e-9:
            raise SingularMatrix("M is singular")
        self.P = P
        self.M = M
        self.p4 = P[:, 3].copy()
        self.M_inv = np.linalg.inv(M)
        self.center = -self.M_inv @ self.p4
        for a in (self.P, self.M, self.p4, self.M_inv, self.center):
            a.flags.writeable = False

    @classmethod
    def from_intrinsics(cls, fx: float, fy: float, cx: float, cy: float) -> CameraModel:
        return cls([[fx, 0.0, cx, 0.0], [0.0, fy, cy, 0.0], [0.0, 0.0, 1.0, 0.0]])

    def ray(self, pixels) -> np.ndarray:
        """Direction ``M^-1 [u, v, 1]`` for one (u, v) pair or an (n, 2) array."""
        px = np.asarray(pixels, dtype=np.float64)
        homog = np.concatenate([px, np.ones(px.shape[:-1] + (1,))], axis=-1)
        return homog @ self.M_inv.T

    def backproject(self, pixels, depth_mm) -> np.ndarray:
        """Points in metres for pixels at the given depths (mm)."""
        z = np.asarray(depth_mm, dtype=np.float64)
        if np.any(z <= 0):
            raise NonPositiveDepth("back-projection needs depth > 0")
        # M^-1 (Z x' - p4) == center + Z * M^-1 x'
        return self.center + (z / MM_PER_M)[..., None] * self.ray(pixels)

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(pixels, depth_mm)`` for points in metres."""
        X = np.asarray(points, dtype=np.float64)
        h = X @ self.M.T + self.p4
        z = h[..., 2]
        return h[..., :2] / z[..., None], z * MM_PER_M

    def __repr__(self):
        return f"CameraModel(P={self.P.tolist()})"


def backproject(cam: CameraModel, x, depth_mm) -> np.ndarray:
    return cam.backproject(x, depth_mm)


def ray(cam: CameraModel, x) -> np.ndarray:
    return cam.ray(x)


@dataclass(frozen=True, eq=False)
class Plane:
    """Plane ``pi0 X + pi1 Y + pi2 Z + pi3 = 0`` in metres.

    Construct through :meth:`from_coeffs`, which normalises the normal to unit
    length and flips the sign so that ``pi2 <= 0``.
    """

    pi0: float
    pi1: float
    pi2: float
    pi3: float
    source: Literal["tls", "ransac"] = "tls"
    valid: bool = False

    @classmethod
    def from_coeffs(cls, beta, source="tls", valid=False) -> Plane:
        beta = np.asarray(beta, dtype=np.float64)
        norm = np.linalg.norm(beta[:3])
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("plane normal must be non-zero and finite")
        beta = beta / norm
        lead = beta[2] if beta[2] != 0 else beta[np.flatnonzero(beta[:3])[0]]
        if lead > 0:
            beta = -beta
        return cls(*(float(b) for b in beta), source=source, valid=valid)

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.pi0, self.pi1, self.pi2])

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.pi0, self.pi1, self.pi2, self.pi3])

    def with_validity(self, valid: bool) -> Plane:
        return dataclasses.replace(self, valid=bool(valid))

    def distance(self, points) -> np.ndarray:
        """Signed orthogonal distance (metres)."""
        return np.asarray(points, dtype=np.float64) @ self.normal + self.pi3


Colorspace = Literal["lab", "gray"]
FillMethod = Literal["nn_jbf", "morph", "none"]


@dataclass(frozen=True)
class PipelineConfig:
    """Thresholds and switches of the completion pipeline.

    Depth thresholds are in mm, loss thresholds in mm^2 (per the 1/2 sum of
    squared depth residuals).  None of the default values are published
    anywhere; they are experimentally chosen.
    """

    # misalignment filter
    tau_N: float = 1.15
    filter_radius_u: int = 2
    filter_radius_v: int = 4
    # superpixel admission
    tau_m_min_points: int = 12
    # interpolation and validity
    tau_theta: float = 4.0
    tau_Pi: float = 12_500.0
    tau_dist: float = 30_000.0
    tau_Pi_far: float = 80_000.0
    # RANSAC fallback
    tau_ransac_inlier: float = 5_000.0
    tau_abs: int = 10
    tau_rel: float = 0.5
    ransac_iterations: int = 200
    rng_seed: int = 0
    use_convex_hull: bool = True
    # segmentation
    slic_iterations: int = 5
    slic_superpixel_counts: tuple[int, ...] = (1100,)
    slic_compactness: float = 10.0
    colorspace: Colorspace = "lab"
    # plane refinement
    refine_loss: bool = False
    refine_max_evals: int = 50
    # remaining-area fill
    fill_method: FillMethod = "nn_jbf"
    jbf_neighbors: int = 9
    jbf_sigma_spatial: float = 10.0
    jbf_sigma_color: float = 10.0

    def __post_init__(self):
        positive = ("tau_N", "tau_m_min_points", "tau_theta", "tau_Pi", "tau_dist", "tau_Pi_far",
                    "tau_ransac_inlier", "tau_abs", "tau_rel", "slic_iterations",
                    "slic_compactness", "ransac_iterations", "refine_max_evals",
                    "jbf_neighbors", "jbf_sigma_spatial", "jbf_sigma_color")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.tau_N <= 1:
            raise ConfigError("tau_N must be > 1")
        if not 0 < self.tau_rel <= 1:
            raise ConfigError("tau_rel must lie in (0, 1]")
        if not 0 <= self.tau_theta <= 90:
            raise ConfigError("tau_theta is an angle in degrees within [0, 90]")
        if self.filter_radius_u < 0 or self.filter_radius_v < 0:
            raise ConfigError("filter radii must be >= 0")
        counts = tuple(int(c) for c in self.slic_superpixel_counts)
        if not counts or min(counts) < 1:
            raise ConfigError("slic_superpixel_counts must be a non-empty list of positive counts")
        object.__setattr__(self, "slic_superpixel_counts", counts)
        if self.colorspace not in ("lab", "gray"):
            raise ConfigError(f"unknown colorspace {self.colorspace!r}")
        if self.fill_method not in ("nn_jbf", "morph", "none"):
            raise ConfigError(f"unknown fill method {self.fill_method!r}")

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# config file: one "key = value" per line, '#' starts a comment, lists are
# comma separated, booleans are true/false.

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def _parse_value(key: str, text: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind.startswith("tuple"):
            return tuple(int(t) for t in text.split(",") if t.strip())
        return text.strip().lower().replace("-", "_")
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value)
    return dataclasses.replace(base or PipelineConfig(), **values)


def load_config(path=None, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read a config file; without a path, the shipped defaults file."""
    if path is None:
        text = resources.files("densify").joinpath("data/defaults.cfg").read_text()
    else:
        text = Path(path).read_text()
    return parse_config(text, base)


def format_config(cfg: PipelineConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def counter_rng(seed: int, *keys) -> np.random.Generator:
    """Philox generator keyed by integers and/or strings.

    Same keys give the same stream regardless of process or call order.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        if isinstance(k, str):
            words.append(zlib.crc32(k.encode("utf-8")))
        else:
            words.append(int(k) & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


__all__ = [
    "MM_PER_M", "PixelCoord", "DepthMap", "CameraModel", "Plane", "PipelineConfig",
    "backproject", "ray", "parse_config", "load_config", "format_config", "counter_rng",
]
