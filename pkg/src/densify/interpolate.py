"""Depth interpolation from a plane by intersecting camera rays with it.

For a pixel with ray ``l = M^-1 [u, v, 1]`` and the camera centre ``l0`` the
intersection with ``n . X + pi3 = 0`` is ``l0 + s l`` with
``s = -(n . l0 + pi3) / (n . l)``; ``s`` is the interpolated depth (metres).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import MM_PER_M, CameraModel, PipelineConfig, Plane
from .errors import RayParallelToPlane

# Loss charged for a known pixel whose ray is parallel to the plane (mm^2).
PARALLEL_PENALTY = 1e12
_PARALLEL_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class RayPlaneContext:
    plane: Plane
    cam: CameraModel
    p0: np.ndarray   # point on the plane closest to the origin
    l0: np.ndarray   # camera centre

    @classmethod
    def create(cls, plane: Plane, cam: CameraModel) -> RayPlaneContext:
        n = plane.normal
        p0 = -plane.pi3 * n / (n @ n)
        return cls(plane, cam, p0, np.array(cam.center))


@dataclass(eq=False)
class InterpolationResult:
    pixels: np.ndarray       # (n, 2) pixels that were considered
    depths: np.ndarray       # (n,) mm, 0 where left unknown
    mean_loss: float         # mm^2 per known point
    valid: bool
    theta_rejections: int

    @property
    def filled(self) -> int:
        return int(np.count_nonzero(self.depths))


def intersect(ctx: RayPlaneContext, x) -> np.ndarray:
    """Intersection (metres) of the pixel's ray with the plane."""
    n = ctx.plane.normal
    l = ctx.cam.ray(x)
    denom = n @ l
    if abs(denom) <= _PARALLEL_EPS * np.linalg.norm(n) * np.linalg.norm(l):
        raise RayParallelToPlane(f"ray through {tuple(x)} is parallel to the plane")
    w = ctx.l0 - ctx.p0
    s = -(n @ w) / denom
    return w + s * l + ctx.p0


def intersection_angle(plane: Plane, l) -> np.ndarray:
    """Angle in degrees between ray direction(s) and the plane, in [0, 90]."""
    n = plane.normal
    l = np.asarray(l, dtype=np.float64)
    c = np.abs(l @ n) / (np.linalg.norm(n) * np.linalg.norm(l, axis=-1))
    return np.degrees(np.arcsin(np.clip(c, 0.0, 1.0)))


def plane_depth(beta, cam: CameraModel, pixels) -> np.ndarray:
    """Interpolated depth (mm) per pixel; NaN where the ray is parallel."""
    beta = np.asarray(beta, dtype=np.float64)
    rays = cam.ray(pixels)
    return _depth_from_rays(beta, rays, np.asarray(cam.center))


def _depth_from_rays(beta, rays, l0):
    n = beta[:3]
    a = rays @ n
    b = n @ l0 + beta[3]
    parallel = np.abs(a) <= _PARALLEL_EPS * np.linalg.norm(n) * np.linalg.norm(rays, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = -b / a * MM_PER_M
    z[parallel] = np.nan
    return z


def point_losses(beta, cam: CameraModel, known, known_depth) -> np.ndarray:
    """Per-point ``1/2 (Z_lid - Z_int)^2`` in mm^2 (penalty for parallel rays)."""
    z = plane_depth(beta, cam, known)
    r = np.asarray(known_depth, dtype=np.float64) - z
    out = 0.5 * r * r
    out[~np.isfinite(out)] = PARALLEL_PENALTY
    return out


def interpolation_loss(plane, cam: CameraModel, known, known_depth) -> float:
    """Half the summed squared depth residual over the known pixels, mm^2."""
    beta = plane.coeffs if isinstance(plane, Plane) else plane
    if len(known) == 0:
        return 0.0
    return float(point_losses(beta, cam, known, known_depth).sum())


def loss_and_gradient(beta, rays, l0, zlid_mm) -> tuple[float, np.ndarray]:
    """Interpolation loss (mm^2) and its gradient with respect to beta.

    With ``a = n . l`` and ``b = n . l0 + pi3`` the depth is ``Z = -1000 b / a``,
    so ``dZ/dn = -1000 (l0 / a - b l / a^2)`` and ``dZ/dpi3 = -1000 / a``.
    """
    beta = np.asarray(beta, dtype=np.float64)
    n = beta[:3]
    a = rays @ n
    b = n @ l0 + beta[3]
    parallel = np.abs(a) <= _PARALLEL_EPS * np.linalg.norm(n) * np.linalg.norm(rays, axis=-1)
    ok = ~parallel
    a_ok = a[ok]
    r = zlid_mm[ok] + MM_PER_M * b / a_ok
    loss = 0.5 * float(r @ r) + PARALLEL_PENALTY * int(parallel.sum())
    # dE/dbeta = -sum r dZ/dbeta
    coef = r * MM_PER_M / a_ok                                  # r * 1000 / a
    g_n = coef.sum() * l0 - ((coef * b / a_ok)[:, None] * rays[ok]).sum(0)
    g_3 = coef.sum()
    return loss, np.append(g_n, g_3)


def validity(mean_loss: float, min_zint_mm: float, cfg: PipelineConfig) -> bool:
    """Accept a plane on low mean loss, or on moderate loss if it is far away."""
    if mean_loss <= cfg.tau_Pi:
        return True
    return bool(min_zint_mm >= cfg.tau_dist and mean_loss <= cfg.tau_Pi_far)


def assess(plane: Plane, cam: CameraModel, known, known_depth, cfg: PipelineConfig):
    """``(mean_loss, min_zint, valid)`` of a plane against a superpixel's measurements."""
    losses = point_losses(plane.coeffs, cam, known, known_depth)
    mean_loss = float(losses.sum() / len(losses))
    z = plane_depth(plane.coeffs, cam, known)
    z = z[np.isfinite(z)]
    min_z = float(z.min()) if len(z) else -np.inf
    return mean_loss, min_z, validity(mean_loss, min_z, cfg)


def interpolate_pixels(plane: Plane, cam: CameraModel, pixels, tau_theta: float):
    """Depths (mm) for ``pixels``; 0 where gated by the angle or not in front."""
    pixels = np.asarray(pixels).reshape(-1, 2)
    rays = cam.ray(pixels)
    theta = intersection_angle(plane, rays)
    gated = theta <= tau_theta
    z = _depth_from_rays(plane.coeffs, rays, np.asarray(cam.center))
    bad = gated | ~np.isfinite(z) | (z <= 0)
    return np.where(bad, 0.0, z), int(gated.sum())


def interpolate_superpixel(sp, plane: Plane, cam: CameraModel, cfg: PipelineConfig,
                           pixels=None) -> InterpolationResult:
    """Interpolate the unknown pixels of ``sp`` (or a subset given by ``pixels``)."""
    targets = sp.unknown if pixels is None else np.asarray(pixels).reshape(-1, 2)
    depths, rejected = interpolate_pixels(plane, cam, targets, cfg.tau_theta)
    if len(sp.known):
        mean_loss = interpolation_loss(plane, cam, sp.known, sp.known_depth) / len(sp.known)
    else:
        mean_loss = 0.0
    return InterpolationResult(targets, depths, mean_loss, plane.valid, rejected)


def refine(plane: Plane, cam: CameraModel, known, known_depth, max_evals: int = 50) -> Plane:
    """Minimise the interpolation loss over all four plane coefficients.

    Truncated Newton with the analytic gradient, started from ``plane``.  The
    initial plane is returned whenever the optimiser fails to improve on it.
    """
    known = np.asarray(known)
    if len(known) == 0:
        return plane
    rays = cam.ray(known)
    l0 = np.asarray(cam.center)
    zlid = np.asarray(known_depth, dtype=np.float64)
    scale = 1.0 / (len(known) * MM_PER_M ** 2)   # mean loss in m^2

    def fun(beta):
        f, g = loss_and_gradient(beta, rays, l0, zlid)
        return f * scale, g * scale

    beta0 = plane.coeffs
    f0 = fun(beta0)[0]
    try:
        res = optimize.minimize(fun, beta0, jac=True, method="TNC",
                                options={"maxfun": max_evals, "gtol": 1e-8})
    except (ValueError, FloatingPointError):
        return plane
    x = res.x
    if not np.all(np.isfinite(x)) or np.linalg.norm(x[:3]) == 0:
        return plane
    if not fun(x)[0] < f0:
        return plane
    return Plane.from_coeffs(x, source=plane.source, valid=plane.valid)
