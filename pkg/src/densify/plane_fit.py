"""Plane estimation from back-projected LiDAR points (metres)."""
from __future__ import annotations

import numpy as np

from .core import CameraModel, Plane
from .errors import DegenerateGeometry, SingularSample

# relative tolerance on the 3-point system: |det| = 2 * XY triangle area
_SINGULAR_REL = 1e-9


def backproject_known(cam: CameraModel, known, known_depth) -> np.ndarray:
    """(n, 3) points for known pixels, in input order."""
    known = np.asarray(known)
    if len(known) == 0:
        return np.empty((0, 3))
    return cam.backproject(known, known_depth)


def orthogonal_loss(plane: Plane, points) -> float:
    """Sum of squared orthogonal distances, m^2."""
    return float(np.sum(plane.distance(points) ** 2))


def fit_tls(points) -> Plane:
    """Total least squares plane through a point cloud.

    The normal is the right singular vector of the mean-centred coordinate
    matrix that belongs to the smallest singular value; the offset follows
    from the centroid.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise DegenerateGeometry("TLS plane fit needs at least 3 points")
    mean = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - mean, full_matrices=False)
    if s[0] == 0 or s[1] < 1e-12 * s[0]:
        raise DegenerateGeometry("points are collinear")
    n = vt[2]
    return Plane.from_coeffs(np.append(n, -n @ mean), source="tls")


def three_point_coeffs(triples) -> tuple[np.ndarray, np.ndarray]:
    """Batched exact fits ``Z = pi0 X + pi1 Y + pi3`` (i.e. ``pi2 = -1``).

    Parameters
    ----------
    triples : (h, 3, 3) array
        ``triples[i, j]`` is the j-th point of hypothesis i.

    Returns
    -------
    coeffs : (h, 4) array
        ``[pi0, pi1, -1, pi3]``; rows of singular samples are NaN.
    ok : (h,) bool array
    """
    T = np.asarray(triples, dtype=np.float64)
    A = np.concatenate([T[..., :2], np.ones(T.shape[:-1] + (1,))], axis=-1)
    det = np.linalg.det(A)
    d01 = T[:, 1, :2] - T[:, 0, :2]
    d02 = T[:, 2, :2] - T[:, 0, :2]
    d12 = T[:, 2, :2] - T[:, 1, :2]
    diam2 = np.max(np.stack([(d01 ** 2).sum(-1), (d02 ** 2).sum(-1), (d12 ** 2).sum(-1)]), axis=0)
    ok = np.isfinite(det) & (np.abs(det) > _SINGULAR_REL * diam2) & (diam2 > 0)
    coeffs = np.full((len(T), 4), np.nan)
    if ok.any():
        sol = np.linalg.solve(A[ok], T[ok, :, 2][..., None])[..., 0]   # LU = Gaussian elimination
        coeffs[ok] = np.stack([sol[:, 0], sol[:, 1], -np.ones(len(sol)), sol[:, 2]], axis=1)
    return coeffs, ok


def fit_three_points(p0, p1, p2) -> Plane:
    coeffs, ok = three_point_coeffs(np.array([[p0, p1, p2]], dtype=np.float64))
    if not ok[0]:
        raise SingularSample("sample is collinear or spans a vertical plane")
    return Plane.from_coeffs(coeffs[0], source="ransac")
