import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densify.core import CameraModel, PipelineConfig, Plane
from densify.errors import RayParallelToPlane
from densify.interpolate import (PARALLEL_PENALTY, RayPlaneContext, assess, interpolate_pixels,
                                 interpolate_superpixel, interpolation_loss, intersect,
                                 intersection_angle, loss_and_gradient, plane_depth, point_losses,
                                 refine, validity)
from densify.plane_fit import backproject_known, fit_tls
from densify.superpixel import Superpixel
from oracles import ray_plane_depth

WALL_5M = Plane.from_coeffs([0, 0, -1, 5])


def test_principal_ray_hits_axis(kitti_cam):
    ctx = RayPlaneContext.create(WALL_5M, kitti_cam)
    np.testing.assert_allclose(intersect(ctx, (609.5593, 172.854)), [0, 0, 5], atol=1e-12)


@pytest.mark.parametrize("px", [(0, 0), (1215, 351), (300, 200)])
def test_fronto_parallel_depth_is_constant(kitti_cam, px):
    ctx = RayPlaneContext.create(WALL_5M, kitti_cam)
    assert intersect(ctx, px)[2] == pytest.approx(5.0, abs=1e-12)


def test_tilted_plane_matches_substitution_oracle(kitti_cam):
    plane = Plane.from_coeffs([0.1, 0, -1, 2])          # Z = 2 + 0.1 X
    ctx = RayPlaneContext.create(plane, kitti_cam)
    for px in [(100, 30), (1100, 300), (609, 10)]:
        l = kitti_cam.ray(px)
        t = ray_plane_depth([0.1, 0, -1, 2], l, [0, 0, 0])
        X = intersect(ctx, px)
        np.testing.assert_allclose(X, t * l, rtol=1e-12)
        assert abs(X[2] - (2 + 0.1 * X[0])) < 1e-7
        assert plane_depth(plane.coeffs, kitti_cam, np.array([px]))[0] == pytest.approx(t * 1000)


def test_general_camera_centre():
    P = np.array([[700.0, 0, 600, 45], [0, 700, 170, 0.2], [0, 0, 1, 0.003]])
    cam = CameraModel(P)
    plane = Plane.from_coeffs([0.2, -0.1, -1, 8])
    ctx = RayPlaneContext.create(plane, cam)
    assert abs(plane.distance(ctx.p0)) < 1e-9
    X = intersect(ctx, (250, 90))
    assert abs(plane.distance(X)) < 1e-7
    # lies on the pixel's ray
    pix, _ = cam.project(X)
    np.testing.assert_allclose(pix, [250, 90], atol=1e-6)


def test_parallel_ray_raises(kitti_cam):
    # plane through the camera centre containing the optical axis
    ctx = RayPlaneContext.create(Plane.from_coeffs([1, 0, 0, 0]), kitti_cam)
    with pytest.raises(RayParallelToPlane):
        intersect(ctx, (609.5593, 100))


def test_intersection_angles():
    p = Plane.from_coeffs([0, 0, 1, -3])
    assert intersection_angle(p, [0, 0, 2]) == pytest.approx(90)
    assert intersection_angle(p, [1, 0, 0]) == pytest.approx(0)
    assert intersection_angle(p, np.array([1, 0, 1]) / math.sqrt(2)) == pytest.approx(45)


def test_loss_examples(kitti_cam):
    px = np.array([[609.5593, 172.854]])
    assert interpolation_loss(Plane.from_coeffs([0, 0, -1, 11]), kitti_cam, px, [10_000.0]) \
        == pytest.approx(5e5)
    grid = np.stack(np.meshgrid(np.arange(0, 1216, 100), np.arange(0, 352, 50)), -1).reshape(-1, 2)
    plane = Plane.from_coeffs([0.1, 0.2, -1, 12])
    exact = plane_depth(plane.coeffs, kitti_cam, grid)
    assert interpolation_loss(plane, kitti_cam, grid, exact) < 1e-12


def test_loss_matches_scalar_oracle(kitti_cam, rng):
    plane = Plane.from_coeffs([0.3, -0.2, -1, 15])
    px = np.stack([rng.integers(0, 1216, 50), rng.integers(0, 352, 50)], 1)
    z = plane_depth(plane.coeffs, kitti_cam, px) + rng.normal(0, 200, 50)
    expected = 0.0
    for (u, v), zl in zip(px, z):
        l = [(u - 609.5593) / 721.5377, (v - 172.854) / 721.5377, 1.0]
        expected += 0.5 * (zl - 1000 * ray_plane_depth(plane.coeffs, l, [0, 0, 0])) ** 2
    assert interpolation_loss(plane, kitti_cam, px, z) == pytest.approx(expected, rel=1e-12)


def test_parallel_known_pixel_is_penalised(kitti_cam):
    losses = point_losses([1, 0, 0, 0], kitti_cam, np.array([[609.5593, 100.0]]), [5000.0])
    assert losses[0] == PARALLEL_PENALTY


@pytest.mark.parametrize("mean, zmin, valid", [
    (0, 1000, True), (12_500, 1000, True), (12_500.01, 1000, False),
    (50_000, 30_000, True), (50_000, 29_999, False), (80_000, 45_000, True),
    (80_001, 45_000, False)])
def test_validity_truth_table(mean, zmin, valid):
    assert validity(mean, zmin, PipelineConfig()) is valid


def _instance(seed, n=20):
    rng = np.random.default_rng(seed)
    cam = CameraModel.from_intrinsics(rng.uniform(300, 900), rng.uniform(300, 900),
                                      rng.uniform(200, 700), rng.uniform(100, 300))
    beta = np.append(rng.normal(0, 0.3, 2), [-1, rng.uniform(3, 30)]) * rng.uniform(0.5, 2)
    px = np.stack([rng.uniform(0, 1200, n), rng.uniform(0, 350, n)], 1)
    z = plane_depth(beta + rng.normal(0, 0.02, 4), cam, px) + rng.normal(0, 300, n)
    return cam, beta, px, z


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_central_differences(seed):
    cam, beta, px, z = _instance(seed)
    rays, l0 = cam.ray(px), np.asarray(cam.center)
    _, g = loss_and_gradient(beta, rays, l0, z)
    for i in range(4):
        h = 1e-6 * max(1.0, abs(beta[i]))
        e = np.zeros(4)
        e[i] = h
        fd = (loss_and_gradient(beta + e, rays, l0, z)[0]
              - loss_and_gradient(beta - e, rays, l0, z)[0]) / (2 * h)
        assert abs(g[i] - fd) <= 1e-4 * max(abs(fd), 1e-6 * np.abs(g).max())


def test_loss_and_gradient_agrees_with_interpolation_loss():
    cam, beta, px, z = _instance(3)
    f, _ = loss_and_gradient(beta, cam.ray(px), cam.center, z)
    assert f == pytest.approx(interpolation_loss(beta, cam, px, z), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1215), st.floats(0, 351), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(2, 50), st.floats(-3000, 3000))
def test_depth_residual_dominates_orthogonal_distance(u, v, a, b, d, dz):
    """Along the ray, the gap to the plane is never shorter than the orthogonal one."""
    cam = CameraModel.from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
    plane = Plane.from_coeffs([a, b, -1, d])
    l = cam.ray((u, v))
    t_int = plane_depth(plane.coeffs, cam, np.array([[u, v]]))[0]
    if not np.isfinite(t_int) or t_int <= 0 or t_int + dz <= 0:
        return
    X = cam.backproject((u, v), t_int + dz)
    ortho = plane.distance(X)
    along = abs(dz) / 1000 * np.linalg.norm(l)
    assert along ** 2 >= ortho ** 2 * (1 - 1e-9) - 1e-18
    theta = intersection_angle(plane, l)
    if theta > 89.999:
        assert along ** 2 == pytest.approx(ortho ** 2, rel=1e-6, abs=1e-12)


def test_fronto_parallel_plane_fills_everything(kitti_cam):
    px = np.stack(np.meshgrid(np.arange(0, 1216, 7), np.arange(0, 352, 5)), -1).reshape(-1, 2)
    z, rejected = interpolate_pixels(WALL_5M, kitti_cam, px, 4.0)
    assert rejected == 0
    np.testing.assert_allclose(z, 5000.0, rtol=1e-12)


def test_grazing_plane_rejects_everything(kitti_cam):
    # plane through a point 1 mm from the camera centre, nearly containing all rays
    plane = Plane.from_coeffs([0, 1, 0, -0.001])
    px = np.stack([np.arange(0, 1216, 10), np.full(122, 200)], 1)
    z, rejected = interpolate_pixels(plane, kitti_cam, px, 4.0)
    assert rejected == len(px) and not z.any()


def test_behind_camera_is_missing(kitti_cam):
    z, _ = interpolate_pixels(Plane.from_coeffs([0, 0, -1, -5]), kitti_cam, np.array([[600, 170]]), 4)
    assert z[0] == 0


def test_interpolate_superpixel_on_tilted_plane(kitti_cam):
    plane = Plane.from_coeffs([0.4, 0.1, -1, 12])
    vv, uu = np.mgrid[100:140, 300:360]
    px = np.stack([uu.ravel(), vv.ravel()], 1)
    truth = plane_depth(plane.coeffs, kitti_cam, px)
    m = (px[:, 0] % 2 == 0) & (px[:, 1] % 4 == 0)
    sp = Superpixel(0, px, px[m], truth[m], px[~m], True)
    fit = fit_tls(backproject_known(kitti_cam, sp.known, sp.known_depth))
    res = interpolate_superpixel(sp, fit, kitti_cam, PipelineConfig())
    assert res.filled == len(sp.unknown) and res.mean_loss < 1e-12
    np.testing.assert_allclose(res.depths, truth[~m], rtol=1e-6)
    assert np.all(res.depths > 0)


def test_assess_reports_mean_and_nearest(kitti_cam):
    px = np.array([[600, 170], [620, 180]])
    plane = Plane.from_coeffs([0, 0, -1, 40])
    mean, zmin, ok = assess(plane, kitti_cam, px, [40_300.0, 39_700.0], PipelineConfig())
    assert mean == pytest.approx(45_000) and zmin == pytest.approx(40_000) and ok
    _, _, ok_near = assess(Plane.from_coeffs([0, 0, -1, 10]), kitti_cam, px, [10_300.0, 9_700.0],
                           PipelineConfig())
    assert not ok_near


def test_refine_keeps_exact_plane(kitti_cam):
    px = np.stack([np.arange(400, 800, 20), np.repeat([100, 140], 10)], 1)
    plane = Plane.from_coeffs([0.1, 0, -1, 10])
    z = plane_depth(plane.coeffs, kitti_cam, px)
    out = refine(plane, kitti_cam, px, z)
    np.testing.assert_allclose(out.coeffs, plane.coeffs, atol=1e-9)


def _oblique_wall(seed):
    """Noisy depths of the side wall X = -5 m seen at a slant."""
    rng = np.random.default_rng(seed)
    px = np.stack([rng.integers(100, 300, 40), rng.integers(120, 220, 40)], 1)
    cam = CameraModel.from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
    z = plane_depth([1, 0, 0, 5], cam, px) + rng.normal(0, 300, 40)
    return cam, px, z


@pytest.mark.parametrize("seed", range(5))
def test_refinement_tilts_toward_the_image_plane(seed):
    cam, px, z = _oblique_wall(seed)
    tls = fit_tls(backproject_known(cam, px, z))
    out = refine(tls, cam, px, z)
    assert interpolation_loss(out, cam, px, z) < interpolation_loss(tls, cam, px, z)
    centre = cam.ray(px.mean(0))
    assert intersection_angle(out, centre) > intersection_angle(tls, centre)


@pytest.mark.parametrize("seed", range(6))
def test_refine_close_to_grid_oracle(seed, kitti_cam):
    rng = np.random.default_rng(seed)
    n = rng.normal(size=3)
    n[2] = -abs(n[2]) - 1
    true = Plane.from_coeffs(np.append(n, rng.uniform(5, 15)))
    px = np.stack([rng.integers(400, 800, 30), rng.integers(100, 250, 30)], 1)
    z = plane_depth(true.coeffs, kitti_cam, px) + rng.normal(0, 100, 30)
    start = Plane.from_coeffs(true.coeffs + rng.normal(0, 0.05, 4))
    out = refine(start, kitti_cam, px, z)
    lr = interpolation_loss(out, kitti_cam, px, z)
    assert lr <= interpolation_loss(start, kitti_cam, px, z)
    b0 = true.coeffs
    steps = np.linspace(-0.1, 0.1, 9)
    grid = np.array(list(itertools.product(steps, repeat=4))) * np.maximum(np.abs(b0), 0.2) + b0
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = -1000 * grid[:, 3:] / (grid[:, :3] @ kitti_cam.ray(px).T)    # centre at the origin
        gl = (0.5 * (z - Z) ** 2).sum(1)
    assert lr <= 1.05 * np.nanmin(gl)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_refine_never_increases_loss(seed):
    cam, beta, px, z = _instance(seed, 15)
    start = Plane.from_coeffs(beta)
    out = refine(start, cam, px, z, 20)
    assert interpolation_loss(out, cam, px, z) <= interpolation_loss(start, cam, px, z) + 1e-9
