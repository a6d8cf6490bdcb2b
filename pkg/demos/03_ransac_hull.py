# coding: utf-8

# # When the least squares plane fails
#
# A superpixel that straddles a depth edge has samples from two surfaces.  The
# least squares plane then fits neither and is rejected.  The RANSAC branch
# finds the dominant plane and only fills pixels inside the convex hull of its
# inliers, so the depth edge is not smeared.

# In[1]:

import numpy as np

from densify import CameraModel, PipelineConfig, fit_tls
from densify.interpolate import assess, plane_depth
from densify.plane_fit import backproject_known
from densify.ransac_hull import convex_hull, hull_interpolation, ransac_plane, ransac_validity
from densify.superpixel import Superpixel

cam = CameraModel.from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
cfg = PipelineConfig()


# A 20 x 20 pixel superpixel.  Its right part is a box at 8 m, a few samples on
# the left leak through from the wall at 25 m.

# In[2]:

uu, vv = np.meshgrid(np.arange(600, 620), np.arange(150, 170))
pixels = np.stack([uu.ravel(), vv.ravel()], 1)
scan = (pixels[:, 1] % 4 == 0) & (pixels[:, 0] % 2 == 0)
known = pixels[scan]
depth = np.where(known[:, 0] < 604, 25_000.0, 8000.0)
sp = Superpixel(0, pixels, known, depth, pixels[~scan], True)
print(len(known), "samples,", int((depth > 10_000).sum()), "from the wall")


# TLS splits the difference and fails the check.

# In[3]:

tls = fit_tls(backproject_known(cam, known, depth))
mean_loss, _, ok = assess(tls, cam, known, depth, cfg)
print(f"TLS mean loss {mean_loss:.3g} mm^2, accepted: {ok}")


# RANSAC keeps the box.  The draw is seeded by frame, segmentation and superpixel id,
# so the same input always gives the same plane.

# In[4]:

score = ransac_plane(sp, cam, cfg, frame_id="demo")
print(f"{score.count} inliers, rho {score.rho:.3g}, accepted: {ransac_validity(score, len(known), cfg)}")
print("plane", np.round(score.plane.coeffs, 4))


# Only pixels inside the inlier hull are filled.

# In[5]:

hull = convex_hull(known[score.inliers])
print("hull vertices", hull.vertices.tolist())
px, z = hull_interpolation(sp, score, cam, cfg)
print(f"filled {len(px)} of {len(sp.unknown)} unknown pixels, depth range {z.min():.0f}-{z.max():.0f} mm")
print("leftmost filled column", px[:, 0].min())
