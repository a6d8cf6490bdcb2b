# coding: utf-8

# # Planes through LiDAR samples
#
# Every superpixel is treated as a piece of a plane.  Here we take a handful of
# noisy samples on a tilted wall, fit a plane to them and push camera rays
# through it to get depths for pixels that had no measurement.

# In[1]:

import numpy as np

from densify import CameraModel, PipelineConfig, fit_tls, interpolate_pixels, interpolation_loss, refine
from densify.interpolate import assess, plane_depth
from densify.plane_fit import backproject_known, orthogonal_loss

cam = CameraModel.from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
rng = np.random.default_rng(7)


# A wall at Z = 12 + 0.4 X metres.  Depths are always millimetres, points metres.

# In[2]:

wall = np.array([0.4, 0.0, -1.0, 12.0])
known = np.stack([rng.integers(200, 500, 40), rng.integers(60, 300, 40)], 1)
depth = plane_depth(wall, cam, known) + rng.normal(0, 40, len(known))   # 4 cm noise
print(depth[:5].round(1))


# The samples go back into 3-D along their rays and a total least squares
# plane goes through them.  Its normal should come out close to (0.37, 0, -0.93).

# In[3]:

points = backproject_known(cam, known, depth)
plane = fit_tls(points)
print("normal", plane.normal.round(3), "offset", round(plane.pi3, 3))
print("mean squared distance [m^2]", orthogonal_loss(plane, points) / len(points))


# Orthogonal distance is not what a depth map cares about.  The loss that
# decides whether the plane is trusted is measured along the ray, in mm^2.

# In[4]:

cfg = PipelineConfig()
loss = interpolation_loss(plane, cam, known, depth)
mean_loss, nearest, ok = assess(plane, cam, known, depth, cfg)
print(f"mean loss {mean_loss:.0f} mm^2, nearest point {nearest:.0f} mm, accepted: {ok}")


# Refinement minimises that loss directly.  On a clean plane there is little to win.

# In[5]:

better = refine(plane, cam, known, depth)
print("loss before", round(loss), "after", round(interpolation_loss(better, cam, known, depth)))


# Now the payoff: depths for pixels with no sample at all.

# In[6]:

holes = np.array([[210, 70], [350, 180], [490, 290]])
z, gated = interpolate_pixels(plane, cam, holes, cfg.tau_theta)
print("interpolated", z.round(0), "true", plane_depth(wall, cam, holes).round(0))


# Rays that graze a plane give wild depths, so they are refused.  A floor seen from
# 1.65 m up is hit at a shallow angle near the horizon.

# In[7]:

floor = fit_tls(np.array([[x, 1.65, z] for x in (-2, 0, 2) for z in (5, 20, 80)], float))
rows = np.array([[609, 175], [609, 190], [609, 300]])
z, gated = interpolate_pixels(floor, cam, rows, cfg.tau_theta)
print("floor depths", z.round(0), f"({gated} refused at tau_theta={cfg.tau_theta} deg)")
