# coding: utf-8

# # Oversegmenting the camera image
#
# The RGB image decides which LiDAR samples belong together.  SLIC cuts it into
# compact, colour-coherent superpixels; each one that holds enough samples is
# later completed on its own.

# In[1]:

import numpy as np

from densify import PipelineConfig, bind_depths, load_scene, render, slic, suppress_misalignment
from densify.superpixel import boundary_overlay, to_working_space
from densify.synth import bundled_scenes

scene = load_scene(next(p for p in bundled_scenes() if "s05" in p.name))
frame = render(scene)
print(scene.name, frame.shape, f"{frame.sparse.count} LiDAR samples")


# Segmentation runs in CIELAB by default.  The first call also compiles the kernels.

# In[2]:

guide = to_working_space(frame.rgb, "lab")
spm = slic(guide, 1100, iters=5)
print(spm.count, "superpixels")
print("energy per iteration", np.round(spm.energy_history, 1))


# The energy never goes up.  Labels are connected and every pixel has exactly one.

# In[3]:

sizes = np.array([sp.size for sp in spm.superpixels])
print("sizes min/median/max", sizes.min(), int(np.median(sizes)), sizes.max())
assert sizes.sum() == frame.rgb.shape[0] * frame.rgb.shape[1]


# Attach the filtered samples.  Superpixels with too few or collinear samples
# cannot carry a plane and are marked inadmissible.

# In[4]:

cfg = PipelineConfig()
spm = bind_depths(spm, suppress_misalignment(frame.sparse), cfg)
admissible = sum(sp.admissible for sp in spm.superpixels)
print(f"{admissible}/{spm.count} admissible (need >= {cfg.tau_m_min_points} samples)")


# Gray mode uses lightness only.  On these flat patches lightness alone already
# separates the surfaces, so both modes agree pixel for pixel.

# In[5]:

gray = slic(to_working_space(frame.rgb, "gray"), 1100, iters=5)
print("labels that differ from Lab:", int((gray.labels != spm.labels).sum()))


# Red next to a mid gray of the same lightness is another matter.  Count the
# superpixels that straddle the colour edge.

# In[6]:

vv, uu = np.mgrid[:96, :240]
left = uu < 90 + 0.6 * vv        # slanted, so it does not follow the seed grid
img = np.where(left[..., None], np.uint8([255, 0, 0]), np.uint8([126, 126, 126])).astype(np.uint8)
for mode in ("lab", "gray"):
    labels = slic(to_working_space(img, mode), 60, iters=10).labels
    mixed = np.intersect1d(labels[left], labels[~left]).size
    print(f"{mode}: {mixed} superpixels cover both colours")


# Save an overlay to look at.

# In[7]:

from PIL import Image

Image.fromarray(boundary_overlay(frame.rgb, spm.labels)).save("superpixels.png")
print("wrote superpixels.png")
