"""Regenerate the bundled regression scenes under src/densify/data/scenes/.

Scenes are 1216 x 352 with KITTI-like intrinsics, built from large,
distinctly coloured planar patches.  Run from the repository root:

    python scripts/make_scenes.py
"""
from pathlib import Path

import numpy as np
from skimage import measure

from densify.core import CameraModel
from densify.synth import Patch, SyntheticScene, ground_truth, patch_ids, save_scene

W, H = 1216, 352
FX = FY = 721.5377
CX, CY = 609.5593, 172.854
CAM = CameraModel.from_intrinsics(FX, FY, CX, CY)
OUT = Path(__file__).resolve().parents[1] / "src" / "densify" / "data" / "scenes"


def rect(u0, v0, u1, v1):
    return ((u0, v0), (u1, v0), (u1, v1), (u0, v1))


def wall(z):                 # fronto-parallel, Z = z
    return (0.0, 0.0, -1.0, float(z))


def ground(h=1.65):          # Y = h (y axis points down)
    return (0.0, 1.0, 0.0, -h)


def side(x):                 # X = x
    return (1.0, 0.0, 0.0, -float(x))


def tilted(z0, ax, ay=0.0):  # Z = z0 + ax X + ay Y
    return (ax, ay, -1.0, z0)


def row_at_depth(z, h=1.65):
    """Image row where the ground plane reaches depth z."""
    return CY + FY * h / z


def col_at_depth(z, x):
    """Image column where the side wall X = x reaches depth z."""
    return CX + FX * x / z


def scenes():
    g40 = row_at_depth(40)
    yield "s01_box_on_wall", [
        Patch(wall(25), (40, 60, 200)),
        Patch(wall(8), (220, 40, 30), rect(380, 60, 760, 300)),
    ]
    yield "s02_road_and_wall", [
        Patch(wall(40), (60, 60, 200)),
        Patch(ground(), (90, 90, 90), rect(0, g40 + 1, W, H)),
    ]
    left_end = col_at_depth(40, -6)
    right_end = col_at_depth(40, 6)
    yield "s03_street_canyon", [
        Patch(wall(40), (40, 40, 220)),
        Patch(ground(), (100, 100, 100), rect(0, g40 + 1, W, H)),
        Patch(side(-6), (200, 50, 40), ((0, 0), (left_end - 2, 0), (left_end - 2, H), (0, H))),
        Patch(side(6), (40, 180, 60), ((right_end + 2, 0), (W, 0), (W, H), (right_end + 2, H))),
    ]
    yield "s04_tilted_panels", [
        Patch(wall(30), (230, 230, 60)),
        Patch(tilted(12, 0.4), (30, 30, 160), rect(60, 40, 560, 320)),
        Patch(tilted(15, -0.3, 0.2), (200, 30, 150), rect(640, 30, 1160, 330)),
    ]
    yield "s05_staggered_boxes", [
        Patch(wall(35), (50, 50, 50)),
        Patch(wall(6), (230, 60, 60), rect(40, 120, 300, 340)),
        Patch(wall(10), (60, 220, 60), rect(340, 80, 640, 320)),
        Patch(wall(15), (60, 60, 230), rect(680, 40, 980, 280)),
        Patch(wall(20), (230, 200, 50), rect(1000, 100, 1200, 300)),
    ]
    yield "s06_roof_pair", [
        Patch(wall(50), (140, 200, 240)),
        Patch(tilted(14, 0.0, -0.8), (200, 80, 30), ((200, 40), (1000, 40), (1000, 180), (200, 180))),
        Patch(tilted(14, 0.0, 0.6), (110, 40, 20), ((200, 181), (1000, 181), (1000, 330), (200, 330))),
    ]
    yield "s07_oblique_walls", [
        Patch(wall(45), (240, 240, 240)),
        Patch(ground(), (80, 80, 80), rect(0, row_at_depth(45) + 1, W, H)),
        Patch(tilted(18, 1.2), (30, 120, 200), rect(80, 20, 520, 250)),
        Patch(tilted(18, -1.0), (200, 120, 30), rect(700, 20, 1140, 250)),
    ]
    yield "s08_triangles", [
        Patch(wall(28), (20, 20, 120)),
        Patch(tilted(9, 0.2, 0.1), (220, 220, 40), ((100, 330), (500, 20), (900, 330))),
        Patch(tilted(13, -0.25, 0.0), (40, 200, 200), ((700, 30), (712, 30), (1180, 40), (1100, 320))),
    ]
    yield "s09_bands", [
        Patch(wall(60), (30, 30, 30)),
        Patch(wall(12), (240, 80, 80), rect(0, 0, W, 110)),
        Patch(wall(18), (80, 240, 80), rect(0, 111, W, 230)),
        Patch(wall(9), (80, 80, 240), rect(0, 231, W, H)),
    ]
    yield "s10_plaza", [
        Patch(wall(55), (180, 220, 250)),
        Patch(ground(1.8), (120, 110, 90), rect(0, row_at_depth(55, 1.8) + 1, W, H)),
        Patch(wall(14), (200, 40, 40), rect(150, 60, 450, row_at_depth(14, 1.8))),
        Patch(tilted(20, 0.5), (40, 160, 60), rect(700, 30, 1100, row_at_depth(26, 1.8))),
    ]


MIN_FRAGMENT = 64


def check_fragments(scene):
    """Every visible 4-connected piece of a patch must be big enough to hold a superpixel."""
    comp = measure.label(patch_ids(scene), background=-1, connectivity=1)
    sizes = np.bincount(comp.ravel())[1:]
    assert sizes.min() >= MIN_FRAGMENT, (scene.name, sizes.min())


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, patches in scenes():
        scene = SyntheticScene(W, H, CAM, tuple(patches), name=name)
        gt = ground_truth(scene)
        check_fragments(scene)
        assert gt.min() > 0 and gt.max() < 80_000, (name, gt.min(), gt.max())
        save_scene(scene, OUT / f"{name}.scene")
        print(f"{name}: depth {gt.min() / 1000:.2f}..{gt.max() / 1000:.2f} m")


if __name__ == "__main__":
    main()
