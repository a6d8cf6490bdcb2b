"""Guided LiDAR depth completion by superpixel-wise plane fitting.

A sparse depth map, an aligned RGB image and the camera matrix go in; a dense
depth map comes out.  Depths are in millimetres throughout (0 = missing),
3-D points in metres.
"""
from .artifact_filter import NeighborhoodSpec, suppress_misalignment
from .core import CameraModel, DepthMap, PipelineConfig, PixelCoord, Plane, load_config, \
    parse_config
from .errors import DensifyError, InputError, InvariantViolation
from .fusion import fill, fill_morphological, fill_nn_jbf, median_fuse
from .interpolate import interpolate_pixels, interpolation_loss, intersect, refine
from .kitti_io import FrameBundle, discover_frames, load_frame, read_depth_png, write_depth_png
from .metrics import ErrorReport, evaluate
from .pipeline import compose_pipeline
from .plane_fit import fit_tls
from .ransac_hull import convex_hull, ransac_plane
from .superpixel import SuperpixelMap, bind_depths, slic
from .synth import SyntheticScene, load_scene, render

__version__ = "0.1.0"
