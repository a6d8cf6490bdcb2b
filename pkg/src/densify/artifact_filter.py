"""Suppression of background LiDAR points projected next to foreground points."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .core import DepthMap


class NeighborhoodSpec(NamedTuple):
    radius_u: int = 2
    radius_v: int = 4


def suppress_misalignment(sparse: DepthMap, tau_N: float = 1.15,
                          neighborhood: NeighborhoodSpec = NeighborhoodSpec()) -> DepthMap:
    """Zero every measurement lying behind a nearby measurement by a factor tau_N.

    A measured pixel y is removed when some other measured pixel x inside the
    rectangular neighbourhood satisfies ``D(y) >= D(x) * tau_N``.  All
    comparisons read the input map, so the result does not depend on pixel
    order.
    """
    if not tau_N > 1:
        raise ValueError("tau_N must be > 1")
    ru, rv = int(neighborhood.radius_u), int(neighborhood.radius_v)
    if ru < 0 or rv < 0:
        raise ValueError("neighbourhood radii must be >= 0")
    d = sparse.values
    valid = d > 0
    if (ru == 0 and rv == 0) or not valid.any():
        return sparse
    footprint = np.ones((2 * rv + 1, 2 * ru + 1), dtype=bool)
    footprint[rv, ru] = False
    nearest = ndimage.minimum_filter(np.where(valid, d, np.inf), footprint=footprint,
                                     mode="constant", cval=np.inf)
    drop = valid & (d >= nearest * tau_N)
    if not drop.any():
        return sparse
    return DepthMap(np.where(drop, 0.0, d))
