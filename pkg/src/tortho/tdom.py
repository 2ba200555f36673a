"""TDOM grid construction and the orthographic rendering pipeline.

Grid convention: column ``i`` has world X ``cx + sx*(i - W/2 + dx)``; rows
are north-up, so raster row ``r`` corresponds to the upward index
``j = H - 1 - r`` with world Y ``cy + sy*(j - H/2 + dy)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .field import GaussianField
from .projection import Frustum, ViewTransform
from .rasterizer import Raster, RenderOptions, render

log = logging.getLogger(__name__)

Z_MARGIN = 0.05


@dataclass(frozen=True)
class TdomGridSpec:
    center_x: float
    center_y: float
    sx: float
    sy: float
    width: int
    height: int
    dx: float = 0.5
    dy: float = 0.5

    def __post_init__(self):
        if not (self.sx > 0 and self.sy > 0):
            raise ArgumentError("spatial resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ArgumentError("grid must be at least 1x1 pixels")

    def pixel_x(self, i):
        return self.center_x + self.sx * (np.asarray(i) - self.width / 2 + self.dx)

    def pixel_y_up(self, j):
        """World Y of the upward row index ``j`` (0 = southernmost row)."""
        return self.center_y + self.sy * (np.asarray(j) - self.height / 2 + self.dy)

    def pixel_to_world(self, col, row):
        """World ``(X, Y)`` of a raster pixel centre (row 0 at the top)."""
        return self.pixel_x(col), self.pixel_y_up(self.height - 1 - np.asarray(row))

    @property
    def extent(self):
        """``(x_min, x_max, y_min, y_max)`` of the pixel lattice."""
        hw = self.width * self.sx / 2
        hh = self.height * self.sy / 2
        return self.center_x - hw, self.center_x + hw, self.center_y - hh, self.center_y + hh

    def world_file(self):
        """The six affine parameters of a world file, pixel (0, 0) centre based."""
        x0, y0 = self.pixel_to_world(0, 0)
        return (self.sx, 0.0, 0.0, -self.sy, float(x0), float(y0))


def camera_centroid(positions):
    """Mean camera ``(X, Y)``, summed with ``math.fsum``."""
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ArgumentError("need at least one camera position")
    n = len(pts)
    return math.fsum(pts[:, 0]) / n, math.fsum(pts[:, 1]) / n


def grid_from_field(bounds, centroid, sx, sy, width=None, height=None) -> TdomGridSpec:
    """Centroid-centred grid just large enough to cover the field bounds."""
    if not (sx > 0 and sy > 0):
        raise ArgumentError("spatial resolution must be positive")
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    cx, cy = centroid
    if width is None:
        half = max(abs(hi[0] - cx), abs(lo[0] - cx))
        width = max(2 * math.ceil(half / sx), 2)
    if height is None:
        half = max(abs(hi[1] - cy), abs(lo[1] - cy))
        height = max(2 * math.ceil(half / sy), 2)
    return TdomGridSpec(float(cx), float(cy), float(sx), float(sy), int(width), int(height))


def ortho_setup(grid: TdomGridSpec, z_bounds):
    """Top-down view transform and orthographic frustum for a grid.

    The eye sits above the field; near/far distances bracket its z-range
    with a 5% margin.
    """
    z_lo, z_hi = (float(z) for z in z_bounds)
    margin = Z_MARGIN * max(z_hi - z_lo, 1e-6)
    eye = z_hi + margin
    view = ViewTransform.from_rt(np.eye(3), [0.0, 0.0, -eye])
    x0, x1, y0, y1 = grid.extent
    frustum = Frustum(x0, x1, y0, y1, eye - (z_hi + margin), eye - (z_lo - margin))
    return view, frustum


@dataclass
class TdomResult:
    raster: Raster
    grid: TdomGridSpec
    view: ViewTransform
    frustum: Frustum

    @property
    def world_file(self):
        return self.grid.world_file()


def render_tdom(
    field: GaussianField, grid: TdomGridSpec, background=(0.0, 0.0, 0.0), options: RenderOptions = RenderOptions()
) -> TdomResult:
    """Orthographic splat of an aligned (z-up) field onto the grid."""
    if field.count:
        lo, hi = field.bounds
        z_bounds = (lo[2], hi[2])
    else:
        z_bounds = (0.0, 1.0)
    view, frustum = ortho_setup(grid, z_bounds)
    log.info("rendering %d gaussians onto %dx%d grid", field.count, grid.width, grid.height)
    raster = render(field, view, frustum, grid, background, options)
    return TdomResult(raster, grid, view, frustum)
