"""Tile-based orthographic splatting.

Pixel ``(col, row)`` has its centre at continuous coordinate ``(col, row)``;
row 0 is the top (maximum view-space y). A projected Gaussian touches a pixel
only when the pixel centre lies inside its axis-aligned cutoff box
``|dx| <= radius and |dy| <= radius``; tile binning uses the same box, so the
tiled result does not depend on the tile size.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .field import GaussianField, covariances, field_activations, field_colors
from .projection import DILATION, Frustum, ViewTransform, ortho_jacobian, project_covariance

VIEW_DIR = np.array([0.0, 0.0, -1.0])  # orthographic ray direction in view space


@dataclass(frozen=True)
class RenderOptions:
    tile_size: int = 16
    sigma_cutoff: float = 3.0
    alpha_cap: float = 0.99
    alpha_min: float = 1.0 / 255.0
    t_min: float = 1e-4
    dilation: float = DILATION
    sh_degree: int = 3
    use_fagk: bool = True
    threads: int = 1


@dataclass(frozen=True)
class ScreenGaussian:
    center: np.ndarray
    inv_cov: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float
    radius: float
    index: int = 0


@dataclass(frozen=True)
class ScreenGaussians:
    """Column store of projected Gaussians.

    ``conic`` holds the inverse covariance as ``(a, b, c)`` for
    ``[[a, b], [b, c]]``; ``depth`` is the distance along the viewing
    direction (smaller is nearer the viewer).
    """

    index: np.ndarray
    center: np.ndarray
    conic: np.ndarray
    cov: np.ndarray
    depth: np.ndarray
    color: np.ndarray
    opacity: np.ndarray
    radius: np.ndarray

    def __len__(self):
        return len(self.index)

    def record(self, i) -> ScreenGaussian:
        a, b, c = self.conic[i]
        return ScreenGaussian(
            center=self.center[i],
            inv_cov=np.array([[a, b], [b, c]]),
            depth=float(self.depth[i]),
            color=self.color[i],
            opacity=float(self.opacity[i]),
            radius=float(self.radius[i]),
            index=int(self.index[i]),
        )

    def records(self):
        return [self.record(i) for i in range(len(self))]

    @classmethod
    def from_records(cls, recs):
        recs = list(recs)
        if not recs:
            z = np.zeros(0)
            return cls(np.zeros(0, int), np.zeros((0, 2)), np.zeros((0, 3)), np.zeros((0, 2, 2)), z, np.zeros((0, 3)), z, z)
        inv = np.array([g.inv_cov for g in recs])
        return cls(
            index=np.array([g.index for g in recs]),
            center=np.array([g.center for g in recs], dtype=float),
            conic=np.stack([inv[:, 0, 0], inv[:, 0, 1], inv[:, 1, 1]], axis=1),
            cov=np.linalg.inv(inv),
            depth=np.array([g.depth for g in recs], dtype=float),
            color=np.array([g.color for g in recs], dtype=float),
            opacity=np.array([g.opacity for g in recs], dtype=float),
            radius=np.array([g.radius for g in recs], dtype=float),
        )


@dataclass
class TileGrid:
    tile_size: int
    tiles_x: int
    tiles_y: int
    lists: list  # per tile (row-major), arrays of ScreenGaussians row ids

    def tile(self, tx, ty) -> np.ndarray:
        return self.lists[ty * self.tiles_x + tx]


@dataclass
class Raster:
    color: np.ndarray  # (H, W, 3) float
    transmittance: np.ndarray  # (H, W)

    @property
    def height(self):
        return self.color.shape[0]

    @property
    def width(self):
        return self.color.shape[1]

    def to_uint8(self) -> np.ndarray:
        return np.round(np.clip(self.color, 0.0, 1.0) * 255.0).astype(np.uint8)


def pixel_coords(points_view, f: Frustum, width: int, height: int):
    """Continuous pixel coordinates of view-space points (z is ignored)."""
    sx = 2.0 / (f.r - f.l)
    ox = -(f.r + f.l) / (f.r - f.l)
    sy = 2.0 / (f.t - f.b)
    oy = -(f.t + f.b) / (f.t - f.b)
    ndc_x = sx * points_view[:, 0] + ox
    ndc_y = sy * points_view[:, 1] + oy
    u = (ndc_x + 1.0) * (width / 2.0) - 0.5
    v = (1.0 - ndc_y) * (height / 2.0) - 0.5
    return np.stack([u, v], axis=1)


def _pixel_span(center, radius, n):
    lo = np.maximum(np.ceil(center - radius), 0)
    hi = np.minimum(np.floor(center + radius), n - 1)
    return lo.astype(np.int64), hi.astype(np.int64)


def cull_and_project(
    field: GaussianField, view: ViewTransform, f: Frustum, grid, options: RenderOptions = RenderOptions()
) -> ScreenGaussians:
    """Project every primitive inside the orthographic box to pixel space."""
    W, H = grid.width, grid.height
    empty = ScreenGaussians.from_records([])
    if field.count == 0:
        return empty

    p_view = view.apply(field.positions)
    depth = -p_view[:, 2]
    keep = (depth >= f.z_n) & (depth <= f.z_f)
    if not keep.any():
        return empty
    idx = np.nonzero(keep)[0]
    sub = field.subset(idx)

    dir_world = view.rotation.T @ VIEW_DIR
    opacity, scale, rot = field_activations(sub, dir_world, options.sh_degree, options.use_fagk)
    color = field_colors(sub, dir_world, options.sh_degree)

    cov3 = covariances(rot, scale)
    cov2 = project_covariance(cov3, view, ortho_jacobian(f), (W / 2.0, -H / 2.0), options.dilation)
    a, b, c = cov2[:, 0, 0], cov2[:, 0, 1], cov2[:, 1, 1]
    det = a * c - b * b
    if not (np.all(np.isfinite(cov2)) and np.all(det > 0)):
        raise NumericError("projected covariance is not positive definite")
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = options.sigma_cutoff * np.sqrt(lam_max)
    conic = np.stack([c / det, -b / det, a / det], axis=1)

    center = pixel_coords(p_view[idx], f, W, H)
    x0, x1 = _pixel_span(center[:, 0], radius, W)
    y0, y1 = _pixel_span(center[:, 1], radius, H)
    vis = (x0 <= x1) & (y0 <= y1)

    return ScreenGaussians(
        index=idx[vis],
        center=center[vis],
        conic=conic[vis],
        cov=cov2[vis],
        depth=depth[idx][vis],
        color=color[vis],
        opacity=opacity[vis],
        radius=radius[vis],
    )


def bin_tiles(gs: ScreenGaussians, width: int, height: int, tile_size: int = 16) -> TileGrid:
    """Assign each Gaussian to every tile its cutoff box overlaps, front to back."""
    tiles_x = -(-width // tile_size)
    tiles_y = -(-height // tile_size)
    n_tiles = tiles_x * tiles_y
    if len(gs) == 0:
        return TileGrid(tile_size, tiles_x, tiles_y, [np.zeros(0, np.int64)] * n_tiles)

    x0, x1 = _pixel_span(gs.center[:, 0], gs.radius, width)
    y0, y1 = _pixel_span(gs.center[:, 1], gs.radius, height)
    ok = (x0 <= x1) & (y0 <= y1)
    rows = np.nonzero(ok)[0]
    tx0, tx1 = x0[ok] // tile_size, x1[ok] // tile_size
    ty0, ty1 = y0[ok] // tile_size, y1[ok] // tile_size
    nx, ny = tx1 - tx0 + 1, ty1 - ty0 + 1
    counts = nx * ny

    g = np.repeat(rows, counts)
    # local offset of each (gaussian, tile) pair inside the gaussian's tile block
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    local = np.arange(len(g)) - starts
    rep_nx = np.repeat(nx, counts)
    tx = np.repeat(tx0, counts) + local % rep_nx
    ty = np.repeat(ty0, counts) + local // rep_nx
    tile = ty * tiles_x + tx

    order = np.lexsort((gs.index[g], gs.depth[g], tile))
    tile, g = tile[order], g[order]
    bounds = np.searchsorted(tile, np.arange(n_tiles + 1))
    lists = [g[bounds[k] : bounds[k + 1]] for k in range(n_tiles)]
    return TileGrid(tile_size, tiles_x, tiles_y, lists)


def blend_pixel(sorted_gs, pixel, background, options: RenderOptions = RenderOptions()):
    """Front-to-back alpha blending at one pixel.

    ``sorted_gs`` is a sequence of :class:`ScreenGaussian` ordered front to
    back. Returns ``(rgb, transmittance)``.
    """
    px, py = float(pixel[0]), float(pixel[1])
    T = 1.0
    C = np.zeros(3)
    for g in sorted_gs:
        if T < options.t_min:
            break
        dx = px - g.center[0]
        dy = py - g.center[1]
        if abs(dx) > g.radius or abs(dy) > g.radius:
            continue
        a, b, c = g.inv_cov[0, 0], g.inv_cov[0, 1], g.inv_cov[1, 1]
        power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
        alpha = min(options.alpha_cap, g.opacity * math.exp(power))
        if alpha < options.alpha_min:
            continue
        C = C + np.asarray(g.color) * (alpha * T)
        T = T * (1.0 - alpha)
    return C + T * np.asarray(background, dtype=float), T


def _blend_tile(gs: ScreenGaussians, ids, xs, ys, background, options):
    """Blend one tile. ``xs``/``ys`` are flattened pixel centres."""
    P = len(xs)
    if len(ids) == 0:
        return np.broadcast_to(background, (P, 3)).copy(), np.ones(P)
    cx = gs.center[ids, 0][:, None]
    cy = gs.center[ids, 1][:, None]
    r = gs.radius[ids][:, None]
    dx = xs[None, :] - cx
    dy = ys[None, :] - cy
    a = gs.conic[ids, 0][:, None]
    b = gs.conic[ids, 1][:, None]
    c = gs.conic[ids, 2][:, None]
    power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
    alpha = np.minimum(options.alpha_cap, gs.opacity[ids][:, None] * np.exp(power))
    alpha[(np.abs(dx) > r) | (np.abs(dy) > r) | (alpha < options.alpha_min)] = 0.0

    trans = np.cumprod(1.0 - alpha, axis=0)
    t_before = np.vstack([np.ones((1, P)), trans[:-1]])
    live = t_before >= options.t_min
    w = np.where(live, alpha * t_before, 0.0)
    # live is a prefix along axis 0, so the final T is the last live product
    n_live = live.sum(axis=0)
    t_final = np.where(n_live > 0, trans[np.maximum(n_live - 1, 0), np.arange(P)], 1.0)
    rgb = w.T @ gs.color[ids] + t_final[:, None] * background[None, :]
    return rgb, t_final


def render(
    field: GaussianField,
    view: ViewTransform,
    frustum: Frustum,
    grid,
    background=(0.0, 0.0, 0.0),
    options: RenderOptions = RenderOptions(),
) -> Raster:
    W, H = grid.width, grid.height
    bg = np.asarray(background, dtype=float)
    gs = cull_and_project(field, view, frustum, grid, options)
    tiles = bin_tiles(gs, W, H, options.tile_size)
    color = np.empty((H, W, 3))
    trans = np.empty((H, W))
    ts = options.tile_size

    def work(k):
        ty, tx = divmod(k, tiles.tiles_x)
        x_lo, y_lo = tx * ts, ty * ts
        x_hi, y_hi = min(x_lo + ts, W), min(y_lo + ts, H)
        yy, xx = np.mgrid[y_lo:y_hi, x_lo:x_hi]
        rgb, t = _blend_tile(gs, tiles.lists[k], xx.ravel().astype(float), yy.ravel().astype(float), bg, options)
        color[y_lo:y_hi, x_lo:x_hi] = rgb.reshape(y_hi - y_lo, x_hi - x_lo, 3)
        trans[y_lo:y_hi, x_lo:x_hi] = t.reshape(y_hi - y_lo, x_hi - x_lo)

    n = tiles.tiles_x * tiles.tiles_y
    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            list(pool.map(work, range(n)))
    else:
        for k in range(n):
            work(k)
    return Raster(color, trans)
