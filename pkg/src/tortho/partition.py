"""Divide-and-conquer planning for large scenes.

Cameras are split into ``m`` sections along x at camera-count quantiles and
each section into ``n`` cells along y. Base rectangles tile the scene
rectangle with half-open edges (lower/left inclusive). For membership tests
the sides that lie on the scene boundary are unbounded, so every point in
the plane belongs to exactly one cell.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, PlanningError
from .field import GaussianField, concat_fields

log = logging.getLogger(__name__)

EXPAND_RATIO = 0.2
VISIBILITY_THRESHOLD = 0.25


class PartitionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def scaled(self, factor) -> "Rect":
        cx, cy = self.center
        hw, hh = 0.5 * self.width * factor, 0.5 * self.height * factor
        return Rect(cx - hw, cx + hw, cy - hh, cy + hh)

    def contains_closed(self, xy):
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        return (xy[:, 0] >= self.x0) & (xy[:, 0] <= self.x1) & (xy[:, 1] >= self.y0) & (xy[:, 1] <= self.y1)

    def contains(self, rect: "Rect") -> bool:
        return self.x0 <= rect.x0 and rect.x1 <= self.x1 and self.y0 <= rect.y0 and rect.y1 <= self.y1

    def overlap_area(self, other: "Rect") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return max(w, 0.0) * max(h, 0.0)

    def as_list(self):
        return [self.x0, self.x1, self.y0, self.y1]


@dataclass(frozen=True)
class Cell:
    id: tuple
    base_rect: Rect
    expanded_rect: Rect
    cameras: frozenset = frozenset()
    points: frozenset = frozenset()
    # sides lying on the scene boundary: (left, right, bottom, top)
    outer: tuple = (False, False, False, False)

    def contains(self, xy) -> np.ndarray:
        """Half-open membership; outer sides extend to infinity."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        x, y = xy[:, 0], xy[:, 1]
        left, right, bottom, top = self.outer
        b = self.base_rect
        ok = np.ones(len(xy), dtype=bool)
        if not left:
            ok &= x >= b.x0
        if not right:
            ok &= x < b.x1
        if not bottom:
            ok &= y >= b.y0
        if not top:
            ok &= y < b.y1
        return ok


def _scene_rect(xy, bounds=None) -> Rect:
    x0, y0 = xy.min(axis=0)
    x1, y1 = xy.max(axis=0)
    if bounds is not None:
        x0, x1 = min(x0, bounds.x0), max(x1, bounds.x1)
        y0, y1 = min(y0, bounds.y0), max(y1, bounds.y1)
    w, h = x1 - x0, y1 - y0
    # a flat camera layout still needs a 2D rectangle
    if w <= 0:
        pad = 0.5 * (h if h > 0 else 1.0)
        x0, x1 = x0 - pad, x1 + pad
    if h <= 0:
        pad = 0.5 * ((x1 - x0) if (x1 - x0) > 0 else 1.0)
        y0, y1 = y0 - pad, y1 + pad
    return Rect(float(x0), float(x1), float(y0), float(y1))


def _quantile_cuts(values, k, lo, hi, what):
    """Interior cut positions splitting ``values`` into ``k`` balanced groups."""
    v = np.sort(np.asarray(values, dtype=float), kind="stable")
    if k == 1:
        return np.array([lo, hi])
    sizes = [len(v) // k + (1 if i < len(v) % k else 0) for i in range(k)]
    ends = np.cumsum(sizes)[:-1]
    degenerate = len(v) < k or any(v[e - 1] == v[e] for e in ends)
    if degenerate:
        warnings.warn(f"{what}: coincident cameras at a quantile cut; using equal-width split", PartitionWarning)
        return np.linspace(lo, hi, k + 1)
    mids = 0.5 * (v[ends - 1] + v[ends])
    return np.concatenate([[lo], mids, [hi]])


def _assign(values, cuts):
    k = len(cuts) - 1
    return np.clip(np.searchsorted(cuts[1:-1], values, side="right"), 0, k - 1)


def partition_cameras(centers, m: int, n: int, ids=None, bounds: Rect | None = None) -> list[Cell]:
    """Balanced ``m x n`` split of ground-projected camera centres.

    Returns cells ordered by section ``i`` (along x) then cell ``j`` (along y).
    """
    xy = np.asarray(centers, dtype=float)[:, :2]
    if m < 1 or n < 1:
        raise ArgumentError("grid dimensions must be positive")
    if len(xy) < m * n:
        raise ArgumentError(f"{len(xy)} cameras cannot fill a {m}x{n} grid")
    ids = np.arange(len(xy)) if ids is None else np.asarray(ids)
    scene = _scene_rect(xy, bounds)

    xcuts = _quantile_cuts(xy[:, 0], m, scene.x0, scene.x1, "x split")
    section = _assign(xy[:, 0], xcuts)
    cells = []
    for i in range(m):
        in_sec = section == i
        ycuts = _quantile_cuts(xy[in_sec, 1], n, scene.y0, scene.y1, f"y split of section {i}")
        row = _assign(xy[:, 1], ycuts)
        for j in range(n):
            base = Rect(float(xcuts[i]), float(xcuts[i + 1]), float(ycuts[j]), float(ycuts[j + 1]))
            members = ids[in_sec & (row == j)]
            cells.append(
                Cell(
                    id=(i, j),
                    base_rect=base,
                    expanded_rect=base,
                    cameras=frozenset(int(c) for c in members),
                    outer=(i == 0, i == m - 1, j == 0, j == n - 1),
                )
            )
    return cells


def expand_cell(c: Cell, ratio: float = EXPAND_RATIO) -> Cell:
    if ratio < 0:
        raise ArgumentError("expansion ratio must be non-negative")
    return replace(c, expanded_rect=c.base_rect.scaled(1.0 + ratio))


# -- visibility -------------------------------------------------------------

_BOX_EDGES = [(0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7)]


def convex_hull(pts):
    """Andrew's monotone chain; counter-clockwise, no repeated endpoint."""
    pts = sorted(set(map(tuple, np.asarray(pts, dtype=float))))
    if len(pts) <= 2:
        return [np.array(p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


def clip_polygon(poly, x0, x1, y0, y1):
    """Sutherland-Hodgman clip of a polygon against an axis-aligned rectangle."""
    planes = [
        (lambda p: p[0] >= x0, lambda a, b: (x0 - a[0]) / (b[0] - a[0])),
        (lambda p: p[0] <= x1, lambda a, b: (x1 - a[0]) / (b[0] - a[0])),
        (lambda p: p[1] >= y0, lambda a, b: (y0 - a[1]) / (b[1] - a[1])),
        (lambda p: p[1] <= y1, lambda a, b: (y1 - a[1]) / (b[1] - a[1])),
    ]
    out = list(poly)
    for inside, t_of in planes:
        if not out:
            break
        src, out = out, []
        prev = src[-1]
        for cur in src:
            if inside(cur):
                if not inside(prev):
                    out.append(prev + t_of(prev, cur) * (cur - prev))
                out.append(cur)
            elif inside(prev):
                out.append(prev + t_of(prev, cur) * (cur - prev))
            prev = cur
    return out


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    p = np.asarray(poly)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def camera_visibility(cell: Cell, cam, z_range, near: float = 1e-6) -> float:
    """Fraction of the image covered by the projected (expanded) cell volume."""
    r = cell.expanded_rect
    z0, z1 = z_range
    corners = np.array([[x, y, z] for x in (r.x0, r.x1) for y in (r.y0, r.y1) for z in (z0, z1)])
    pc = cam.to_camera(corners)
    front = pc[:, 2] > near
    if not front.any():
        return 0.0
    verts = [pc[k] for k in np.nonzero(front)[0]]
    for a, b in _BOX_EDGES:
        if front[a] != front[b]:
            s = (near - pc[a, 2]) / (pc[b, 2] - pc[a, 2])
            verts.append(pc[a] + s * (pc[b] - pc[a]))
    uv = cam.project(np.array(verts))
    hull = convex_hull(uv)
    clipped = clip_polygon(hull, 0.0, float(cam.width), 0.0, float(cam.height))
    return min(polygon_area(clipped) / (cam.width * cam.height), 1.0)


def select_cameras(cells, cameras, threshold: float = VISIBILITY_THRESHOLD, z_range=(0.0, 0.0)) -> list[Cell]:
    """Cameras inside each expanded cell plus those that see enough of it."""
    centers = np.array([c.center[:2] for c in cameras]) if cameras else np.zeros((0, 2))
    out = []
    for cell in cells:
        inside = cell.expanded_rect.contains_closed(centers) if len(centers) else np.zeros(0, bool)
        chosen = set()
        for k, cam in enumerate(cameras):
            if inside[k] or camera_visibility(cell, cam, z_range) > threshold:
                chosen.add(int(cam.id))
        if not chosen:
            raise PlanningError(f"cell {cell.id} has no cameras")
        out.append(replace(cell, cameras=frozenset(chosen)))
    return out


def select_points(cell: Cell, point_ids, xyz, tracks) -> frozenset:
    """Points inside the expanded cell plus every point a selected camera observed."""
    xyz = np.asarray(xyz, dtype=float)
    inside = cell.expanded_rect.contains_closed(xyz[:, :2]) if len(xyz) else np.zeros(0, bool)
    cams = cell.cameras
    chosen = set()
    for k, pid in enumerate(point_ids):
        if inside[k] or not cams.isdisjoint(tracks[k]):
            chosen.add(int(pid))
    return frozenset(chosen)


def check_tiling(cells):
    for a in range(len(cells)):
        for b in range(a + 1, len(cells)):
            if cells[a].base_rect.overlap_area(cells[b].base_rect) > 0:
                raise PlanningError(f"base rectangles of cells {cells[a].id} and {cells[b].id} overlap")


def merge_fields(subfields, cells) -> GaussianField:
    """Keep from each cell's field only the primitives inside its base rectangle."""
    if len(subfields) != len(cells):
        raise ArgumentError("one field per cell is required")
    check_tiling(cells)
    parts = [f.subset(np.nonzero(c.contains(f.positions[:, :2]))[0]) for f, c in zip(subfields, cells)]
    return concat_fields(parts)


@dataclass
class PartitionPlan:
    m: int
    n: int
    cells: list
    expand_ratio: float = EXPAND_RATIO
    threshold: float = VISIBILITY_THRESHOLD
    z_range: tuple = (0.0, 0.0)
    camera_names: dict = field(default_factory=dict)

    def to_manifest(self) -> dict:
        cells = []
        for c in self.cells:
            cams = sorted(c.cameras)
            cells.append(
                {
                    "id": list(c.id),
                    "base_rect": c.base_rect.as_list(),
                    "expanded_rect": c.expanded_rect.as_list(),
                    "num_cameras": len(cams),
                    "cameras": cams,
                    "camera_names": [self.camera_names.get(k, "") for k in cams],
                    "num_points": len(c.points),
                }
            )
        return {
            "grid": [self.m, self.n],
            "expand_ratio": self.expand_ratio,
            "visibility_threshold": self.threshold,
            "z_range": list(self.z_range),
            "cells": cells,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_manifest(), indent=2, sort_keys=True) + "\n"


def plan_partition(
    cameras,
    point_ids,
    xyz,
    tracks,
    m: int,
    n: int,
    ratio: float = EXPAND_RATIO,
    threshold: float = VISIBILITY_THRESHOLD,
) -> PartitionPlan:
    """Run the four planning steps: split, expand, camera and point selection."""
    centers = np.array([c.center for c in cameras])
    xyz = np.asarray(xyz, dtype=float)
    if len(xyz):
        z_range = (float(xyz[:, 2].min()), float(xyz[:, 2].max()))
    else:
        z_range = (0.0, 0.0)
    cells = partition_cameras(centers, m, n, ids=[c.id for c in cameras])
    cells = [expand_cell(c, ratio) for c in cells]
    cells = select_cameras(cells, cameras, threshold, z_range)
    cells = [replace(c, points=select_points(c, point_ids, xyz, tracks)) for c in cells]
    for c in cells:
        log.info("cell %s: %d cameras, %d points", c.id, len(c.cameras), len(c.points))
    return PartitionPlan(m, n, cells, ratio, threshold, z_range, {c.id: c.name for c in cameras})
