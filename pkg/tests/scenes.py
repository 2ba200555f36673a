"""Small constructed scenes shared by several test modules."""
from __future__ import annotations

import numpy as np

from tortho.field import GaussianField

SH_C0 = 0.28209479177387814
ROOF, GROUND, FACADE = (0.9, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.9)


def dc_for(rgb):
    return (np.asarray(rgb, float) - 0.5) / SH_C0


def flat_gaussians(xy, z, rgb, size, thin_axis=2, logit=6.0):
    """Disc-like Gaussians of radius ``size`` that are thin along ``thin_axis``."""
    n = len(xy)
    pos = np.column_stack([np.asarray(xy, float), np.broadcast_to(np.asarray(z, float), (n,))])
    if np.ndim(z):
        pos[:, 2] = z
    scales = np.full((n, 3), size)
    scales[:, thin_axis] = size * 0.05
    sh = np.zeros((n, 1, 3))
    sh[:, 0] = dc_for(rgb)
    return GaussianField(pos, np.tile([1.0, 0, 0, 0], (n, 1)), np.log(scales), np.full(n, logit), sh)


def roof_over_ground(half=5.0, height=10.0, spacing=0.1, inset=0.2, with_roof=True):
    """A flat-roofed block on a ground plane, with its four walls drawn in facade colour.

    The walls sit ``inset`` inside the roof outline, like eaves.
    """
    from tortho.field import concat_fields

    g = np.arange(-2 * half, 2 * half + 1e-9, 2 * spacing)
    gx, gy = np.meshgrid(g, g)
    ground = flat_gaussians(np.column_stack([gx.ravel(), gy.ravel()]), 0.0, GROUND, 1.5 * spacing)
    r = np.arange(-half, half + 1e-9, spacing)
    rx, ry = np.meshgrid(r, r)
    roof = flat_gaussians(np.column_stack([rx.ravel(), ry.ravel()]), height, ROOF, spacing)
    w = half - inset
    along = np.arange(-w, w + 1e-9, spacing)
    zs = np.arange(spacing, height - spacing + 1e-9, 2 * spacing)
    A, Z = np.meshgrid(along, zs)
    A, Z = A.ravel(), Z.ravel()
    walls = []
    for sign in (-1.0, 1.0):
        walls.append(flat_gaussians(np.column_stack([np.full_like(A, sign * w), A]), Z, FACADE, spacing, 0))
        walls.append(flat_gaussians(np.column_stack([A, np.full_like(A, sign * w)]), Z, FACADE, spacing, 1))
    parts = [ground] + walls + ([roof] if with_roof else [])
    return concat_fields(parts)


def facade_pixels(color):
    """Pixels whose colour is nearer the facade colour than to roof or ground."""
    refs = np.array([ROOF, GROUND, FACADE])
    d = np.linalg.norm(np.asarray(color)[..., None, :] - refs, axis=-1)
    return int((d.argmin(axis=-1) == 2).sum())


def aerial_survey(rng, nx=4, ny=3, spacing=10.0, altitude=30.0, n_points=400, yaw_deg=0.0):
    """Nadir cameras on a grid over a ground patch with two raised blocks.

    Returns ``(cameras, xyz, tracks)``; a point's track holds every camera
    that sees it inside the image.
    """
    from tortho.camera import PinholeCamera

    a = np.radians(yaw_deg)
    R = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1.0]])
    xs = (np.arange(nx) - (nx - 1) / 2) * spacing
    ys = (np.arange(ny) - (ny - 1) / 2) * spacing
    half = np.array([xs.max() + spacing, ys.max() + spacing])
    pts = np.column_stack([rng.uniform(-half[0], half[0], n_points), rng.uniform(-half[1], half[1], n_points),
                           rng.normal(0, 0.05, n_points)])
    for cx, cy, h in [(-spacing / 2, 0.0, 8.0), (spacing, spacing / 2, 5.0)]:
        inside = (np.abs(pts[:, 0] - cx) < 4) & (np.abs(pts[:, 1] - cy) < 3)
        pts[inside, 2] = h
    pts = pts @ R.T
    cams = []
    k = 1
    for y in ys:
        for x in xs:
            c = R @ np.array([x, y, altitude])
            cams.append(PinholeCamera.look_at(k, c, c - [0, 0, altitude], R @ [0, 1.0, 0], 400.0, 640, 480, f"img{k:03d}.jpg"))
            k += 1
    tracks = []
    for p in pts:
        seen = set()
        for cam in cams:
            q = cam.to_camera(p[None])[0]
            if q[2] > 0:
                u, v = cam.project(q[None])[0]
                if 0 <= u < cam.width and 0 <= v < cam.height:
                    seen.add(cam.id)
        tracks.append(frozenset(seen))
    return cams, pts, tracks


def _num(*vals):
    return " ".join(repr(float(v)) for v in vals)


def write_sfm_text(directory, cameras, xyz, tracks, rgb=None):
    """Write the three COLMAP text files with one PINHOLE camera model per image."""
    from scipy.spatial.transform import Rotation

    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "cameras.txt", "w") as fh:
        fh.write("# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n")
        for c in cameras:
            fh.write(f"{c.id} PINHOLE {c.width} {c.height} {_num(c.fx, c.fy, c.cx, c.cy)}\n")
    with open(directory / "images.txt", "w") as fh:
        fh.write("# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for c in cameras:
            x, y, z, w = Rotation.from_matrix(c.R).as_quat()
            fh.write(f"{c.id} {_num(w, x, y, z, *c.t)} {c.id} {c.name}\n\n")
    if rgb is None:
        rgb = np.full((len(xyz), 3), 128, dtype=int)
    with open(directory / "points3D.txt", "w") as fh:
        fh.write("# POINT3D_ID X Y Z R G B ERROR TRACK[]\n")
        for i, (p, col, tr) in enumerate(zip(xyz, rgb, tracks), start=1):
            track = " ".join(f"{img} 0" for img in sorted(tr))
            fh.write(f"{i} {_num(*p)} {col[0]} {col[1]} {col[2]} 0.5 {track}\n")
    return directory
