"""Reader for structure-from-motion reconstructions in the COLMAP text layout.

Expects ``cameras.txt``, ``images.txt`` and ``points3D.txt`` in one
directory. Distortion parameters are read but not used.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..camera import PinholeCamera
from ..errors import FormatError, SfmParseError
from ..field import quat_to_rotmat

QUAT_TOL = 1e-3

# model name -> (number of params, index of fx, fy, cx, cy)
CAMERA_MODELS = {
    "SIMPLE_PINHOLE": (3, (0, 0, 1, 2)),
    "PINHOLE": (4, (0, 1, 2, 3)),
    "SIMPLE_RADIAL": (4, (0, 0, 1, 2)),
    "RADIAL": (5, (0, 0, 1, 2)),
    "OPENCV": (8, (0, 1, 2, 3)),
    "FULL_OPENCV": (12, (0, 1, 2, 3)),
    "SIMPLE_RADIAL_FISHEYE": (4, (0, 0, 1, 2)),
    "RADIAL_FISHEYE": (5, (0, 0, 1, 2)),
    "OPENCV_FISHEYE": (8, (0, 1, 2, 3)),
}


@dataclass
class SparseModel:
    cameras: list  # PinholeCamera, one per registered image
    point_ids: np.ndarray
    xyz: np.ndarray
    rgb: np.ndarray
    errors: np.ndarray
    tracks: list  # per point: frozenset of image ids

    @property
    def camera_centers(self):
        return np.array([c.center for c in self.cameras]) if self.cameras else np.zeros((0, 3))

    @property
    def optical_axes(self):
        return np.array([c.optical_axis for c in self.cameras]) if self.cameras else np.zeros((0, 3))

    def transformed(self, T) -> "SparseModel":
        return SparseModel(
            [c.transformed(T.rotation, T.translation) for c in self.cameras],
            self.point_ids,
            T.apply(self.xyz) if len(self.xyz) else self.xyz,
            self.rgb,
            self.errors,
            self.tracks,
        )


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            s = line.strip()
            if s.startswith("#"):
                continue
            yield no, s


def _read_intrinsics(path):
    intr = {}
    for no, s in _data_lines(path):
        if not s:
            continue
        parts = s.split()
        try:
            cid, model, w, h = int(parts[0]), parts[1], int(parts[2]), int(parts[3])
            params = [float(p) for p in parts[4:]]
        except (ValueError, IndexError) as exc:
            raise SfmParseError(path, no, f"malformed camera line ({exc})") from None
        if model not in CAMERA_MODELS:
            raise SfmParseError(path, no, f"unsupported camera model {model}")
        n_params, (ifx, ify, icx, icy) = CAMERA_MODELS[model]
        if len(params) != n_params:
            raise SfmParseError(path, no, f"{model} expects {n_params} params, got {len(params)}")
        intr[cid] = (params[ifx], params[ify], params[icx], params[icy], w, h)
    return intr


def _read_images(path, intr):
    cams = []
    expect_points = False
    for no, s in _data_lines(path):
        if expect_points:
            # 2D observation line; content is not needed here
            expect_points = False
            continue
        if not s:
            continue
        parts = s.split()
        try:
            iid = int(parts[0])
            q = np.array([float(v) for v in parts[1:5]])
            t = np.array([float(v) for v in parts[5:8]])
            cid = int(parts[8])
            name = parts[9] if len(parts) > 9 else ""
        except (ValueError, IndexError) as exc:
            raise SfmParseError(path, no, f"malformed image line ({exc})") from None
        if abs(np.linalg.norm(q) - 1.0) > QUAT_TOL:
            raise SfmParseError(path, no, f"quaternion norm {np.linalg.norm(q):.6f} is not unit")
        if cid not in intr:
            raise SfmParseError(path, no, f"unknown camera id {cid}")
        fx, fy, cx, cy, w, h = intr[cid]
        R = quat_to_rotmat(q / np.linalg.norm(q))
        cams.append(PinholeCamera(iid, R, t, fx, fy, cx, cy, w, h, name, {"camera_id": cid}))
        expect_points = True
    return cams


def _read_points(path):
    ids, xyz, rgb, err, tracks = [], [], [], [], []
    for no, s in _data_lines(path):
        if not s:
            continue
        parts = s.split()
        try:
            pid = int(parts[0])
            p = [float(v) for v in parts[1:4]]
            c = [int(v) for v in parts[4:7]]
            e = float(parts[7])
            tr = [int(v) for v in parts[8:]]
        except (ValueError, IndexError) as exc:
            raise SfmParseError(path, no, f"malformed point line ({exc})") from None
        if len(tr) % 2:
            raise SfmParseError(path, no, "track has an odd number of entries")
        ids.append(pid)
        xyz.append(p)
        rgb.append(c)
        err.append(e)
        tracks.append(frozenset(tr[0::2]))
    return (
        np.array(ids, dtype=np.int64),
        np.array(xyz, dtype=float).reshape(-1, 3),
        np.array(rgb, dtype=np.uint8).reshape(-1, 3),
        np.array(err, dtype=float),
        tracks,
    )


def read_sfm(directory) -> SparseModel:
    paths = {k: os.path.join(directory, f"{k}.txt") for k in ("cameras", "images", "points3D")}
    for k, p in paths.items():
        if not os.path.isfile(p):
            raise FormatError(f"missing {k}.txt in {directory}")
    intr = _read_intrinsics(paths["cameras"])
    cams = _read_images(paths["images"], intr)
    cams.sort(key=lambda c: c.id)
    return SparseModel(cams, *_read_points(paths["points3D"]))
