"""Manhattan alignment of a reconstructed scene.

The up axis comes from the mean camera optical axis (nadir flights look
down), refined by a plane fit to the lowest 30% of the points. The yaw is the
rotation that minimises the area of the xy bounding box; it is only defined
modulo 90 degrees and we return the candidate closest to no rotation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import AlignmentError
from .field import GaussianField, quat_multiply, rotmat_to_quat

YAW_STEP_DEG = 0.25
GROUND_FRACTION = 0.30


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise AlignmentError("rotation must be 3x3 and translation a 3-vector")
        if abs(np.linalg.det(R) - 1.0) > 1e-9 or not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise AlignmentError("rotation is not a proper orthonormal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3)) and not np.any(self.translation))

    def apply(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def to_dict(self):
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["rotation"], dtype=float), np.array(d["translation"], dtype=float))


def rotation_between(a, b):
    """Smallest rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    s = np.linalg.norm(v)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: half turn about any axis perpendicular to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K * ((1 - c) / s**2)


def rot_z(deg):
    a = np.deg2rad(deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ground_normal(points, up):
    """Normal of the plane through the lowest points, or None if they are collinear."""
    h = points @ up
    k = max(3, int(np.ceil(GROUND_FRACTION * len(points))))
    low = points[np.argsort(h, kind="stable")[:k]]
    centered = low - low.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    if len(sv) < 2 or sv[1] <= 1e-9 * max(sv[0], 1e-300):
        return None
    n = vt[-1]
    return n if np.dot(n, up) >= 0 else -n


def _hull_xy(xy):
    try:
        from scipy.spatial import ConvexHull

        return xy[ConvexHull(xy).vertices]
    except Exception:  # degenerate inputs fall back to all points
        return xy


def best_yaw(xy, step=YAW_STEP_DEG):
    """Yaw in degrees, within (-45, 45], minimising the rotated bbox area."""
    pts = _hull_xy(np.asarray(xy, dtype=float))
    angles = np.arange(0.0, 90.0, step)
    a = np.deg2rad(angles)
    c, s = np.cos(a)[:, None], np.sin(a)[:, None]
    x = c * pts[None, :, 0] - s * pts[None, :, 1]
    y = s * pts[None, :, 0] + c * pts[None, :, 1]
    area = (x.max(axis=1) - x.min(axis=1)) * (y.max(axis=1) - y.min(axis=1))
    best = float(angles[int(np.argmin(area))])  # argmin keeps the smaller angle on ties
    return best - 90.0 if best > 45.0 else best


def manhattan_align(points, camera_centers=None, optical_axes=None) -> RigidTransform:
    """Rigid transform making the ground the xy-plane and walls axis-parallel.

    ``optical_axes`` are world-space viewing directions of the cameras. The
    returned transform also moves the point centroid to the origin.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise AlignmentError("need at least three 3D points")
    centered = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9 * max(np.abs(centered).max(), 1e-300)) < 2:
        raise AlignmentError("points are collinear; no ground plane")

    up = np.array([0.0, 0.0, 1.0])
    if optical_axes is not None and len(optical_axes):
        mean_axis = np.asarray(optical_axes, dtype=float).mean(axis=0)
        if np.linalg.norm(mean_axis) > 1e-9:
            up = -mean_axis / np.linalg.norm(mean_axis)
    normal = _ground_normal(pts, up)
    if normal is not None:
        up = normal
    R_up = rotation_between(up, np.array([0.0, 0.0, 1.0]))

    leveled = centered @ R_up.T
    if np.linalg.matrix_rank(leveled[:, :2], tol=1e-9 * max(np.abs(leveled).max(), 1e-300)) < 2:
        raise AlignmentError("points project to a line on the ground plane")
    yaw = best_yaw(leveled[:, :2])
    R = rot_z(yaw) @ R_up
    if np.allclose(R, np.eye(3), atol=1e-12, rtol=0):
        R = np.eye(3)
    t = -R @ pts.mean(axis=0)
    return RigidTransform(R, t)


def transform_yaw_deg(T: RigidTransform) -> float:
    return float(np.rad2deg(np.arctan2(T.rotation[1, 0], T.rotation[0, 0])))


def apply_transform(field: GaussianField, T: RigidTransform) -> GaussianField:
    """Move a field rigidly; SH banks are left untouched."""
    if T.is_identity:
        return field
    q = rotmat_to_quat(T.rotation)
    return replace(
        field,
        positions=T.apply(field.positions),
        rotations=quat_multiply(q[None, :], field.rotations),
    )
