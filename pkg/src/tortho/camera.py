"""Pinhole cameras in the structure-from-motion convention.

World points map to camera space as ``R @ X + t``; the camera looks along
+z and pixels are ``(fx*x/z + cx, fy*y/z + cy)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PinholeCamera:
    id: int
    R: np.ndarray
    t: np.ndarray
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    name: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    @property
    def optical_axis(self) -> np.ndarray:
        """Viewing direction in world space."""
        return self.R.T @ np.array([0.0, 0.0, 1.0])

    def to_camera(self, points):
        return np.asarray(points, dtype=float) @ self.R.T + self.t

    def project(self, points_cam):
        p = np.asarray(points_cam, dtype=float)
        return np.stack([self.fx * p[:, 0] / p[:, 2] + self.cx, self.fy * p[:, 1] / p[:, 2] + self.cy], axis=1)

    def transformed(self, rotation, translation) -> "PinholeCamera":
        """Same camera after the world frame moves by ``X' = rotation @ X + translation``."""
        rotation = np.asarray(rotation, dtype=float)
        R_new = self.R @ rotation.T
        t_new = self.t - R_new @ np.asarray(translation, dtype=float)
        return PinholeCamera(self.id, R_new, t_new, self.fx, self.fy, self.cx, self.cy, self.width, self.height, self.name, self.extra)

    @classmethod
    def look_at(cls, id, center, target, up, f, width, height, name=""):
        """Camera at ``center`` looking at ``target``; image y follows ``-up``."""
        center = np.asarray(center, dtype=float)
        z = np.asarray(target, dtype=float) - center
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=float))
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        return cls(id, R, -R @ center, f, f, width / 2.0, height / 2.0, width, height, name)
