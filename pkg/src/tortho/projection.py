"""Projection matrices, their Jacobians and EWA covariance projection.

View space follows the OpenGL convention: the camera looks down ``-z`` and
the near/far distances ``z_n``/``z_f`` are positive numbers measured along
the viewing direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericError, SingularityError

DILATION = 0.3  # px^2 added to the projected covariance diagonal


@dataclass(frozen=True)
class Frustum:
    l: float
    r: float
    b: float
    t: float
    z_n: float
    z_f: float
    fov_x: float | None = None
    fov_y: float | None = None
    focal_x: float | None = None
    focal_y: float | None = None

    def __post_init__(self):
        vals = (self.l, self.r, self.b, self.t, self.z_n, self.z_f)
        if not all(math.isfinite(v) for v in vals):
            raise ArgumentError("frustum bounds must be finite")
        if not (self.r > self.l and self.t > self.b and self.z_f > self.z_n):
            raise ArgumentError(
                f"degenerate frustum l={self.l} r={self.r} b={self.b} t={self.t} "
                f"z_n={self.z_n} z_f={self.z_f}"
            )

    @classmethod
    def from_fov(cls, fov_x, fov_y, z_n, z_f, focal_x=None, focal_y=None):
        """Symmetric perspective frustum: ``r = tan(fov_x/2) z_n``, ``l = -r``."""
        if z_n <= 0:
            raise ArgumentError("perspective near plane must be positive")
        r = math.tan(fov_x / 2.0) * z_n
        t = math.tan(fov_y / 2.0) * z_n
        return cls(-r, r, -t, t, z_n, z_f, fov_x, fov_y, focal_x, focal_y)

    @property
    def width(self):
        return self.r - self.l

    @property
    def height(self):
        return self.t - self.b


@dataclass(frozen=True)
class ViewTransform:
    """Rigid world-to-view transform stored as a 4x4 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape != (4, 4):
            raise ArgumentError("view matrix must be 4x4")
        R = M[:3, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9, rtol=0) or not np.allclose(
            M[3], [0, 0, 0, 1], atol=0, rtol=0
        ):
            raise ArgumentError("view matrix is not rigid")
        M.flags.writeable = False
        object.__setattr__(self, "matrix", M)

    @classmethod
    def from_rt(cls, rotation, translation):
        M = np.eye(4)
        M[:3, :3] = rotation
        M[:3, 3] = translation
        return cls(M)

    @classmethod
    def identity(cls):
        return cls(np.eye(4))

    @property
    def rotation(self):
        return self.matrix[:3, :3]

    @property
    def translation(self):
        return self.matrix[:3, 3]

    def apply(self, points):
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def inverse(self) -> "ViewTransform":
        R = self.rotation.T
        return ViewTransform.from_rt(R, -R @ self.translation)


def perspective_matrix(f: Frustum) -> np.ndarray:
    if f.z_n <= 0:
        raise ArgumentError("perspective near plane must be positive")
    w, h, d = f.r - f.l, f.t - f.b, f.z_f - f.z_n
    return np.array(
        [
            [2 * f.z_n / w, 0.0, (f.r + f.l) / w, 0.0],
            [0.0, 2 * f.z_n / h, (f.t + f.b) / h, 0.0],
            [0.0, 0.0, -(f.z_f + f.z_n) / d, -2 * f.z_f * f.z_n / d],
            [0.0, 0.0, -1.0, 0.0],
        ]
    )


def ortho_matrix(f: Frustum) -> np.ndarray:
    w, h, d = f.r - f.l, f.t - f.b, f.z_f - f.z_n
    return np.array(
        [
            [2 / w, 0.0, 0.0, -(f.r + f.l) / w],
            [0.0, 2 / h, 0.0, -(f.t + f.b) / h],
            [0.0, 0.0, -2 / d, -(f.z_f + f.z_n) / d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def ortho_project(points, f: Frustum) -> np.ndarray:
    """View-space points ``(N, 3)`` to NDC through the orthographic matrix."""
    points = np.asarray(points, dtype=float)
    h = np.concatenate([points, np.ones(points.shape[:-1] + (1,))], axis=-1)
    return (h @ ortho_matrix(f).T)[..., :3]


def perspective_jacobian(p_view, f: Frustum) -> np.ndarray:
    """Affine approximation of the perspective map at a view-space point."""
    if f.focal_x is None or f.focal_y is None:
        raise ArgumentError("perspective Jacobian needs focal lengths")
    tx, ty, tz = (float(v) for v in p_view)
    if abs(tz) < 1e-9:
        raise SingularityError("point lies on the camera plane (t_z ~ 0)")
    fx, fy = f.focal_x, f.focal_y
    return np.array(
        [
            [fx / tz, 0.0, -fx * tx / tz**2],
            [0.0, fy / tz, -fy * ty / tz**2],
            [0.0, 0.0, 0.0],
        ]
    )


def ortho_jacobian(f: Frustum) -> np.ndarray:
    return np.array(
        [
            [2 / (f.r - f.l), 0.0, 0.0],
            [0.0, 2 / (f.t - f.b), 0.0],
            [0.0, 0.0, 0.0],
        ]
    )


def project_covariance(cov3d, view: ViewTransform, J, pixel_scale, dilation=DILATION):
    """Screen-space 2x2 covariance ``J W Σ W^T J^T`` in pixel units.

    ``pixel_scale`` maps NDC to pixels (typically ``(W/2, H/2)``, with a
    negative second entry for north-up rasters) and is folded into ``J``.
    Accepts a single ``(3, 3)`` covariance or a stack ``(N, 3, 3)``.
    """
    cov3d = np.asarray(cov3d, dtype=float)
    J = np.asarray(J, dtype=float)
    if not (np.all(np.isfinite(cov3d)) and np.all(np.isfinite(J))):
        raise NumericError("non-finite covariance or Jacobian")
    S = np.diag([pixel_scale[0], pixel_scale[1], 1.0])
    T = S @ J @ view.rotation
    cov = T @ cov3d @ T.T
    out = cov[..., :2, :2]
    out = 0.5 * (out + np.swapaxes(out, -1, -2))  # exact symmetry
    out[..., 0, 0] += dilation
    out[..., 1, 1] += dilation
    return out
