"""Gaussian primitives and their view-dependent properties.

A :class:`GaussianField` stores primitives column-wise. DC attributes use the
usual splatting parameterisation (log-scales, opacity logits, unnormalised
quaternions in ``w, x, y, z`` order). The optional FAGK banks hold SH
coefficients for bands 1-3 that modulate opacity, scale and rotation with
the viewing direction; an all-zero bank reproduces the DC-only kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from . import harmonics
from .errors import ArgumentError, DegenerateRotationError

QUAT_TOL = 1e-6
N_REST = 15  # SH coefficients in bands 1..3


def _readonly(a):
    if a is None:
        return None
    v = np.asarray(a).view()
    v.flags.writeable = False
    return v


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def normalize_quat(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-8):
        raise DegenerateRotationError("quaternion norm below 1e-8")
    return q / n


def quat_to_rotmat(q):
    """Rotation matrices for ``(..., 4)`` unit quaternions ``(w, x, y, z)``."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotmat_to_quat(R):
    """Unit quaternion ``(w, x, y, z)`` of a single rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_multiply(a, b):
    """Hamilton product ``a * b`` for broadcastable ``(..., 4)`` arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def covariance_from_rs(q, s) -> np.ndarray:
    """3D covariance ``R S S^T R^T`` from a unit quaternion and positive scales."""
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    if q.shape != (4,) or s.shape != (3,):
        raise ArgumentError("expected a 4-quaternion and 3 scales")
    if abs(np.linalg.norm(q) - 1.0) > QUAT_TOL:
        raise ArgumentError("quaternion is not unit length")
    if np.any(~(s > 0)) or np.any(~np.isfinite(s)):
        raise ArgumentError("scales must be positive and finite")
    return covariances(q[None], s[None])[0]


def covariances(q, s):
    """Batched covariance for ``(N, 4)`` unit quaternions and ``(N, 3)`` scales."""
    M = quat_to_rotmat(q) * np.asarray(s)[..., None, :]
    return M @ np.swapaxes(M, -1, -2)


@dataclass(frozen=True)
class GaussianPrimitive:
    position: np.ndarray
    rotation: np.ndarray
    log_scale: np.ndarray
    opacity_logit: float
    color_sh: np.ndarray
    fagk_opacity_sh: np.ndarray | None = None
    fagk_scale_sh: np.ndarray | None = None
    fagk_rotation_sh: np.ndarray | None = None

    @property
    def fagk_enabled(self):
        return self.fagk_opacity_sh is not None


@dataclass(frozen=True)
class GaussianField:
    positions: np.ndarray  # (N, 3)
    rotations: np.ndarray  # (N, 4) w, x, y, z
    log_scales: np.ndarray  # (N, 3)
    opacity_logits: np.ndarray  # (N,)
    color_sh: np.ndarray  # (N, K, 3), K in {1, 4, 9, 16}
    fagk_opacity_sh: np.ndarray | None = None  # (N, 15)
    fagk_scale_sh: np.ndarray | None = None  # (N, 15, 3)
    fagk_rotation_sh: np.ndarray | None = None  # (N, 15, 4)

    def __post_init__(self):
        n = len(self.positions)
        shapes = {
            "positions": (n, 3),
            "rotations": (n, 4),
            "log_scales": (n, 3),
            "opacity_logits": (n,),
        }
        for name, shape in shapes.items():
            if np.shape(getattr(self, name)) != shape:
                raise ArgumentError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        csh = np.shape(self.color_sh)
        if len(csh) != 3 or csh[0] != n or csh[2] != 3 or csh[1] not in (1, 4, 9, 16):
            raise ArgumentError(f"color_sh has shape {csh}")
        banks = (self.fagk_opacity_sh, self.fagk_scale_sh, self.fagk_rotation_sh)
        present = [b is not None for b in banks]
        if any(present) and not all(present):
            raise ArgumentError("FAGK banks must be given together")
        if all(present):
            for bank, tail in zip(banks, ((), (3,), (4,))):
                if np.shape(bank) != (n, N_REST) + tail:
                    raise ArgumentError(f"FAGK bank has shape {np.shape(bank)}")
        for f in fields(self):
            object.__setattr__(self, f.name, _readonly(getattr(self, f.name)))

    @classmethod
    def empty(cls, fagk=False):
        return cls(
            positions=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            log_scales=np.zeros((0, 3)),
            opacity_logits=np.zeros(0),
            color_sh=np.zeros((0, 16, 3)),
            fagk_opacity_sh=np.zeros((0, N_REST)) if fagk else None,
            fagk_scale_sh=np.zeros((0, N_REST, 3)) if fagk else None,
            fagk_rotation_sh=np.zeros((0, N_REST, 4)) if fagk else None,
        )

    @property
    def count(self) -> int:
        return len(self.positions)

    def __len__(self):
        return self.count

    @property
    def fagk_enabled(self) -> bool:
        return self.fagk_opacity_sh is not None

    @property
    def color_degree(self) -> int:
        return int(round(np.sqrt(self.color_sh.shape[1]))) - 1

    @property
    def bounds(self):
        """``(min_xyz, max_xyz)``; ``None`` for an empty field."""
        if self.count == 0:
            return None
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def __getitem__(self, i) -> GaussianPrimitive:
        f = self.fagk_enabled
        return GaussianPrimitive(
            position=self.positions[i],
            rotation=self.rotations[i],
            log_scale=self.log_scales[i],
            opacity_logit=float(self.opacity_logits[i]),
            color_sh=self.color_sh[i],
            fagk_opacity_sh=self.fagk_opacity_sh[i] if f else None,
            fagk_scale_sh=self.fagk_scale_sh[i] if f else None,
            fagk_rotation_sh=self.fagk_rotation_sh[i] if f else None,
        )

    def subset(self, index) -> "GaussianField":
        index = np.asarray(index)
        kw = {}
        for fl in fields(self):
            a = getattr(self, fl.name)
            kw[fl.name] = None if a is None else np.asarray(a)[index]
        return GaussianField(**kw)

    def with_fagk(self) -> "GaussianField":
        """Same field with zero FAGK banks attached (no-op if already present)."""
        if self.fagk_enabled:
            return self
        n = self.count
        return replace(
            self,
            fagk_opacity_sh=np.zeros((n, N_REST)),
            fagk_scale_sh=np.zeros((n, N_REST, 3)),
            fagk_rotation_sh=np.zeros((n, N_REST, 4)),
        )

    def without_fagk(self) -> "GaussianField":
        return replace(self, fagk_opacity_sh=None, fagk_scale_sh=None, fagk_rotation_sh=None)


def concat_fields(parts) -> GaussianField:
    parts = list(parts)
    if not parts:
        return GaussianField.empty()
    fagk = [p.fagk_enabled for p in parts]
    if any(fagk) and not all(fagk):
        parts = [p.with_fagk() for p in parts]
    k = max(p.color_sh.shape[1] for p in parts)
    kw = {}
    for fl in fields(GaussianField):
        arrs = [getattr(p, fl.name) for p in parts]
        if arrs[0] is None:
            kw[fl.name] = None
            continue
        if fl.name == "color_sh":
            arrs = [np.pad(a, ((0, 0), (0, k - a.shape[1]), (0, 0))) for a in arrs]
        kw[fl.name] = np.concatenate(arrs, axis=0)
    return GaussianField(**kw)


def _basis_rows(dirs, degree, n):
    """Basis of shape (n, K); a single direction is broadcast to every row."""
    dirs = np.asarray(dirs, dtype=float)
    if dirs.ndim == 1:
        return np.broadcast_to(harmonics.sh_basis(degree, dirs[None])[0], (n, harmonics.num_coeffs(degree)))
    return harmonics.sh_basis(degree, dirs)


def field_colors(field: GaussianField, dirs, degree: int) -> np.ndarray:
    """RGB per primitive: ``max(sum(coeff * basis) + 0.5, 0)``.

    ``dirs`` is either one unit direction shared by all primitives or an
    ``(N, 3)`` array.
    """
    degree = min(degree, field.color_degree)
    k = harmonics.num_coeffs(degree)
    B = _basis_rows(dirs, degree, field.count)
    rgb = np.einsum("nk,nkc->nc", B, field.color_sh[:, :k, :])
    return np.maximum(rgb + 0.5, 0.0)


def dc_activations(field: GaussianField):
    """``(opacity, scale, rotation)`` from the DC attributes alone."""
    return (
        sigmoid(field.opacity_logits),
        np.exp(field.log_scales),
        normalize_quat(field.rotations),
    )


def field_activations(field: GaussianField, dirs, degree: int, use_fagk: bool = True):
    """View-dependent ``(opacity, scale, rotation)`` for every primitive.

    Without FAGK banks (or with ``use_fagk`` off) the DC activations are
    returned unchanged.
    """
    if not (field.fagk_enabled and use_fagk):
        return dc_activations(field)
    k = harmonics.num_coeffs(degree) - 1
    B = _basis_rows(dirs, degree, field.count)[:, 1:]
    logit = field.opacity_logits + np.einsum("nk,nk->n", B, field.fagk_opacity_sh[:, :k])
    log_s = field.log_scales + np.einsum("nk,nkc->nc", B, field.fagk_scale_sh[:, :k])
    quat = field.rotations + np.einsum("nk,nkc->nc", B, field.fagk_rotation_sh[:, :k])
    return sigmoid(logit), np.exp(log_s), normalize_quat(quat)


def _as_field(g: GaussianPrimitive) -> GaussianField:
    f = g.fagk_enabled
    return GaussianField(
        positions=np.asarray(g.position, dtype=float)[None],
        rotations=np.asarray(g.rotation, dtype=float)[None],
        log_scales=np.asarray(g.log_scale, dtype=float)[None],
        opacity_logits=np.array([g.opacity_logit], dtype=float),
        color_sh=np.asarray(g.color_sh, dtype=float)[None],
        fagk_opacity_sh=np.asarray(g.fagk_opacity_sh)[None] if f else None,
        fagk_scale_sh=np.asarray(g.fagk_scale_sh)[None] if f else None,
        fagk_rotation_sh=np.asarray(g.fagk_rotation_sh)[None] if f else None,
    )


def eval_color(g: GaussianPrimitive, direction, degree: int) -> np.ndarray:
    if not (0 <= degree <= harmonics.MAX_DEGREE):
        raise ArgumentError(f"degree {degree} outside [0, 3]")
    direction = np.asarray(direction, dtype=float)
    harmonics.eval_sh_basis(degree, direction)  # validates the direction
    return field_colors(_as_field(g), direction, degree)[0]


def eval_fagk(g: GaussianPrimitive, direction, degree: int):
    """View-dependent ``(opacity, scale, rotation)`` of a single primitive."""
    if not (0 <= degree <= harmonics.MAX_DEGREE):
        raise ArgumentError(f"degree {degree} outside [0, 3]")
    direction = np.asarray(direction, dtype=float)
    harmonics.eval_sh_basis(degree, direction)
    op, sc, rot = field_activations(_as_field(g), direction, degree)
    return float(op[0]), sc[0], rot[0]
