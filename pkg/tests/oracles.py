"""Independent reference implementations used by the tests.

Nothing here imports library internals beyond plain data containers, so a
shared bug cannot make a test pass by agreeing with itself.
"""
from __future__ import annotations

import math

import numpy as np

from tortho.field import GaussianField

# hard-coded real SH table as used by graphics splatting code
C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = [1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396]
C3 = [
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
]


def sh_table(d):
    """The 16 basis values for a unit direction, table form."""
    x, y, z = d
    xx, yy, zz = x * x, y * y, z * z
    return np.array(
        [
            C0,
            -C1 * y,
            C1 * z,
            -C1 * x,
            C2[0] * x * y,
            C2[1] * y * z,
            C2[2] * (2 * zz - xx - yy),
            C2[3] * x * z,
            C2[4] * (xx - yy),
            C3[0] * y * (3 * xx - yy),
            C3[1] * x * y * z,
            C3[2] * y * (4 * zz - xx - yy),
            C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
            C3[4] * x * (4 * zz - xx - yy),
            C3[5] * z * (xx - yy),
            C3[6] * x * (xx - 3 * yy),
        ]
    )


def quat_matrix(q):
    r, x, y, z = np.asarray(q, float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - r * z), 2 * (x * z + r * y)],
            [2 * (x * y + r * z), 1 - 2 * (x * x + z * z), 2 * (y * z - r * x)],
            [2 * (x * z - r * y), 2 * (y * z + r * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_quat(rng, n=None):
    q = rng.normal(size=(4,) if n is None else (n, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def random_field(rng, n, extent, z_range=(0.0, 10.0), px=1.0, fagk=False, rest_scale=0.3, degree=3):
    """Random scene whose footprints span roughly 0.5 to 15 pixels of size ``px``."""
    x0, x1, y0, y1 = extent
    pad = 0.05 * (x1 - x0)
    pos = np.column_stack(
        [
            rng.uniform(x0 - pad, x1 + pad, n),
            rng.uniform(y0 - pad, y1 + pad, n),
            rng.uniform(*z_range, n),
        ]
    )
    k = (degree + 1) ** 2
    sh = rng.normal(scale=rest_scale, size=(n, k, 3))
    sh[:, 0, :] = rng.uniform(-1.5, 1.5, size=(n, 3))
    kw = dict(
        positions=pos,
        rotations=random_quat(rng, n),
        log_scales=np.log(px * rng.uniform(0.2, 5.0, size=(n, 3))),
        opacity_logits=rng.uniform(-3.0, 5.0, n),
        color_sh=sh,
    )
    if fagk:
        kw["fagk_opacity_sh"] = rng.normal(scale=0.5, size=(n, 15))
        kw["fagk_scale_sh"] = rng.normal(scale=0.1, size=(n, 15, 3))
        kw["fagk_rotation_sh"] = rng.normal(scale=0.1, size=(n, 15, 4))
    return GaussianField(**kw)


def _activations(field, d, use_fagk=True):
    basis = sh_table(d)
    k = field.color_sh.shape[1]
    n = field.count
    color = np.maximum(np.einsum("k,nkc->nc", basis[:k], field.color_sh) + 0.5, 0.0)
    logit = np.array(field.opacity_logits, dtype=float)
    logs = np.array(field.log_scales, dtype=float)
    q = np.array(field.rotations, dtype=float)
    if use_fagk and field.fagk_enabled:
        b = basis[1:]
        logit = logit + field.fagk_opacity_sh @ b
        logs = logs + np.einsum("k,nka->na", b, field.fagk_scale_sh)
        q = q + np.einsum("k,nka->na", b, field.fagk_rotation_sh)
    opacity = 1.0 / (1.0 + np.exp(-logit))
    covs = np.empty((n, 3, 3))
    for i in range(n):
        M = quat_matrix(q[i]) @ np.diag(np.exp(logs[i]))
        covs[i] = M @ M.T
    return color, opacity, covs


def oracle_render(field, grid, background=(0.0, 0.0, 0.0), z_eye=None, use_fagk=True,
                  alpha_cap=0.99, alpha_min=1 / 255, t_min=1e-4, cutoff=3.0, dilation=0.3):
    """Top-down orthographic splat with a global depth sort and per-pixel blending.

    Derives the projection from the grid alone: world x maps to column
    ``(x - x_min) / sx - 0.5`` and world y to row ``(y_max - y) / sy - 0.5``.
    """
    W, H = grid.width, grid.height
    bg = np.asarray(background, float)
    C = np.zeros((H, W, 3))
    T = np.ones((H, W))
    if field.count == 0:
        return C + bg, T
    x_min, _, _, y_max = grid.extent
    color, opacity, covs = _activations(field, np.array([0.0, 0.0, -1.0]), use_fagk)
    pos = np.asarray(field.positions)
    # the nearest primitive to a downward-looking camera has the largest z
    order = sorted(range(field.count), key=lambda i: (-pos[i, 2], i))
    sx, sy = grid.sx, grid.sy
    for i in order:
        u = (pos[i, 0] - x_min) / sx - 0.5
        v = (y_max - pos[i, 1]) / sy - 0.5
        S = np.diag([1 / sx, -1 / sy])
        cov2 = S @ covs[i][:2, :2] @ S + dilation * np.eye(2)
        a, b, c = cov2[0, 0], cov2[0, 1], cov2[1, 1]
        det = a * c - b * b
        lam = 0.5 * (a + c) + math.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
        rad = cutoff * math.sqrt(lam)
        c0, c1 = max(math.ceil(u - rad), 0), min(math.floor(u + rad), W - 1)
        r0, r1 = max(math.ceil(v - rad), 0), min(math.floor(v + rad), H - 1)
        if c0 > c1 or r0 > r1:
            continue
        yy, xx = np.mgrid[r0 : r1 + 1, c0 : c1 + 1].astype(float)
        dx, dy = xx - u, yy - v
        ia, ib, ic = c / det, -b / det, a / det
        power = -0.5 * (ia * dx * dx + ic * dy * dy) - ib * dx * dy
        alpha = np.minimum(alpha_cap, opacity[i] * np.exp(power))
        Ts = T[r0 : r1 + 1, c0 : c1 + 1]
        use = (alpha >= alpha_min) & (Ts >= t_min) & (np.abs(dx) <= rad) & (np.abs(dy) <= rad)
        w = np.where(use, alpha * Ts, 0.0)
        C[r0 : r1 + 1, c0 : c1 + 1] += w[..., None] * color[i]
        T[r0 : r1 + 1, c0 : c1 + 1] = np.where(use, Ts * (1 - alpha), Ts)
    return C + T[..., None] * bg, T


def brute_tile_lists(centers, radii, depth, index, W, H, ts):
    """Per-tile membership by testing every (gaussian, tile) pair."""
    tx_n, ty_n = -(-W // ts), -(-H // ts)
    out = []
    for ty in range(ty_n):
        for tx in range(tx_n):
            px0, px1 = tx * ts, min(tx * ts + ts, W) - 1
            py0, py1 = ty * ts, min(ty * ts + ts, H) - 1
            members = []
            for g in range(len(centers)):
                cx, cy = centers[g]
                r = radii[g]
                # a pixel centre p is inside the box iff |p - c| <= r
                xs = [p for p in range(px0, px1 + 1) if abs(p - cx) <= r]
                ys = [p for p in range(py0, py1 + 1) if abs(p - cy) <= r]
                if xs and ys:
                    members.append(g)
            members.sort(key=lambda g: (depth[g], index[g]))
            out.append(members)
    return out


# -- edge protocol reference -------------------------------------------------


def rectangle_scene(angle_deg, noise, seed, H=160, W=200, supersample=8):
    """Anti-aliased bright rectangle on a dark background plus Gaussian noise."""
    import cv2

    c = np.array([W / 2, H / 2])
    hw = np.array([55.0, 35.0])
    a = np.radians(angle_deg)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    corners = (np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) * hw) @ R.T + c
    S = supersample
    big = np.full((H * S, W * S), 40, np.uint8)
    cv2.fillPoly(big, [np.round(corners * S).astype(np.int32)], 200)
    img = big.reshape(H, S, W, S).mean(axis=(1, 3))
    rng = np.random.default_rng(seed)
    return np.round(np.clip(img + rng.normal(0, noise, img.shape), 0, 255)), corners


def cv2_edges(img, high):
    import cv2

    return cv2.Canny(img.astype(np.uint8), high / 2, high, apertureSize=3, L2gradient=True) > 0


def tls_reject(points, k=2.5, max_iter=20):
    """Plain numpy TLS with k-sigma rejection; returns (n_inliers, n_points)."""
    inl = np.arange(len(points))
    for _ in range(max_iter):
        c = points[inl].mean(axis=0)
        _, _, vt = np.linalg.svd(points[inl] - c)
        n = np.array([-vt[0, 1], vt[0, 0]])
        res = np.abs((points - c) @ n)
        s = np.sqrt(np.mean(res[inl] ** 2))
        new = np.nonzero(res <= max(k * s, 1e-9))[0]
        if np.array_equal(new, inl):
            break
        inl = new
    return len(inl), len(points)


def side_inlier_fraction(edges, corners, band=3.0, margin=6.0, k=2.5):
    """Pool edge pixels near each known side (away from corners) and fit each side."""
    p = np.column_stack(np.nonzero(edges)[::-1]).astype(float)
    ni = nt = 0
    for i in range(len(corners)):
        a, b = corners[i], corners[(i + 1) % len(corners)]
        L = np.linalg.norm(b - a)
        d = (b - a) / L
        t = (p - a) @ d
        dist = np.abs((p - a) @ np.array([-d[1], d[0]]))
        sel = (dist < band) & (t > margin) & (t < L - margin)
        x, y = tls_reject(p[sel], k)
        ni, nt = ni + x, nt + y
    return ni / nt


def pooled_fraction(report):
    n = sum(ln.fit.n_points for ln in report.lines)
    return sum(len(ln.fit.inliers) for ln in report.lines) / n
