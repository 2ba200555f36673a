"""Geometric quality checks for orthophotos.

Edges come from a Canny detector (3x3 Sobel, low threshold at half the high
one, 8-connected hysteresis, no pre-smoothing). Edge chains are cut at
corners and each piece is fitted with an iteratively re-weighted total least
squares line keeping points within ``k`` standard deviations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ArgumentError, DegenerateFitError

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T
_TAN_22_5 = math.tan(math.pi / 8)

# -- Canny ------------------------------------------------------------------


def to_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    return img


def sobel(image):
    """Sobel gradients with replicated borders; ``gx`` grows to the right, ``gy`` downward."""
    img = np.asarray(image, dtype=float)
    # correlate, not convolve, so the kernels keep their orientation
    gx = ndimage.correlate(img, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, SOBEL_Y, mode="nearest")
    return gx, gy


def _shift(a, dy, dx):
    """``out[r, c] = a[r + dy, c + dx]`` with zero fill."""
    out = np.zeros_like(a)
    H, W = a.shape
    rs = slice(max(-dy, 0), H - max(dy, 0))
    cs = slice(max(-dx, 0), W - max(dx, 0))
    rd = slice(max(dy, 0), H - max(-dy, 0))
    cd = slice(max(dx, 0), W - max(-dx, 0))
    out[rs, cs] = a[rd, cd]
    return out


def non_max_suppression(mag, gx, gy):
    """Thin ridges along the quantised gradient direction.

    A pixel survives when it is strictly larger than its neighbour behind
    the gradient and not smaller than the one ahead; on a symmetric ridge
    exactly one pixel survives and the rule rotates with the image.
    """
    ax, ay = np.abs(gx), np.abs(gy)
    horiz = ay <= _TAN_22_5 * ax
    vert = ax <= _TAN_22_5 * ay
    sx = np.where(gx >= 0, 1, -1)
    sy = np.where(gy >= 0, 1, -1)
    # step (dx, dy) towards the gradient, per pixel
    step_x = np.where(vert, 0, sx)
    step_y = np.where(horiz, 0, sy)
    keep = np.zeros(mag.shape, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            sel = (step_x == dx) & (step_y == dy) & (mag > 0)
            if not sel.any():
                continue
            ahead = _shift(mag, dy, dx)
            behind = _shift(mag, -dy, -dx)
            keep |= sel & (mag > behind) & (mag >= ahead)
    return keep


def canny_edges(image, high_threshold: float) -> np.ndarray:
    """Boolean edge map; the low threshold is half the high one."""
    if not high_threshold > 0:
        raise ArgumentError("high threshold must be positive")
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ArgumentError("Canny expects a single-channel image")
    gx, gy = sobel(img)
    mag = np.hypot(gx, gy)
    thin = non_max_suppression(mag, gx, gy)
    low = 0.5 * high_threshold
    weak = thin & (mag > low)
    strong = thin & (mag > high_threshold)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return np.zeros(img.shape, dtype=bool)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


# -- line fitting -----------------------------------------------------------


@dataclass
class LineFit:
    direction: np.ndarray
    point: np.ndarray
    inliers: np.ndarray
    rms: float
    iterations: int
    sigma: float = 0.0
    n_points: int = 0

    @property
    def inlier_fraction(self) -> float:
        return len(self.inliers) / self.n_points if self.n_points else 0.0

    def residuals(self, points):
        normal = np.array([-self.direction[1], self.direction[0]])
        return (np.asarray(points, dtype=float) - self.point) @ normal


def _tls(points):
    c = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - c, full_matrices=False)
    d = vt[0]
    # canonical sign so the result does not depend on point order
    if d[0] < 0 or (d[0] == 0 and d[1] < 0):
        d = -d
    return c, d


def fit_line_iterative(points, k: float = 2.5, max_iter: int = 20) -> LineFit:
    """Total least squares line with iterative ``k``-sigma outlier rejection."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DegenerateFitError("need at least two 2D points")
    scale = float(np.abs(pts - pts.mean(axis=0)).max()) + 1.0
    eps = 1e-9 * scale
    inl = np.arange(len(pts))
    it = 0
    while True:
        it += 1
        c, d = _tls(pts[inl])
        res = np.abs((pts - c) @ np.array([-d[1], d[0]]))
        sigma = float(np.sqrt(np.mean(res[inl] ** 2)))
        new = np.nonzero(res <= max(k * sigma, eps))[0]
        if len(new) < 2:
            raise DegenerateFitError("fewer than two inliers left")
        if np.array_equal(new, inl) or it >= max_iter:
            inl = new
            break
        inl = new
    rms = float(np.sqrt(np.mean(res[inl] ** 2)))
    return LineFit(d, c, inl, rms, it, sigma, len(pts))


# -- edge chains ------------------------------------------------------------

_NBRS = [(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def trace_chains(edges) -> list[np.ndarray]:
    """Order edge pixels into 8-connected chains of ``(x, y)`` coordinates."""
    on = set(zip(*np.nonzero(edges)))
    def degree(p):
        return sum((p[0] + a, p[1] + b) in on for a, b in _NBRS)

    chains = []
    visited = set()
    # endpoints first so open chains are walked from one end
    order = sorted(on, key=lambda p: (degree(p) != 1, p))
    for start in order:
        if start in visited:
            continue
        chain = [start]
        visited.add(start)
        cur = start
        while True:
            nxt = None
            for a, b in _NBRS:  # 4-neighbours are tried first
                q = (cur[0] + a, cur[1] + b)
                if q in on and q not in visited:
                    nxt = q
                    break
            if nxt is None:
                break
            visited.add(nxt)
            chain.append(nxt)
            cur = nxt
        chains.append(np.array([(c, r) for r, c in chain], dtype=float))
    return chains


def split_at_corners(chain, window: int = 4, angle_deg: float = 30.0, min_len: int = 8):
    """Cut a chain at local maxima of the turning angle above ``angle_deg``."""
    n = len(chain)
    if n < 2 * window + 1:
        return [chain] if n >= min_len else []
    closed = n > 2 and np.max(np.abs(chain[0] - chain[-1])) <= 1
    idx = np.arange(n)
    if closed:
        prev = chain[(idx - window) % n]
        nxt = chain[(idx + window) % n]
    else:
        prev = chain[np.clip(idx - window, 0, n - 1)]
        nxt = chain[np.clip(idx + window, 0, n - 1)]
    v1 = chain - prev
    v2 = nxt - chain
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    turn = np.degrees(np.abs(np.arctan2(cross, np.einsum("ij,ij->i", v1, v2))))
    if not closed:
        turn[:window] = 0
        turn[n - window :] = 0
    cuts = []
    for i in range(n):
        if turn[i] < angle_deg:
            continue
        lo, hi = i - window, i + window + 1
        neigh = turn[np.arange(lo, hi) % n] if closed else turn[max(lo, 0) : min(hi, n)]
        if turn[i] >= neigh.max() and not any(abs(i - c) <= window for c in cuts):
            cuts.append(i)
    if not cuts:
        return [chain] if n >= min_len else []
    pieces = []
    if closed:
        cuts = sorted(cuts)
        for a, b in zip(cuts, cuts[1:] + [cuts[0] + n]):
            pieces.append(chain[np.arange(a, b + 1) % n])
    else:
        bounds = [0] + sorted(cuts) + [n - 1]
        for a, b in zip(bounds, bounds[1:]):
            pieces.append(chain[a : b + 1])
    return [p for p in pieces if len(p) >= min_len]


@dataclass
class EdgeLine:
    fit: LineFit
    points: np.ndarray

    @property
    def inlier_fraction(self):
        return self.fit.inlier_fraction

    @property
    def angle_deg(self):
        return float(np.degrees(np.arctan2(self.fit.direction[1], self.fit.direction[0])))


@dataclass
class EdgeReport:
    roi: tuple
    edges: np.ndarray
    lines: list

    @property
    def empty(self):
        return not self.lines

    def rows(self):
        for k, ln in enumerate(self.lines):
            yield {
                "line": k,
                "n_points": ln.fit.n_points,
                "n_inliers": len(ln.fit.inliers),
                "inlier_fraction": ln.inlier_fraction,
                "rms_px": ln.fit.rms,
                "angle_deg": ln.angle_deg,
            }


def edge_quality(image, roi, high_threshold, k=2.5, trim=2, min_len=8) -> EdgeReport:
    """Canny edges in ``roi`` cut into straight pieces and fitted one by one.

    ``roi`` is ``(x0, y0, x1, y1)`` in pixels, end-exclusive. ``trim`` pixels
    are dropped at both ends of each piece so corner pixels are not counted
    against either side.
    """
    img = to_gray(image)
    x0, y0, x1, y1 = (int(v) for v in roi)
    H, W = img.shape
    if not (0 <= x0 < x1 <= W and 0 <= y0 < y1 <= H):
        raise ArgumentError(f"roi {roi} outside {W}x{H} image")
    edges = canny_edges(img[y0:y1, x0:x1], high_threshold)
    lines = []
    for chain in trace_chains(edges):
        for piece in split_at_corners(chain, min_len=min_len):
            if trim and len(piece) > 2 * trim + 2:
                piece = piece[trim:-trim]
            if len(piece) < 2:
                continue
            try:
                fit = fit_line_iterative(piece, k=k)
            except DegenerateFitError:
                continue
            lines.append(EdgeLine(fit, piece + [x0, y0]))
    lines.sort(key=lambda ln: (-ln.fit.n_points, ln.points[0].tolist()))
    return EdgeReport((x0, y0, x1, y1), edges, lines)


# -- ratio precision --------------------------------------------------------


@dataclass(frozen=True)
class RatioRecord:
    ratio_ours: float
    ratio_ref: float
    abs_err: float
    rel_err_percent: float


@dataclass
class RatioSummary:
    records: list
    mean_abs: float
    mean_rel_percent: float


def ratio_errors(pairs) -> RatioSummary:
    """Absolute and relative (to the reference) error of length ratios."""
    recs = []
    for ours, ref in pairs:
        ours, ref = float(ours), float(ref)
        if not (ours > 0 and ref > 0):
            raise ArgumentError(f"ratios must be positive, got ({ours}, {ref})")
        a = abs(ref - ours)
        recs.append(RatioRecord(ours, ref, a, 100.0 * a / ref))
    if not recs:
        return RatioSummary([], math.nan, math.nan)
    return RatioSummary(
        recs,
        math.fsum(r.abs_err for r in recs) / len(recs),
        math.fsum(r.rel_err_percent for r in recs) / len(recs),
    )


# -- image similarity -------------------------------------------------------


def psnr(a, b, peak: float = 255.0) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ArgumentError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gauss_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    from scipy.signal import convolve

    return convolve(convolve(img, g[:, None], mode="valid"), g[None, :], mode="valid")


def ssim(a, b, peak: float = 255.0, win: int = 11, sigma: float = 1.5, k1=0.01, k2=0.03) -> float:
    """Mean SSIM over all fully contained Gaussian windows (channels averaged)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ArgumentError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., c], b[..., c], peak, win, sigma, k1, k2) for c in range(a.shape[2])]))
    if min(a.shape) < win:
        raise ArgumentError(f"images smaller than the {win}x{win} window")
    g = _gauss_window(win, sigma)
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    s_aa = _filter_valid(a * a, g) - mu_a**2
    s_bb = _filter_valid(b * b, g) - mu_b**2
    s_ab = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (s_aa + s_bb + c2)
    return float(np.mean(num / den))
