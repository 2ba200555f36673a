"""Real spherical harmonics up to degree 3.

Basis values are ordered by degree, and within a degree by order from
``-l`` to ``+l``::

    (0,0), (1,-1), (1,0), (1,1), (2,-2), ..., (3,3)

which is also the coefficient layout of the ``f_rest_*`` PLY attributes.
The associated Legendre functions keep the Condon-Shortley factor
``(-1)**m``; combined with the ``sqrt(2)`` factor on the non-zonal terms this
reproduces the sign pattern of the usual graphics SH tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ArgumentError

MAX_DEGREE = 3
UNIT_TOL = 1e-6


def num_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def sh_index(l: int, m: int) -> int:
    """Flat position of ``(l, m)`` in the basis vector."""
    return l * l + l + m


@dataclass(frozen=True)
class ShBasis:
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != num_coeffs(self.degree):
            raise ArgumentError("basis length does not match degree")

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


@lru_cache(maxsize=None)
def _legendre_poly(l: int, m: int) -> np.ndarray:
    # Rodrigues: P_l = 1 / (2^l l!) d^l/dx^l (x^2 - 1)^l, then m more derivatives
    base = P.polypow([-1.0, 0.0, 1.0], l)
    p_l = P.polyder(base, l) / (2**l * math.factorial(l)) if l else base
    return P.polyder(p_l, m) if m else p_l


def _check_lm(l, m):
    if not (0 <= l <= MAX_DEGREE):
        raise ArgumentError(f"degree l={l} outside [0, {MAX_DEGREE}]")
    if not (0 <= m <= l):
        raise ArgumentError(f"order m={m} outside [0, l={l}]")


def legendre(l: int, m: int, x):
    """Associated Legendre function ``P_l^m(x)`` with Condon-Shortley phase.

    Accepts a scalar or an array for ``x``.
    """
    _check_lm(l, m)
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(np.abs(xa) > 1.0):
        raise ArgumentError("x must lie in [-1, 1]")
    val = P.polyval(xa, _legendre_poly(l, m))
    if m:
        val = (-1) ** m * np.power(1.0 - xa * xa, m / 2.0) * val
    return float(val) if np.ndim(val) == 0 else val


def norm_const(l: int, m: int) -> float:
    am = abs(m)
    return math.sqrt(
        (2 * l + 1) * math.factorial(l - am) / (4 * math.pi * math.factorial(l + am))
    )


def sh_basis(degree: int, dirs) -> np.ndarray:
    """Evaluate the basis for an ``(N, 3)`` array of unit directions.

    Returns an ``(N, (degree+1)**2)`` array. θ is the polar angle from +z and
    φ the azimuth from +x.
    """
    if not (0 <= degree <= MAX_DEGREE):
        raise ArgumentError(f"degree {degree} outside [0, {MAX_DEGREE}]")
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    if d.shape[-1] != 3:
        raise ArgumentError("directions must be 3-vectors")
    norms = np.linalg.norm(d, axis=1)
    if np.any(~np.isfinite(norms)) or np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ArgumentError("direction is not unit length")

    cos_t = np.clip(d[:, 2], -1.0, 1.0)
    phi = np.arctan2(d[:, 1], d[:, 0])
    out = np.empty((len(d), num_coeffs(degree)))
    for l in range(degree + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            plm = legendre(l, am, cos_t)
            k = norm_const(l, m)
            if m > 0:
                v = math.sqrt(2.0) * k * np.cos(m * phi) * plm
            elif m < 0:
                v = math.sqrt(2.0) * k * np.sin(-m * phi) * plm
            else:
                v = k * plm
            out[:, sh_index(l, m)] = v
    return out


def eval_sh_basis(degree: int, direction) -> ShBasis:
    """Basis values for a single unit direction."""
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (3,):
        raise ArgumentError("direction must be a 3-vector")
    return ShBasis(degree, sh_basis(degree, direction[None, :])[0])
