import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lpmv

from oracles import sh_table
from tortho.errors import ArgumentError
from tortho.harmonics import eval_sh_basis, legendre, num_coeffs, sh_basis, sh_index


def unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


unit = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
    lambda v: np.asarray(v) / np.linalg.norm(v)
)


def test_legendre_examples():
    assert legendre(0, 0, 0.3) == 1.0
    assert legendre(2, 0, 1.0) == pytest.approx(1.0, abs=1e-15)
    # symbolic oracle: -3 x sqrt(1 - x^2) at x = 1/2
    x = sympy.Rational(1, 2)
    expected = float(-3 * x * sympy.sqrt(1 - x**2))
    assert legendre(2, 1, 0.5) == pytest.approx(expected, abs=1e-12)
    assert legendre(2, 1, 0.5) == pytest.approx(-1.29904, abs=1e-5)


@pytest.mark.parametrize("l", range(4))
def test_legendre_matches_scipy(l):
    xs = np.linspace(-1, 1, 41)
    for m in range(l + 1):
        # scipy includes the Condon-Shortley phase as well
        np.testing.assert_allclose(legendre(l, m, xs), lpmv(m, l, xs), atol=1e-12)


@pytest.mark.parametrize("args", [(4, 0, 0.1), (1, 2, 0.1), (1, -1, 0.0), (1, 0, 1.5), (-1, 0, 0.0)])
def test_legendre_rejects_out_of_range(args):
    with pytest.raises(ArgumentError):
        legendre(*args)


def test_degree_zero_constant():
    b = eval_sh_basis(0, [0.6, 0.0, 0.8])
    assert b.degree == 0
    np.testing.assert_allclose(b.values, [math.sqrt(1 / (4 * math.pi))], rtol=1e-12)
    assert b.values[0] == pytest.approx(0.2820948, abs=1e-7)


def test_band1_at_pole():
    v = eval_sh_basis(1, [0, 0, 1]).values
    np.testing.assert_allclose(v[1:4], [0.0, 0.4886025, 0.0], atol=1e-7)


def test_ordering_and_length():
    assert [num_coeffs(d) for d in range(4)] == [1, 4, 9, 16]
    assert sh_index(1, -1) == 1 and sh_index(2, -2) == 4 and sh_index(3, 3) == 15
    assert len(eval_sh_basis(3, [1, 0, 0]).values) == 16


def test_matches_graphics_table():
    dirs = unit_vectors(np.random.default_rng(1), 500)
    ours = sh_basis(3, dirs)
    ref = np.array([sh_table(d) for d in dirs])
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_monte_carlo_orthonormality():
    dirs = unit_vectors(np.random.default_rng(7), 100_000)
    Y = sh_basis(3, dirs)
    gram = 4 * math.pi * (Y.T @ Y) / len(dirs)
    assert np.abs(gram - np.eye(16)).max() < 0.02


@settings(max_examples=200, deadline=None)
@given(unit)
def test_parity(d):
    a = eval_sh_basis(3, d).values
    b = eval_sh_basis(3, -d).values
    for l in range(4):
        for m in range(-l, l + 1):
            i = sh_index(l, m)
            assert abs(b[i] - (-1) ** l * a[i]) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(unit, st.floats(-math.pi, math.pi))
def test_z_rotation_mixes_m1_pair(d, phi0):
    c, s = math.cos(phi0), math.sin(phi0)
    rd = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]])
    for l in (1, 2, 3):
        a = eval_sh_basis(3, d).values
        b = eval_sh_basis(3, rd).values
        cos_m, sin_m = a[sh_index(l, 1)], a[sh_index(l, -1)]
        # Y(phi + phi0): cos(m phi + phi0) and sin(m phi + phi0) recombination
        assert b[sh_index(l, 1)] == pytest.approx(c * cos_m - s * sin_m, abs=1e-9)
        assert b[sh_index(l, -1)] == pytest.approx(s * cos_m + c * sin_m, abs=1e-9)


def test_rejects_non_unit_and_bad_degree():
    with pytest.raises(ArgumentError):
        eval_sh_basis(2, [1.0, 1.0, 0.0])
    with pytest.raises(ArgumentError):
        eval_sh_basis(4, [0, 0, 1])
    # within tolerance is accepted
    eval_sh_basis(1, [0, 0, 1 + 5e-7])
