import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import quat_matrix, random_field, random_quat, sh_table
from tortho.errors import ArgumentError, DegenerateRotationError
from tortho.field import (
    GaussianField,
    concat_fields,
    covariance_from_rs,
    dc_activations,
    eval_color,
    eval_fagk,
    field_activations,
    quat_multiply,
    quat_to_rotmat,
    rotmat_to_quat,
)

quats = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 4).filter(lambda q: np.linalg.norm(q) > 0.1).map(
    lambda q: np.asarray(q) / np.linalg.norm(q)
)
scales = st.tuples(*[st.floats(0.01, 10.0)] * 3).map(np.asarray)


def one(**over):
    kw = dict(
        positions=np.zeros((1, 3)),
        rotations=np.array([[1.0, 0, 0, 0]]),
        log_scales=np.zeros((1, 3)),
        opacity_logits=np.zeros(1),
        color_sh=np.zeros((1, 16, 3)),
    )
    kw.update(over)
    return GaussianField(**kw)


def test_covariance_examples():
    np.testing.assert_allclose(covariance_from_rs([1, 0, 0, 0], [1, 2, 3]), np.diag([1.0, 4, 9]), atol=1e-15)
    h = math.sqrt(0.5)
    cov = covariance_from_rs([h, 0, 0, h], [1, 2, 1])
    R = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    np.testing.assert_allclose(cov, R @ np.diag([1.0, 4, 1]) @ R.T, atol=1e-12)
    np.testing.assert_allclose(cov, np.diag([4.0, 1, 1]), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(quats, scales)
def test_covariance_psd_double_cover_and_oracle(q, s):
    a = covariance_from_rs(q, s)
    assert np.linalg.eigvalsh(a).min() >= -1e-10 * max(1.0, s.max() ** 2)
    np.testing.assert_allclose(a, covariance_from_rs(-q, s), atol=1e-12 * max(1.0, s.max() ** 2))
    M = quat_matrix(q) @ np.diag(s)
    np.testing.assert_allclose(a, M @ M.T, atol=1e-12 * max(1.0, s.max() ** 2))


def test_covariance_rejects_bad_input():
    with pytest.raises(ArgumentError):
        covariance_from_rs([1.0, 1.0, 0, 0], [1, 1, 1])
    with pytest.raises(ArgumentError):
        covariance_from_rs([1.0, 0, 0, 0], [1, 0, 1])


@settings(max_examples=100, deadline=None)
@given(quats, quats)
def test_quaternion_helpers(a, b):
    np.testing.assert_allclose(quat_to_rotmat(a), quat_matrix(a), atol=1e-12)
    np.testing.assert_allclose(quat_to_rotmat(quat_multiply(a, b)), quat_matrix(a) @ quat_matrix(b), atol=1e-12)
    back = rotmat_to_quat(quat_to_rotmat(a))
    assert min(np.abs(back - a).max(), np.abs(back + a).max()) < 1e-9


def test_eval_color_examples():
    g = one()[0]
    np.testing.assert_array_equal(eval_color(g, [0, 0, 1], 3), [0.5, 0.5, 0.5])
    sh = np.zeros((1, 16, 3))
    sh[0, 0] = [1.0, -2.0, 0.3]
    c = eval_color(one(color_sh=sh)[0], [0, 0, 1], 3)
    np.testing.assert_allclose(c, np.maximum(0.2820948 * sh[0, 0] + 0.5, 0), atol=1e-7)
    assert c[1] == 0.0  # clamped at zero


def test_color_parity_oracle():
    rng = np.random.default_rng(3)
    sh = rng.normal(scale=0.05, size=(1, 16, 3))
    sh[0, 0] = 2.0  # keep both sides above the clamp
    g = one(color_sh=sh)[0]
    for _ in range(20):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        B = sh_table(d)
        odd = sum(B[i] * sh[0, i] for i in range(1, 4)) + sum(B[i] * sh[0, i] for i in range(9, 16))
        np.testing.assert_allclose(eval_color(g, d, 3) - eval_color(g, -d, 3), 2 * odd, atol=1e-12)


def test_fagk_zero_banks_passthrough():
    q = np.array([[0.5, 0.5, -0.5, 0.5]])
    f = one(rotations=q, log_scales=np.array([[0.1, -0.2, 0.3]]), opacity_logits=np.array([0.7])).with_fagk()
    op, sc, rot = eval_fagk(f[0], [0, 0, -1], 3)
    assert op == 1 / (1 + math.exp(-0.7))
    np.testing.assert_array_equal(sc, np.exp([0.1, -0.2, 0.3]))
    np.testing.assert_allclose(rot, q[0], atol=1e-15)


def test_fagk_disabled_equals_dc_bit_exact():
    rng = np.random.default_rng(4)
    f = random_field(rng, 50, (0, 1, 0, 1), fagk=True)
    for got, want in zip(field_activations(f, [0, 0, -1], 3, use_fagk=False), dc_activations(f)):
        np.testing.assert_array_equal(got, want)
    zero = f.without_fagk().with_fagk()
    for got, want in zip(field_activations(zero, [0, 0, -1], 3), dc_activations(f)):
        np.testing.assert_array_equal(got, want)


def with_opacity_bank(bank, a):
    f = one(opacity_logits=np.array([a])).with_fagk()
    ob = np.zeros((1, 15))
    ob[0] = bank
    return GaussianField(f.positions, f.rotations, f.log_scales, f.opacity_logits, f.color_sh,
                         ob, f.fagk_scale_sh, f.fagk_rotation_sh)[0]


def logit(p):
    return math.log(p / (1 - p))


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.lists(st.floats(-20, 20), min_size=15, max_size=15))
def test_fagk_opacity_in_range_and_band1_symmetric(a, bank):
    d = np.array([0.3, -0.4, math.sqrt(0.75)])
    op, _, _ = eval_fagk(with_opacity_bank(bank, a), d, 3)
    assert 0.0 <= op <= 1.0
    # with only band 1 populated the logits at d and -d average to a
    b1 = np.zeros(15)
    b1[:3] = np.clip(bank[:3], -3, 3)
    g = with_opacity_bank(b1, a)
    o1, _, _ = eval_fagk(g, d, 3)
    o2, _, _ = eval_fagk(g, -d, 3)
    assert (logit(o1) + logit(o2)) / 2 == pytest.approx(a, abs=1e-6)


def test_fagk_matches_table_oracle():
    rng = np.random.default_rng(5)
    f = random_field(rng, 30, (0, 1, 0, 1), fagk=True)
    for _ in range(5):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        B = sh_table(d)[1:]
        op, sc, rot = field_activations(f, d, 3)
        for i in range(f.count):
            want_op = 1 / (1 + math.exp(-(f.opacity_logits[i] + f.fagk_opacity_sh[i] @ B)))
            want_sc = np.exp(f.log_scales[i] + B @ f.fagk_scale_sh[i])
            q = f.rotations[i] + B @ f.fagk_rotation_sh[i]
            assert op[i] == pytest.approx(want_op, abs=1e-12)
            np.testing.assert_allclose(sc[i], want_sc, rtol=1e-12)
            np.testing.assert_allclose(rot[i], q / np.linalg.norm(q), atol=1e-12)


def test_degenerate_fagk_rotation():
    f = one().with_fagk()
    rot = np.array(f.fagk_rotation_sh)
    # band-1 z term at the pole is C1; cancel the DC quaternion exactly
    rot[0, 1, 0] = -1.0 / sh_table([0, 0, 1])[2]
    g = GaussianField(f.positions, f.rotations, f.log_scales, f.opacity_logits, f.color_sh,
                      f.fagk_opacity_sh, f.fagk_scale_sh, rot)
    with pytest.raises(DegenerateRotationError):
        eval_fagk(g[0], [0, 0, 1], 3)


def test_field_validation_and_immutability():
    with pytest.raises(ArgumentError):
        one(color_sh=np.zeros((1, 5, 3)))
    with pytest.raises(ArgumentError):
        GaussianField(np.zeros((2, 3)), np.zeros((1, 4)), np.zeros((2, 3)), np.zeros(2), np.zeros((2, 1, 3)))
    f = one()
    with pytest.raises(ValueError):
        f.positions[0, 0] = 1.0


def test_bounds_after_concat():
    rng = np.random.default_rng(6)
    a = random_field(rng, 20, (0, 1, 0, 1))
    b = random_field(rng, 30, (5, 6, 5, 6), fagk=True, degree=1)
    m = concat_fields([a, b])
    assert m.count == 50 and m.fagk_enabled and m.color_sh.shape[1] == 16
    lo, hi = m.bounds
    assert np.all(m.positions >= lo) and np.all(m.positions <= hi)
    assert GaussianField.empty().bounds is None


def test_random_quats_normalised():
    q = random_quat(np.random.default_rng(0), 10)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0)
