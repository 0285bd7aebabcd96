import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpn_instantons.diff import DiffEngine
from hpn_instantons.errors import ChartError, ShapeError
from hpn_instantons.geometry import (
    ConePoint,
    FrameSpec,
    HarmonicPoint,
    chart_from_quaternions,
    complex_direction,
    expm2,
    flow_commutator,
    field_velocity,
    flow_step,
    inv2,
    invariant_vector_field,
    random_harmonic_point,
    random_sl2,
    strongly_adapted_vertical_frame,
    x_of_z,
    z_from_zeta,
    z_matrix,
    z_pm,
)
from hpn_instantons.quatlin import ONE, QJ, Quaternion, embed

seeds = st.integers(0, 2**32 - 1)


def point(n=1, seed=0):
    return random_harmonic_point(np.random.default_rng(seed), n)


def test_chart_examples():
    assert np.array_equal(chart_from_quaternions([ONE, Quaternion()]).zeta, [1, 0, 0, 0])
    assert np.array_equal(chart_from_quaternions([ONE, QJ]).zeta, [1, 0, 0, 1])
    p = chart_from_quaternions([QJ, ONE])
    assert np.allclose(p.zeta[2:], [0, -1])
    with pytest.raises(ChartError):
        chart_from_quaternions([Quaternion(), ONE])
    with pytest.raises(ChartError):
        ConePoint(1, np.array([0, 0, 1, 1]))


def test_z_matrix_examples():
    z = z_matrix(ConePoint(1, np.array([1, 0, 0, 0])))
    assert np.array_equal(z, [[1, 0, 0, 0], [0, 1, 0, 0]])
    z = z_matrix(ConePoint(1, np.array([0, 1, 1, 0])))
    assert np.array_equal(z[:, :2], [[0, 1], [-1, 0]])


@given(seeds)
def test_z_matrix_slab_is_transposed_embedding(seed):
    hp = point(2, seed)
    z = z_matrix(hp.base)
    for alpha in range(3):
        q = Quaternion.from_complex_pair(hp.base.zeta[2 * alpha], hp.base.zeta[2 * alpha + 1])
        assert np.allclose(z[:, 2 * alpha : 2 * alpha + 2], embed(q).T)


@given(seeds)
def test_x_of_z_on_real_slice(seed):
    hp = point(2, seed)
    assert np.allclose(x_of_z(z_matrix(hp.base)), hp.base.real_coords())


def test_z_pm_identity_and_roundtrip():
    hp = point(1, 3)
    assert np.allclose(z_pm(HarmonicPoint(hp.base)), z_matrix(hp.base))
    zpm = z_pm(hp)
    assert np.allclose(hp.u @ zpm, z_matrix(hp.base))
    s = 1.7
    d = HarmonicPoint(hp.base, np.diag([s, 1 / s]))
    assert np.allclose(z_pm(d)[0], z_matrix(hp.base)[0] / s)
    assert np.allclose(inv2(hp.u), np.linalg.inv(hp.u))


def test_harmonic_point_needs_unit_determinant():
    with pytest.raises(ShapeError):
        HarmonicPoint(point().base, 2 * np.eye(2))


def test_json_round_trip():
    hp = point(2, 5)
    back = HarmonicPoint.from_json(json.loads(json.dumps(hp.to_json())))
    assert np.array_equal(back.u, hp.u)
    assert np.array_equal(back.base.zeta, hp.base.zeta)


def test_complex_direction_examples():
    hp = HarmonicPoint(ConePoint(1, np.array([1, 0, 0, 0])))
    c = complex_direction(1, "+", hp).coeffs
    assert np.allclose(c[:2], [0.5, -0.5j]) and not np.any(c[2:])
    # z^{21} = -conj(zeta0'), so d/dz^{-1} = -d/d conj(zeta0')
    c = complex_direction(1, "-", hp).coeffs
    assert np.allclose(c[2:4], [-0.5, -0.5j]) and not np.any(c[:2]) and not np.any(c[4:])
    with pytest.raises(IndexError):
        complex_direction(5, "+", hp)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_complex_direction_chain_rule(seed):
    hp = point(1, seed)
    engine = DiffEngine()
    uinv = inv2(hp.u)

    def zpm(x):
        return (uinv @ z_from_zeta(x[0::2] + 1j * x[1::2])).reshape(-1)

    x = hp.base.real_coords()
    for a in range(1, 5):
        for sign, row in (("+", 0), ("-", 1)):
            d = engine.along_real(zpm, x, complex_direction(a, sign, hp).coeffs)
            want = np.zeros(8)
            want[4 * row + a - 1] = 1
            assert np.max(np.abs(d - want)) < 1e-8


def test_h0_flow_example():
    hp = HarmonicPoint(ConePoint(1, np.array([1, 0, 0, 0])))
    q = flow_step(hp, invariant_vector_field("H0", hp), 0.3)
    assert np.allclose(q.u, np.diag([np.exp(0.3), np.exp(-0.3)]))


def test_gd_flow_and_velocity():
    hp = HarmonicPoint(ConePoint(1, np.array([1, 0, 0, 0])))
    v = invariant_vector_field("G_D", hp)
    assert np.allclose(v.coeffs[:2], [0.5, -0.5j])
    q = flow_step(hp, v, 0.4)
    assert np.allclose(q.base.zeta, [np.exp(0.4), 0, 0, 0])


@given(seeds, st.sampled_from(["H0", "H++", "H--"]), st.floats(-1, 1))
def test_h_flows_keep_z_and_det(seed, tag, t):
    hp = point(2, seed)
    q = flow_step(hp, invariant_vector_field(tag, hp), t)
    assert np.max(np.abs(z_matrix(q.base) - z_matrix(hp.base))) < 1e-12
    assert abs(np.linalg.det(q.u) - 1) < 1e-12
    back = flow_step(q, invariant_vector_field(tag, q), -t)
    assert np.max(np.abs(back.u - hp.u)) < 1e-14 * max(1.0, float(np.max(np.abs(q.u))) ** 2)


def test_flow_zero_time():
    hp = point(1, 2)
    q = flow_step(hp, invariant_vector_field("G1", hp), 0.0)
    assert np.array_equal(q.u, hp.u) and np.array_equal(q.base.zeta, hp.base.zeta)


def test_expm2_matches_series():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        series = sum(np.linalg.matrix_power(a, k) / math.factorial(k) for k in range(40))
        assert np.allclose(expm2(a), series, atol=1e-12)
    assert np.allclose(expm2(np.zeros((2, 2))), np.eye(2))
    assert abs(np.linalg.det(random_sl2(rng)) - 1) < 1e-13


@pytest.mark.parametrize(
    "left, right, rhs",
    [("H++", "H--", {"H0": 1}), ("H0", "H++", {"H++": 2}), ("H0", "H--", {"H--": -2}), ("G_D", "G1", {})],
)
def test_sample_brackets(left, right, rhs):
    rng = np.random.default_rng(11)
    for n in (1, 2):
        for _ in range(3):
            hp = random_harmonic_point(rng, n)
            got = flow_commutator(hp, left, right)
            assert np.max(np.abs(got - field_velocity(rhs, hp))) < 1e-6


def test_strongly_adapted_frame_examples():
    hp = HarmonicPoint(ConePoint(1, np.array([1, 0, 0.3, 0.2j])))
    ep1, ep2, em1, em2 = strongly_adapted_vertical_frame(hp, FrameSpec())
    assert np.allclose(ep1.coeffs[:4], [0.5, -0.5j, 0, 0])  # d/d eta
    assert np.allclose(ep2.coeffs[:4], [0, 0, 0.5, -0.5j])  # d/d zeta
    assert np.allclose(em1.coeffs, np.conj(ep1.coeffs))
    hp2 = HarmonicPoint(hp.base, random_sl2(np.random.default_rng(1)))
    half = strongly_adapted_vertical_frame(hp2, FrameSpec(kappa=2.0))
    assert np.allclose(2 * half[0].coeffs, strongly_adapted_vertical_frame(hp2)[0].coeffs)
    with pytest.raises(ValueError):
        FrameSpec(kappa=0)
