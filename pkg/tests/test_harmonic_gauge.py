import numpy as np
import pytest
from scipy.linalg import expm

from hpn_instantons.adhm import AdhmData, core_from_adhm, one_instanton, random_valid_family
from hpn_instantons.errors import ConstraintViolation, FlatnessError, OutOfCell
from hpn_instantons.gauge import constant_core
from hpn_instantons.geometry import (
    H_GEN,
    ConePoint,
    HarmonicPoint,
    TangentDirection,
    expm2,
    random_sl2,
    z_matrix,
)
from hpn_instantons.harmonic_gauge import (
    analytic_gauge,
    check_characterising,
    check_curvature_relation,
    check_equivalence,
    forbidden_derivative_residual,
    homogeneity_residuals,
    loop_holonomy,
    parallel_transport,
    prepotential_minus,
    prepotential_plus,
    vanishing_residuals,
    z_pm_batch,
)
from hpn_instantons.quatlin import QuatMatrix

REF = HarmonicPoint(
    ConePoint(1, np.array([1, 0.2j, 0.1, -0.2 + 0.1j])), random_sl2(np.random.default_rng(0), 0.3)
)


def cell_sample(ref, count, seed):
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(count):
        z = ref.base.zeta.copy()
        z[2:] += rng.uniform(-0.3, 0.3, 2) + 1j * rng.uniform(-0.3, 0.3, 2)
        pts.append(HarmonicPoint(ConePoint(1, z), ref.u @ expm2(rng.uniform(-0.5, 0.5) * H_GEN["H0"])))
    return pts


@pytest.fixture(scope="module")
def ag():
    return analytic_gauge(core_from_adhm(one_instanton(1)), REF)


@pytest.fixture(scope="module")
def pts():
    return cell_sample(REF, 4, 1)


def arrays(hps):
    return np.array([z_matrix(h.base) for h in hps]), np.array([h.u for h in hps])


def test_identity_at_reference(ag):
    assert np.max(np.abs(ag.gauge(z_matrix(REF.base), REF.u) - np.eye(2))) < 1e-12


def test_vanishing_components(ag, pts):
    res = vanishing_residuals(ag, pts)
    assert max(res.values()) < 5e-6


def test_prepotential_laws(ag, pts):
    hom = homogeneity_residuals(ag, pts)
    assert max(hom.values()) < 1e-5
    assert forbidden_derivative_residual(ag, pts) < 1e-5
    assert check_characterising(ag, pts) < 1e-5


def test_prepotential_plus_two_ways(ag, pts):
    s = prepotential_plus(ag, pts[0])
    assert s.residuals["A_pa_two_ways"] < 1e-5
    assert np.max(np.abs(s.A_pp)) > 1e-3  # the check is not vacuous
    assert np.allclose(prepotential_minus(ag, pts[0]), s.A_mm)
    assert set(s.to_json()) == {"point", "A_mm", "A_pp", "residuals"}


def test_curvature_relation(ag, pts):
    assert check_curvature_relation(ag, pts[:1]) < 1e-4


def test_transport_order_and_holonomy(ag, pts):
    other = analytic_gauge(ag.core, REF, order=[4, 3])
    Z, u = arrays(pts)
    assert np.max(np.abs(ag.gauge(Z, u) - other.gauge(Z, u))) < 1e-6
    assert np.max(loop_holonomy(ag.core, Z, u, 3, 4)) < 1e-6
    with pytest.raises(ValueError):
        analytic_gauge(ag.core, REF, order=[3])


def test_out_of_cell(ag):
    z = REF.base.zeta.copy()
    z[2] += 2.0
    with pytest.raises(OutOfCell):
        prepotential_minus(ag, HarmonicPoint(ConePoint(1, z), REF.u))


def test_invalid_core_has_no_analytic_gauge():
    rng = np.random.default_rng(8)
    data = AdhmData(1, 2, 2, tuple(QuatMatrix(rng.normal(size=(2, 2, 4))) for _ in range(2)))
    with pytest.raises(FlatnessError):
        analytic_gauge(core_from_adhm(data), REF)


def test_flat_limit():
    ag = analytic_gauge(constant_core(1, np.ones((2, 2))), REF)
    pts = cell_sample(REF, 3, 2)
    Z, u = arrays(pts)
    assert np.max(np.abs(ag.gauge(Z, u) - np.eye(2))) < 1e-12
    assert not np.any(prepotential_minus(ag, pts[0]))
    s = prepotential_plus(ag, pts[0])
    assert not np.any(s.A_pp) and all(not np.any(a) for a in s.A_pa)
    assert check_characterising(ag, pts) == 0 and check_curvature_relation(ag, pts[:1]) == 0


def test_valid_n2_family_builds():
    core = core_from_adhm(random_valid_family(2, 2, 2, np.random.default_rng(3)))
    ref = HarmonicPoint(ConePoint(2, np.array([1, 0, 0.1, 0.2j, 0.3, -0.1])))
    ag = analytic_gauge(core, ref)
    assert ag.transport_order == (2, 3, 4, 5)


def test_real_slice_transport():
    core = core_from_adhm(one_instanton(1))
    d = TangentDirection(np.eye(8)[5])
    g0 = np.eye(2, dtype=complex)
    g = parallel_transport(core, g0, REF, [(d, 0.3)])
    # potentials are anti-Hermitian on real directions, so transport is unitary
    assert np.max(np.abs(g.conj().T @ g - np.eye(2))) < 1e-9
    p1 = HarmonicPoint(ConePoint.from_real(REF.base.real_coords() + 0.3 * d.coeffs.real), REF.u)
    back = parallel_transport(core, g, p1, [(d, -0.3)])
    assert np.max(np.abs(back - g0)) < 1e-9
    flat = parallel_transport(constant_core(1, np.ones((2, 2))), g0, REF, [(d, 0.3)])
    assert np.array_equal(flat, g0)


def _field(c):
    def f(Z, u):
        zp = z_pm_batch(Z, u)
        return np.einsum("b,xy->bxy", zp[:, 0, 2] / zp[:, 0, 3], c)

    return f


def test_equivalence():
    rng = np.random.default_rng(5)
    pts = cell_sample(REF, 3, 6)
    c1 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    c2 = 0.3 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))

    def a1(Z, u):
        zp = z_pm_batch(Z, u)
        return np.einsum("b,xy->bxy", zp[:, 1, 2] ** 2, c1)

    zero = lambda Z, u: np.zeros(Z.shape[:-2] + (2, 2), dtype=complex)
    assert check_equivalence(a1, a1, zero, pts)
    assert not check_equivalence(a1, lambda Z, u: a1(Z, u) + 0.1, zero, pts)
    ghat = _field(c2)

    def a2(Z, u):
        g = ghat(Z, u)
        em = np.array([expm(-x) for x in g])
        ep = np.array([expm(x) for x in g])
        return em @ a1(Z, u) @ ep

    # ghat depends on z^{+} only, so H-- ghat = 0 and the law reduces to conjugation
    assert check_equivalence(a1, a2, ghat, pts)
    bad = lambda Z, u: np.einsum("b,xy->bxy", z_pm_batch(Z, u)[:, 1, 2], c2)
    with pytest.raises(ConstraintViolation):
        check_equivalence(a1, a1, bad, pts)
