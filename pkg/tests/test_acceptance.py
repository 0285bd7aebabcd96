"""Acceptance criteria, each run at its stated tolerance and reported as one PASS/FAIL line."""

import itertools
import json

import numpy as np

from conftest import ACCEPTANCE_LINES
from hpn_instantons.adhm import (
    core_from_adhm,
    negative_control_base,
    one_instanton,
    perturb,
    random_valid_family,
    single_matrix_family,
    validate,
)
from hpn_instantons.cli import main
from hpn_instantons.curvature import (
    curvature_components,
    curvature_from_core,
    curvature_from_potential,
    curvature_of_potential_field,
    instanton_residual,
    relation_residuals,
    ym_density,
)
from hpn_instantons.diff import DiffEngine
from hpn_instantons.gauge import (
    constant_core,
    core_potential_field,
    eta_of_nu,
    transformed_potential_field,
    unitary_gauge,
    xi_of_lambda,
)
from hpn_instantons.geometry import (
    H_GEN,
    TAGS,
    ConePoint,
    HarmonicPoint,
    TangentDirection,
    expm2,
    invariant_vector_field,
    random_harmonic_point,
    random_sl2,
    verify_bracket_table,
    z_matrix,
)
from hpn_instantons.harmonic_gauge import (
    analytic_gauge,
    check_characterising,
    check_curvature_relation,
    forbidden_derivative_residual,
    homogeneity_residuals,
    loop_holonomy,
    parallel_transport,
    prepotential_minus,
    prepotential_plus,
    vanishing_residuals,
)
from hpn_instantons.quatlin import Quaternion, dagger, embed_components


def record(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cdir(rng, size):
    return TangentDirection(rng.normal(size=size) + 1j * rng.normal(size=size))


# 1 ---------------------------------------------------------------------------


def test_criterion_01_embedding():
    rng = np.random.default_rng(1)
    count = 100_000
    a = rng.normal(size=(count, 4))
    b = rng.normal(size=(count, 4))
    ba = np.array([(Quaternion(*q) * Quaternion(*p)).as_array() for p, q in zip(a, b)])
    ma, mb = embed_components(a), embed_components(b)
    hom = float(np.max(np.abs(ma @ mb - embed_components(ba))))
    conj = a * np.array([1, -1, -1, -1])
    dag = float(np.max(np.abs(dagger(ma) - embed_components(conj))))
    worst = max(hom, dag)
    record(1, worst < 1e-13, f"max error {worst:.2e} over {count} pairs (tol 1e-13)")


# 2 ---------------------------------------------------------------------------


def test_criterion_02_frames():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        k, m = rng.integers(1, 9, size=2)
        lam = rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m))
        xi = xi_of_lambda(lam)
        eta = eta_of_nu(-dagger(lam))
        w = np.hstack([xi, eta])
        worst = max(
            worst,
            np.max(np.abs(dagger(xi) @ xi - np.eye(m))),
            np.max(np.abs(dagger(xi) @ eta)),
            np.max(np.abs(w @ dagger(w) - np.eye(k + m))),
        )
    record(2, worst < 1e-12, f"max error {worst:.2e} over 1000 cores up to 8x8 (tol 1e-12)")


# 3 ---------------------------------------------------------------------------


def test_criterion_03_bracket_table():
    rep = verify_bracket_table(tol=1e-6, samples=50, seed=0, ns=(1, 2), t=1e-4)
    fails = ", ".join(f"[{e.left},{e.right}] {e.max_residual:.1e}" for e in rep.failures())
    detail = f"[G0,H--] sign '{rep.ambiguous_sign}' (residual {rep.ambiguous_residual:.1e})"
    if fails:
        detail += f"; failing: {fails}"
    record(3, rep.passed, detail)


# 4 ---------------------------------------------------------------------------


def test_criterion_04_curvature_cross_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in (1, 2):
        core = core_from_adhm(one_instanton(n))
        for _ in range(50):
            hp = random_harmonic_point(rng, n)
            for _ in range(5):
                X, Y = cdir(rng, 4 * n + 4), cdir(rng, 4 * n + 4)
                fc = curvature_from_core(core, hp, X, Y)
                fp = curvature_from_potential(core, hp, X, Y)
                worst = max(worst, np.linalg.norm(fp - fc) / np.linalg.norm(fc))
    record(4, worst < 1e-6, f"max relative error {worst:.2e} (tol 1e-6)")


# 5 ---------------------------------------------------------------------------


def test_criterion_05_instanton_condition():
    rng = np.random.default_rng(5)
    cases = {
        "one_instanton n=1": one_instanton(1),
        "one_instanton n=2": one_instanton(2),
        "single-matrix family": single_matrix_family(2, 2, 2, rng),
        "random valid family": random_valid_family(2, 3, 2, rng),
    }
    worst_res, worst_rel, lifted = 0.0, 0.0, 0.0
    for data in cases.values():
        assert validate(data).valid
        core = core_from_adhm(data)
        for _ in range(100):
            hp = random_harmonic_point(rng, data.n)
            s = curvature_components(core, hp)
            worst_res = max(worst_res, s.residual)
            worst_rel = max(worst_rel, *relation_residuals(s))
            Y = cdir(rng, 4 * data.n + 4)
            for tag in TAGS:
                lifted = max(lifted, float(np.max(np.abs(curvature_from_core(core, hp, invariant_vector_field(tag, hp), Y)))))
    ok = worst_res < 1e-6 and worst_rel < 1e-6 and lifted == 0.0
    record(5, ok, f"residual {worst_res:.1e}, relations {worst_rel:.1e}, max |F(tag, .)| = {lifted} over 4 x 100 points")


# 6 ---------------------------------------------------------------------------


def test_criterion_06_negative_control():
    base = negative_control_base()
    rng = np.random.default_rng(6)
    broken, raised = 0, 0
    for seed in range(100):
        data = perturb(base, 0.3, seed)
        broken += validate(data).max_residual > 1e-3
        core = core_from_adhm(data)
        res = [instanton_residual(core, random_harmonic_point(rng, data.n, box=2.0)) for _ in range(3)]
        raised += float(np.median(res)) > 0.05
    ok = broken >= 95 and raised >= 95
    record(6, ok, f"validate broken for {broken}/100 seeds, residual > 0.05 for {raised}/100 seeds (need 95)")


# 7 ---------------------------------------------------------------------------


def test_criterion_07_gauge_covariance():
    rng = np.random.default_rng(7)
    core = core_from_adhm(one_instanton(1))
    engine = DiffEngine(step=1e-3)
    worst_f, worst_ym = 0.0, 0.0
    for _ in range(20):
        g = unitary_gauge(rng, 1, core.m_eff)
        hp = random_harmonic_point(rng, 1)
        X, Y = TangentDirection(rng.normal(size=8)), TangentDirection(rng.normal(size=8))
        field = transformed_potential_field(core_potential_field(core, engine), g, engine)
        f_new = curvature_of_potential_field(field, hp, X, Y, engine)
        gv = g(hp)
        f_old = curvature_from_core(core, hp, X, Y)
        worst_f = max(worst_f, float(np.max(np.abs(f_new - np.linalg.inv(gv) @ f_old @ gv))))
        worst_ym = max(worst_ym, abs(ym_density(core, hp, gv) - ym_density(core, hp)))
    worst = max(worst_f, worst_ym)
    record(7, worst < 1e-8, f"curvature {worst_f:.1e}, ym_density {worst_ym:.1e} over 20 gauges (tol 1e-8)")


# 8, 9 --------------------------------------------------------------------------

REF = HarmonicPoint(ConePoint(1, np.array([1, 0.2j, 0.1, -0.2 + 0.1j])), random_sl2(np.random.default_rng(0), 0.3))


def subcell():
    x0 = REF.base.real_coords()
    grid = np.linspace(-0.4, 0.4, 5)
    pts = []
    for i, off in enumerate(itertools.product(grid, repeat=4)):
        x = x0.copy()
        x[4:] += off
        pts.append(HarmonicPoint(ConePoint.from_real(x), REF.u @ expm2(((i % 5) / 4 - 0.5) * H_GEN["H0"])))
    return pts


def test_criterion_08_analytic_gauge():
    core = core_from_adhm(one_instanton(1))
    ag = analytic_gauge(core, REF)
    pts = subcell()
    van = max(vanishing_residuals(ag, pts).values())
    Z = np.array([z_matrix(p.base) for p in pts])
    u = np.array([p.u for p in pts])
    other = analytic_gauge(core, REF, order=[4, 3])
    perm = float(np.max(np.abs(ag.gauge(Z, u) - other.gauge(Z, u))))
    hol = float(np.max(loop_holonomy(core, Z, u, 3, 4)))
    ok = van < 5e-6 and perm < 1e-6 and hol < 1e-6
    record(8, ok, f"components {van:.1e} (tol 5e-6), permutation {perm:.1e}, holonomy {hol:.1e} (tol 1e-6) on 5^4 points")


def test_criterion_09_prepotential_laws():
    ag = analytic_gauge(core_from_adhm(one_instanton(1)), REF)
    rng = np.random.default_rng(9)
    pts = [subcell()[i] for i in rng.choice(625, size=8, replace=False)]
    single = {
        "homogeneity": max(homogeneity_residuals(ag, pts).values()),
        "forbidden": forbidden_derivative_residual(ag, pts),
        "characterising": check_characterising(ag, pts),
        "A+a two ways": max(prepotential_plus(ag, p).residuals["A_pa_two_ways"] for p in pts[:3]),
    }
    stacked = check_curvature_relation(ag, pts[:3])
    ok = max(single.values()) < 1e-5 and stacked < 1e-4
    parts = ", ".join(f"{k} {v:.1e}" for k, v in single.items())
    record(9, ok, f"{parts} (tol 1e-5); curvature relation {stacked:.1e} (tol 1e-4)")


# 10 --------------------------------------------------------------------------


def test_criterion_10_flat_limit():
    rng = np.random.default_rng(10)
    f_worst, prep, trans = 0.0, 0.0, 0.0
    for n in (1, 2):
        core = constant_core(n, rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        for _ in range(5):
            hp = random_harmonic_point(rng, n)
            X, Y = cdir(rng, 4 * n + 4), cdir(rng, 4 * n + 4)
            f_worst = max(
                f_worst,
                curvature_components(core, hp).F_norm,
                float(np.linalg.norm(curvature_from_potential(core, hp, X, Y))),
            )
            g = parallel_transport(core, np.eye(2), hp, [(TangentDirection(rng.normal(size=4 * n + 4)), 0.5)])
            trans = max(trans, float(np.max(np.abs(g - np.eye(2)))))
    core = constant_core(1, np.ones((2, 2)))
    ag = analytic_gauge(core, REF)
    for hp in subcell()[::125]:
        s = prepotential_plus(ag, hp)
        prep = max(prep, float(np.max(np.abs(prepotential_minus(ag, hp)))), float(np.max(np.abs(s.A_pp))))
        Z, u = z_matrix(hp.base), hp.u
        trans = max(trans, float(np.max(np.abs(ag.gauge(Z, u) - np.eye(2)))))
    ok = f_worst < 1e-10 and prep == 0.0 and trans < 1e-12
    record(10, ok, f"|F| {f_worst:.1e} (tol 1e-10), prepotentials {prep}, transport deviation {trans:.1e}")


# 11 --------------------------------------------------------------------------


def test_criterion_11_cli(tmp_path):
    ex = tmp_path / "one.json"
    codes = [main(["gen-example", "--output", str(ex)])]
    codes.append(main(["validate", "--input", str(ex)]))
    reports = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.json"
        codes.append(main(["check-instanton", "--input", str(ex), "--seed", "11", "--output", str(out)]))
        reports.append(out.read_bytes())
    pipeline = codes == [0, 0, 0, 0] and json.loads(reports[0])["verdict"] == "pass"
    identical = reports[0] == reports[1]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(perturb(negative_control_base(), 0.3, 0).to_json()))
    status = (
        main(["validate", "--input", str(bad)]) == 1
        and main(["validate", "--input", str(tmp_path / "missing.json")]) == 2
        and main(["check-instanton"]) == 2
    )
    ok = pipeline and identical and status
    record(11, ok, f"pipeline {pipeline}, byte-identical {identical}, exit codes {status}")
