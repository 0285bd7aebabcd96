"""Curvature by two independent routes, its irreducible split, and instanton residuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .diff import DiffEngine
from .errors import AsymmetryError
from .gauge import Core, core_potential_field, xi_of_lambda
from .geometry import ConePoint, HarmonicPoint, TangentDirection, inverse_coord_jacobian
from .quatlin import dagger, hermitian_inv_sqrt

EPS = np.finfo(float).eps
DirField = Union[TangentDirection, Callable[[HarmonicPoint], TangentDirection]]

# Nested differences lose accuracy; the outer level uses a larger step.
OUTER_STEP = 1e-3


def _as_field(d: DirField) -> Callable[[HarmonicPoint], TangentDirection]:
    if isinstance(d, TangentDirection):
        return lambda hp: d
    return d


def bracket_coeffs(X: DirField, Y: DirField, hp: HarmonicPoint, engine: DiffEngine) -> Optional[TangentDirection]:
    """Base part of [X, Y]; zero for constant-coefficient fields.

    Fiber generators of the inputs are treated as left-invariant fields on SL2.
    """
    if isinstance(X, TangentDirection) and isinstance(Y, TangentDirection):
        fx, fy = X.fiber, Y.fiber
        if fx is not None and fy is not None:
            return TangentDirection(np.zeros_like(X.coeffs), fx @ fy - fy @ fx)
        return None
    Xf, Yf = _as_field(X), _as_field(Y)
    x, y = Xf(hp), Yf(hp)
    dy = engine.derivative(lambda p: Yf(p).coeffs, hp, x)
    dx = engine.derivative(lambda p: Xf(p).coeffs, hp, y)
    return TangentDirection(dy - dx)


def curvature_of_potential_field(
    A_field: Callable[[HarmonicPoint, TangentDirection], np.ndarray],
    hp: HarmonicPoint,
    X: DirField,
    Y: DirField,
    engine: DiffEngine = DiffEngine(step=OUTER_STEP),
) -> np.ndarray:
    """F(X,Y) = X.A(Y) - Y.A(X) + [A(X), A(Y)] - A([X,Y])."""
    Xf, Yf = _as_field(X), _as_field(Y)
    x, y = Xf(hp), Yf(hp)
    ax = np.asarray(A_field(hp, x))
    ay = np.asarray(A_field(hp, y))
    xay = engine.derivative(lambda p: A_field(p, Yf(p)), hp, x)
    yax = engine.derivative(lambda p: A_field(p, Xf(p)), hp, y)
    f = xay - yax + ax @ ay - ay @ ax
    br = bracket_coeffs(X, Y, hp, engine)
    if br is not None:
        f = f - np.asarray(A_field(hp, br))
    return f


def curvature_from_potential(
    core: Core,
    p: HarmonicPoint,
    X: DirField,
    Y: DirField,
    engine: DiffEngine = DiffEngine(),
    outer: DiffEngine = DiffEngine(step=OUTER_STEP),
) -> np.ndarray:
    return curvature_of_potential_field(core_potential_field(core, engine), p, X, Y, outer)


def _lemma_pieces(core: Core, x: np.ndarray):
    lam = core.at_coords(x)
    m, k = core.m_eff, core.k_eff
    s = hermitian_inv_sqrt(np.eye(m) + dagger(lam) @ lam)
    nu = -dagger(lam)
    minv = np.linalg.inv(np.eye(k) + dagger(nu) @ nu)
    grad = core.grad(x)  # d lambda / dx_k
    return s, minv, grad


def curvature_from_core(core: Core, p: HarmonicPoint, X: TangentDirection, Y: TangentDirection) -> np.ndarray:
    """F(X,Y) = S (dnu(X) M dnu^+(Y) - dnu(Y) M dnu^+(X)) S with nu = -lambda^dagger.

    ``S = (I + lambda^dagger lambda)^{-1/2}`` is the top block of xi and
    ``M = (I + nu^dagger nu)^{-1}``; ``dnu^+`` is the complex-linear derivative of
    the field nu^dagger.  Exact zeros along directions outside the core's mask.
    """
    x = p.base.real_coords() if isinstance(p, HarmonicPoint) else p.real_coords()
    s, minv, grad = _lemma_pieces(core, x)
    cx = np.where(core.mask, X.coeffs, 0)
    cy = np.where(core.mask, Y.coeffs, 0)
    # d nu(X) = -sum c_k (d_k lambda)^dagger ; d(nu^dagger)(Y) = -sum c_k d_k lambda
    dnu_x = -np.einsum("k,kba->ab", cx, np.conj(grad))
    dnu_y = -np.einsum("k,kba->ab", cy, np.conj(grad))
    dnud_x = -np.einsum("k,kab->ab", cx, grad)
    dnud_y = -np.einsum("k,kab->ab", cy, grad)
    return s @ (dnu_x @ minv @ dnud_y - dnu_y @ minv @ dnud_x) @ s


def real_curvature_matrix(core: Core, x: np.ndarray) -> np.ndarray:
    """All F(d_k, d_l) on the real coordinate basis, shape (N, N, m, m), by the core route."""
    s, minv, grad = _lemma_pieces(core, x)
    dnu = -np.conj(np.swapaxes(grad, -1, -2))  # (N, m, k)
    dnud = -grad  # (N, k, m)
    t = np.einsum("kab,bc,lcd->klad", dnu, minv, dnud)
    f = t - np.swapaxes(t, 0, 1)
    return np.einsum("ab,klbc,cd->klad", s, f, s)


@dataclass
class CurvatureSample:
    point: HarmonicPoint
    F_components: np.ndarray  # [i, a, j, b, m, m]
    S: Optional[np.ndarray] = None  # [a, b, m, m]
    F2: Optional[np.ndarray] = None
    F2_norm: float = 0.0
    F_norm: float = 0.0

    def antisymmetry_residual(self) -> float:
        F = self.F_components
        return float(np.linalg.norm(F + F.transpose(2, 3, 0, 1, 4, 5)))

    @property
    def residual(self) -> float:
        return self.F2_norm / (self.F_norm + EPS)

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "F_norm": self.F_norm,
            "F2_norm": self.F2_norm,
            "residual": self.residual,
        }


def components_from_real(Freal: np.ndarray, n: int) -> np.ndarray:
    jinv = inverse_coord_jacobian(n)  # (N, 2*(2n+2)), columns d/dz^{ia}
    m2 = 2 * n + 2
    comp = np.einsum("kp,lq,klab->pqab", jinv, jinv, Freal)
    return comp.reshape(2, m2, 2, m2, *Freal.shape[2:])


def curvature_components(core: Core, hp: HarmonicPoint, method: str = "core", engine: Optional[DiffEngine] = None) -> CurvatureSample:
    """F on the complex frame d/dz^{ia}, extended bilinearly from the real basis."""
    x = hp.base.real_coords()
    if method == "core":
        Freal = real_curvature_matrix(core, x)
    elif method == "potential":
        size = 4 * hp.n + 4
        Freal = np.zeros((size, size, core.m_eff, core.m_eff), dtype=complex)
        eye = np.eye(size)
        kwargs = {} if engine is None else {"engine": engine}
        for k in range(size):
            for l in range(k + 1, size):
                if core.mask[k] or core.mask[l]:
                    f = curvature_from_potential(core, hp, TangentDirection(eye[k]), TangentDirection(eye[l]), **kwargs)
                    Freal[k, l], Freal[l, k] = f, -f
    else:
        raise ValueError(f"unknown method {method!r}")
    comp = components_from_real(Freal, hp.n)
    sample = CurvatureSample(hp, comp, F_norm=float(np.linalg.norm(comp)))
    return decompose(sample)


def decompose(sample: CurvatureSample, tol: float = 1e-8) -> CurvatureSample:
    """S_ab = 1/2 eps^{ji} F[i,a][j,b] with eps_12 = +1 = -eps^12; F2 = F - eps (x) S."""
    F = sample.F_components
    fn = float(np.linalg.norm(F))
    asym = sample.antisymmetry_residual()
    if asym > 10 * tol * max(fn, 1.0):
        raise AsymmetryError(f"antisymmetry residual {asym:.3e} exceeds tolerance")
    S = 0.5 * (F[0, :, 1] - F[1, :, 0])
    S = 0.5 * (S + S.transpose(1, 0, 2, 3))
    F1 = np.zeros_like(F)
    F1[0, :, 1] = S
    F1[1, :, 0] = -S
    F2 = F - F1
    sample.S = S
    sample.F2 = F2
    sample.F_norm = fn
    sample.F2_norm = float(np.linalg.norm(F2))
    return sample


def pm_components(sample: CurvatureSample) -> np.ndarray:
    """F(e_{sa}, e_{tb}) with s, t in (+, -) -> indices 0, 1."""
    u = sample.point.u
    return np.einsum("is,jt,iajbxy->satbxy", u, u, sample.F_components)


def relation_residuals(sample: CurvatureSample) -> tuple[float, float, float]:
    """Relative residuals of F(e+,e+) = 0, F(e-,e-) = 0, F(e+a,e-b) = -F(e-a,e+b)."""
    pm = pm_components(sample)
    scale = sample.F_norm + EPS
    r1 = np.linalg.norm(pm[0, :, 0]) / scale
    r2 = np.linalg.norm(pm[1, :, 1]) / scale
    r3 = np.linalg.norm(pm[0, :, 1] + pm[1, :, 0].transpose(1, 0, 2, 3)) / scale
    return float(r1), float(r2), float(r3)


def instanton_residual(core: Core, hp: HarmonicPoint, method: str = "core") -> float:
    return curvature_components(core, hp, method).residual


def ym_density(core: Core, p: Union[ConePoint, HarmonicPoint], gauge: Optional[np.ndarray] = None) -> float:
    """Sum over k < l of |F_kl|^2 on the real coordinate basis, optionally after g^{-1} F g."""
    base = p.base if isinstance(p, HarmonicPoint) else p
    Freal = real_curvature_matrix(core, base.real_coords())
    if gauge is not None:
        Freal = np.linalg.inv(gauge) @ Freal @ gauge
    iu = np.triu_indices(Freal.shape[0], 1)
    return float(np.sum(np.abs(Freal[iu]) ** 2))
