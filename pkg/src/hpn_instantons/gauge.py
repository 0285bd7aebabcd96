"""Canonical frames xi, eta, cores, potentials and gauge transformations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .diff import DiffEngine
from .errors import ShapeError, SingularGauge
from .geometry import ConePoint, HarmonicPoint, TangentDirection
from .quatlin import dagger, hermitian_inv_sqrt

Point = Union[ConePoint, HarmonicPoint]


def _base(p: Point) -> ConePoint:
    return p.base if isinstance(p, HarmonicPoint) else p


@dataclass(frozen=True)
class Core:
    """A matrix field lambda(x) on the cone chart.

    ``func`` maps real coordinates of shape (..., 4n+4) to (..., k_eff, m_eff) and
    must be analytic, so that it also accepts complex coordinates.  ``mask`` marks
    the coordinates lambda may depend on.  ``dfunc``, when given, returns the
    partial derivatives with shape (..., 4n+4, k_eff, m_eff).
    """

    n: int
    k_eff: int
    m_eff: int
    func: Callable[[np.ndarray], np.ndarray]
    mask: np.ndarray
    dfunc: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "core"
    fd_step: float = 1e-5

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        if mask.shape != (4 * self.n + 4,):
            raise ShapeError(f"mask must have length {4 * self.n + 4}")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    def at_coords(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(x), dtype=complex)

    def eval(self, p: Point) -> np.ndarray:
        return self.at_coords(_base(p).real_coords())

    def tilde(self, x: np.ndarray) -> np.ndarray:
        """Holomorphic extension of lambda^dagger: equals dagger(lambda(x)) for real x."""
        return dagger(self.at_coords(np.conj(x)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Partials d lambda / d x_k, shape (..., 4n+4, k_eff, m_eff), masked entries exactly 0."""
        x = np.asarray(x)
        if self.dfunc is not None:
            g = np.asarray(self.dfunc(x), dtype=complex)
        else:
            size = 4 * self.n + 4
            g = np.zeros(x.shape[:-1] + (size, self.k_eff, self.m_eff), dtype=complex)
            h = self.fd_step
            for k in np.flatnonzero(self.mask):
                e = np.zeros(size)
                e[k] = 1.0

                def c(s):
                    return (self.at_coords(x + s * e) - self.at_coords(x - s * e)) / (2 * s)

                g[..., k, :, :] = (4 * c(h / 2) - c(h)) / 3
        return np.where(self.mask[:, None, None], g, 0)

    def differential(self, x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Complex-linear derivative of lambda along complex coefficient vector(s)."""
        return np.einsum("...k,...kij->...ij", coeffs, self.grad(x))


def constant_core(n: int, value: np.ndarray, name: str = "constant") -> Core:
    value = np.asarray(value, dtype=complex)
    k, m = value.shape
    size = 4 * n + 4

    def func(x):
        x = np.asarray(x)
        return np.broadcast_to(value, x.shape[:-1] + value.shape).copy()

    def dfunc(x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (size, k, m), dtype=complex)

    return Core(n, k, m, func, np.zeros(size, dtype=bool), dfunc, name)


def linear_core(n: int, c0: np.ndarray, cs: np.ndarray, mask: Optional[np.ndarray] = None, name: str = "linear") -> Core:
    """lambda(x) = c0 + sum_j x_j cs[j]."""
    c0 = np.asarray(c0, dtype=complex)
    cs = np.asarray(cs, dtype=complex)
    size = 4 * n + 4
    if mask is None:
        mask = np.any(cs != 0, axis=(1, 2))
    cs = np.where(np.asarray(mask)[:, None, None], cs, 0)

    def func(x):
        return c0 + np.einsum("...j,jab->...ab", np.asarray(x), cs)

    def dfunc(x):
        x = np.asarray(x)
        return np.broadcast_to(cs, x.shape[:-1] + cs.shape).astype(complex)

    return Core(n, c0.shape[0], c0.shape[1], func, mask, dfunc, name)


def random_polynomial_core(
    n: int, k: int, m: int, rng: np.random.Generator, mask: Optional[np.ndarray] = None, scale: float = 0.4
) -> Core:
    """Quadratic polynomial core with random complex coefficients (generic, not an instanton)."""
    size = 4 * n + 4
    if mask is None:
        mask = np.ones(size, dtype=bool)
    mask = np.asarray(mask, dtype=bool)

    def cplx(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    c0 = scale * cplx(k, m)
    c1 = scale * cplx(size, k, m) * mask[:, None, None]
    c2 = 0.3 * scale * cplx(size, size, k, m) * (mask[:, None] & mask[None, :])[:, :, None, None]

    def func(x):
        x = np.asarray(x)
        return c0 + np.einsum("...j,jab->...ab", x, c1) + np.einsum("...j,...l,jlab->...ab", x, x, c2)

    def dfunc(x):
        x = np.asarray(x)
        sym = c2 + np.swapaxes(c2, 0, 1)
        return c1 + np.einsum("...l,jlab->...jab", x, sym)

    return Core(n, k, m, func, mask, dfunc, "random-polynomial")


def xi_of_lambda(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    m = lam.shape[1]
    s = hermitian_inv_sqrt(np.eye(m) + dagger(lam) @ lam)
    return np.vstack([np.eye(m), lam]) @ s


def eta_of_nu(nu: np.ndarray) -> np.ndarray:
    nu = np.asarray(nu, dtype=complex)
    k = nu.shape[1]
    s = hermitian_inv_sqrt(np.eye(k) + dagger(nu) @ nu)
    return np.vstack([nu, np.eye(k)]) @ s


@dataclass(frozen=True)
class PotentialValue:
    value: np.ndarray
    direction: Optional[TangentDirection] = None

    def anti_hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.value + dagger(self.value))))


def xi_field(core: Core) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: xi_of_lambda(core.at_coords(x))


def potential(core: Core, p: Point, d: TangentDirection, engine: DiffEngine = DiffEngine()) -> PotentialValue:
    """A(d) = xi^dagger D_d xi for the canonical frame of ``core``; u-directions contribute 0."""
    x = _base(p).real_coords()
    coeffs = np.where(core.mask, d.coeffs, 0)
    if not np.any(coeffs):
        return PotentialValue(np.zeros((core.m_eff, core.m_eff), dtype=complex), d)
    f = xi_field(core)
    dxi = engine.along_real(f, x, coeffs)
    return PotentialValue(dagger(f(x)) @ dxi, d)


@dataclass(frozen=True)
class GaugeMap:
    eval: Callable[[HarmonicPoint], np.ndarray]
    name: str = "gauge"

    def __call__(self, hp: HarmonicPoint) -> np.ndarray:
        return np.asarray(self.eval(hp), dtype=complex)


def safe_inverse(g: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    if not np.all(np.isfinite(g)) or np.linalg.cond(g) > max_cond:
        raise SingularGauge("gauge value is not invertible")
    return np.linalg.inv(g)


def gauge_transform(
    A: PotentialValue, g: GaugeMap, p: HarmonicPoint, d: TangentDirection, engine: DiffEngine = DiffEngine()
) -> PotentialValue:
    gp = g(p)
    ginv = safe_inverse(gp)
    dg = engine.derivative(g, p, d)
    return PotentialValue(ginv @ A.value @ gp + ginv @ dg, d)


def transformed_potential_field(
    A_field: Callable[[HarmonicPoint, TangentDirection], np.ndarray], g: GaugeMap, engine: DiffEngine = DiffEngine()
) -> Callable[[HarmonicPoint, TangentDirection], np.ndarray]:
    def field_(hp, d):
        return gauge_transform(PotentialValue(A_field(hp, d), d), g, hp, d, engine).value

    return field_


def core_potential_field(core: Core, engine: DiffEngine = DiffEngine()):
    return lambda hp, d: potential(core, hp, d, engine).value


def covariant_derivative(
    A_field: Callable[[HarmonicPoint, TangentDirection], np.ndarray],
    s: Callable[[HarmonicPoint], np.ndarray],
    p: HarmonicPoint,
    d: TangentDirection,
    engine: DiffEngine = DiffEngine(),
) -> np.ndarray:
    """D_d s = d.s + A(d) s."""
    a = np.asarray(A_field(p, d))
    sv = np.asarray(s(p))
    if a.shape[-1] != sv.shape[0]:
        raise ShapeError(f"potential of shape {a.shape} cannot act on a section of shape {sv.shape}")
    return engine.derivative(s, p, d) + a @ sv


def unitary_gauge(rng: np.random.Generator, n: int, m: int, scale: float = 0.5) -> GaugeMap:
    """Smooth random U(m)-valued gauge: exp of an anti-Hermitian affine field."""
    size = 4 * n + 4
    h0 = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    hs = rng.normal(size=(size, m, m)) + 1j * rng.normal(size=(size, m, m))
    h0 = scale * (h0 - dagger(h0)) / 2
    hs = scale * (hs - dagger(hs)) / 2

    def ev(hp):
        x = hp.base.real_coords()
        gen = h0 + np.einsum("j,jab->ab", x, hs)
        w, v = np.linalg.eigh(1j * gen)
        return (v * np.exp(-1j * w)) @ dagger(v)

    return GaugeMap(ev, "random-unitary")
