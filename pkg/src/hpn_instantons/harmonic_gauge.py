"""Analytic gauges by parallel transport, prepotentials, and their defining relations.

Everything here lives on the complexification: a point is a pair ``(Z, u)`` with
``Z`` a complex 2 x (2n+2) matrix standing for the independent coordinates
``z^{ia}`` and ``u`` in SL2(C).  On the real slice ``Z = z_matrix(p)``.  Functions
below accept batches, i.e. ``Z`` of shape (B, 2, N) and ``u`` of shape (B, 2, 2).

Transport is done in the holomorphic frame ``psi = [I; lambda]``, whose potential is
``B = K^{-1} lambda~ d lambda`` with ``K = I + lambda~ lambda``; the unitary-frame
gauge is recovered as ``g = K(Z)^{1/2} G K(Z0)^{-1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from .curvature import curvature_components, pm_components
from .diff import DiffEngine
from .errors import ConstraintViolation, FlatnessError, IntegrationError, OutOfCell
from .gauge import Core, core_potential_field
from .geometry import H_GEN, HarmonicPoint, TangentDirection, expm2, flow_step, inv2, x_of_z, z_matrix
from .quatlin import cmatrix_to_json

MAX_STEP = 1e-2
CELL_HALF_WIDTH = 0.5
H0_RANGE = 1.0
# step sizes for the first and the outer finite-difference levels
FD_INNER = 1e-3
FD_OUTER = 1e-2

Move = tuple  # ("z", "+"|"-", a) with a 1-based, or ("H", tag)


# ---------------------------------------------------------------- real-slice transport


def parallel_transport(
    A_field: Union[Core, Callable[[HarmonicPoint, TangentDirection], np.ndarray]],
    gauge_start: np.ndarray,
    start: HarmonicPoint,
    path: Sequence[tuple[TangentDirection, float]],
    max_step: float = MAX_STEP,
) -> np.ndarray:
    """Solve dg/dt = -A(gamma'(t)) g along consecutive flows with classical RK4."""
    if isinstance(A_field, Core):
        A_field = core_potential_field(A_field)
    g = np.array(gauge_start, dtype=complex)
    p = start
    for d, t in path:
        speed = float(np.linalg.norm(d.coeffs)) + (float(np.linalg.norm(d.fiber)) if d.fiber is not None else 0.0)
        steps = max(1, int(np.ceil(abs(t) * max(speed, 1.0) / max_step)))
        h = t / steps
        if steps > 10**7 or (t != 0 and abs(h) < 1e-14):
            raise IntegrationError("step underflow in transport")

        def rhs(q, gv):
            # along a flow the velocity at q is the direction evaluated at q
            dq = d if d.tag is None else _retag(d, q)
            return -np.asarray(A_field(q, dq)) @ gv

        for _ in range(steps):
            k1 = rhs(p, g)
            pm = flow_step(p, d, h / 2)
            k2 = rhs(pm, g + h / 2 * k1)
            k3 = rhs(pm, g + h / 2 * k2)
            pe = flow_step(p, d, h)
            k4 = rhs(pe, g + h * k3)
            g = g + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            p = pe
        if not np.all(np.isfinite(g)):
            raise IntegrationError("transport diverged")
    return g


def _retag(d: TangentDirection, q: HarmonicPoint) -> TangentDirection:
    from .geometry import invariant_vector_field

    return invariant_vector_field(d.tag, q)


# ---------------------------------------------------------------- complexified frames


def _batch(Z, u):
    Z = np.asarray(Z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    single = Z.ndim == 2
    if single:
        Z, u = Z[None], u[None]
    return Z, np.broadcast_to(u, Z.shape[:-2] + (2, 2)), single


def _sqrt_pair(K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Principal K^{1/2} and K^{-1/2} for a batch of diagonalizable matrices."""
    w, V = np.linalg.eig(K)
    Vinv = np.linalg.inv(V)
    s = np.sqrt(w)
    return (V * s[..., None, :]) @ Vinv, (V / s[..., None, :]) @ Vinv


def frame_data(core: Core, Z: np.ndarray):
    """psi = [I; lambda], psi~ = [I, lambda~], K = psi~ psi at each Z of a batch."""
    x = x_of_z(Z)
    lam = core.at_coords(x)
    lamt = core.tilde(x)
    m = core.m_eff
    eye = np.broadcast_to(np.eye(m), lam.shape[:-2] + (m, m))
    psi = np.concatenate([eye, lam], axis=-2)
    psit = np.concatenate([eye, lamt], axis=-1)
    K = eye + lamt @ lam
    return psi, psit, K, x


def holomorphic_potential(core: Core, Z: np.ndarray, W: np.ndarray) -> np.ndarray:
    """B(Z)[W] = K^{-1} lambda~ d lambda[W] for batches of points and directions."""
    x = x_of_z(Z)
    lam = core.at_coords(x)
    lamt = core.tilde(x)
    K = np.eye(core.m_eff) + lamt @ lam
    dlam = core.differential(x, x_of_z(W))
    return np.linalg.solve(K, lamt @ dlam)


def _rk4_segment(core: Core, Z: np.ndarray, W: np.ndarray, G: np.ndarray, steps: int) -> np.ndarray:
    h = 1.0 / steps
    # the potential is shared by stages at equal times, so two evaluations per step suffice
    b_start = holomorphic_potential(core, Z, W)
    for s in range(steps):
        t = s * h
        b_mid = holomorphic_potential(core, Z + (t + h / 2) * W, W)
        b_end = holomorphic_potential(core, Z + (t + h) * W, W)
        k1 = -b_start @ G
        k2 = -b_mid @ (G + h / 2 * k1)
        k3 = -b_mid @ (G + h / 2 * k2)
        k4 = -b_end @ (G + h * k3)
        G = G + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        b_start = b_end
    if not np.all(np.isfinite(G)):
        raise IntegrationError("transport diverged")
    return G


def active_columns(core: Core) -> list[int]:
    """0-based z-columns whose quaternion slot is in the core's mask."""
    cols = []
    for c in range(2 * core.n + 2):
        slot = c // 2
        if np.any(core.mask[4 * slot : 4 * slot + 4]):
            cols.append(c)
    return cols


def _apply_move(Z: np.ndarray, u: np.ndarray, move: Move, t: float):
    if move[0] == "z":
        _, sign, a = move
        col = u[..., :, 0] if sign == "+" else u[..., :, 1]
        Z2 = Z.copy()
        Z2[..., :, a - 1] += t * col
        return Z2, u
    if move[0] == "H":
        return Z, u @ expm2(t * H_GEN[move[1]])
    raise ValueError(f"unknown move {move!r}")


def batched_derivative(f, Z: np.ndarray, u: np.ndarray, move: Move, step: float) -> np.ndarray:
    """Central difference with one Richardson level of a batched field along a move."""
    ts = (step / 2, -step / 2, step, -step)
    Zs, us = zip(*(_apply_move(Z, u, move, t) for t in ts))
    B = Z.shape[0]
    vals = np.asarray(f(np.concatenate(Zs), np.concatenate([np.broadcast_to(v, Z.shape[:-2] + (2, 2)) for v in us])))
    vals = vals.reshape((4, B) + vals.shape[1:])
    c1 = (vals[0] - vals[1]) / step
    c2 = (vals[2] - vals[3]) / (2 * step)
    return (4 * c1 - c2) / 3


# ---------------------------------------------------------------- analytic gauge


@dataclass
class AnalyticGauge:
    core: Core
    reference: HarmonicPoint
    transport_order: tuple
    steps: int
    tol: float = 1e-6
    Z_ref: np.ndarray = field(init=False)

    def __post_init__(self):
        self.Z_ref = z_matrix(self.reference.base)

    def _transport(self, Z, u):
        """Return (G, Z0) with G the holomorphic-frame transport from Z0 to Z."""
        uinv = inv2(u)
        d = uinv @ (Z - self.Z_ref)
        Z0 = self.Z_ref + u[..., :, 0:1] * d[..., 0:1, :]
        G = np.broadcast_to(np.eye(self.core.m_eff, dtype=complex), Z.shape[:-2] + (self.core.m_eff,) * 2).copy()
        Zc = Z0
        for c in self.transport_order:
            W = np.zeros_like(Z)
            W[..., :, c] = d[..., 1, c][..., None] * u[..., :, 1]
            G = _rk4_segment(self.core, Zc, W, G, self.steps)
            Zc = Zc + W
        return G, Z0

    def gauge(self, Z, u) -> np.ndarray:
        """g(Z, u), batched or single."""
        Z, u, single = _batch(Z, u)
        G, Z0 = self._transport(Z, u)
        _, _, K, _ = frame_data(self.core, Z)
        _, _, K0, _ = frame_data(self.core, Z0)
        h, _ = _sqrt_pair(K)
        _, h0inv = _sqrt_pair(K0)
        g = h @ G @ h0inv
        return g[0] if single else g

    def frame(self, Z, u) -> np.ndarray:
        """Phi = xi g = psi(Z) G K(Z0)^{-1/2}."""
        Z, u, single = _batch(Z, u)
        G, Z0 = self._transport(Z, u)
        psi, _, _, _ = frame_data(self.core, Z)
        _, _, K0, _ = frame_data(self.core, Z0)
        _, h0inv = _sqrt_pair(K0)
        phi = psi @ G @ h0inv
        return phi[0] if single else phi

    def _left_factor(self, Z, u):
        """g^{-1} xi~ = K(Z0)^{1/2} G^{-1} K^{-1} psi~."""
        G, Z0 = self._transport(Z, u)
        _, psit, K, _ = frame_data(self.core, Z)
        _, _, K0, _ = frame_data(self.core, Z0)
        h0, _ = _sqrt_pair(K0)
        return h0 @ np.linalg.solve(G, np.linalg.solve(K, psit))

    def potential(self, Z, u, move: Move, step: float = FD_INNER) -> np.ndarray:
        """Transformed potential A'(X) = g^{-1} xi~ X.(xi g) along a move, batched."""
        Z, u, single = _batch(Z, u)
        out = self.potentials(Z, u, [move], step)[0]
        return out[0] if single else out

    def potentials(self, Z, u, moves: Sequence[Move], step: float = FD_INNER) -> list:
        """A'(X) for several moves with a single batched transport."""
        B = Z.shape[0]
        left = self._left_factor(Z, u)
        ts = (step / 2, -step / 2, step, -step)
        Zs, us = [], []
        for mv in moves:
            for t in ts:
                z2, u2 = _apply_move(Z, u, mv, t)
                Zs.append(z2)
                us.append(np.broadcast_to(u2, Z.shape[:-2] + (2, 2)))
        phi = self.frame(np.concatenate(Zs), np.concatenate(us))
        phi = phi.reshape((len(moves), 4, B) + phi.shape[1:])
        c1 = (phi[:, 0] - phi[:, 1]) / step
        c2 = (phi[:, 2] - phi[:, 3]) / (2 * step)
        return list(left @ ((4 * c1 - c2) / 3))

    # convenient fields
    def A_mm(self, Z, u):
        return self.potential(Z, u, ("H", "H--"))

    def A_pp(self, Z, u):
        return self.potential(Z, u, ("H", "H++"))

    def A_0(self, Z, u):
        return self.potential(Z, u, ("H", "H0"))

    def in_cell(self, hp: HarmonicPoint) -> bool:
        x = hp.base.real_coords()
        xr = self.reference.base.real_coords()
        if np.max(np.abs((x - xr)[self.core.mask]), initial=0.0) > CELL_HALF_WIDTH + 1e-12:
            return False
        v = inv2(self.reference.u) @ hp.u
        return float(np.max(np.abs(v - np.eye(2)))) <= np.expm1(H0_RANGE) + 1e-12

    def require_cell(self, hp: HarmonicPoint) -> None:
        if not self.in_cell(hp):
            raise OutOfCell("point lies outside the transport cell")


def _cell_steps(reference: HarmonicPoint) -> int:
    # |delta_a| <= |u^{-1}| |column of Z - Z_ref| <= e |u_ref^{-1}| (column change at most 1)
    bound = np.e * np.linalg.norm(inv2(reference.u), 2) * 1.0
    return int(np.ceil(bound / MAX_STEP))


def loop_holonomy(core: Core, Z, u, a: int, b: int, side: float = 0.2, steps: int = 40) -> float:
    """|hol - I| for the rectangle with sides along z^{-a}, z^{-b} (1-based) starting at Z."""
    Z, u, single = _batch(Z, u)
    m = core.m_eff
    G = np.broadcast_to(np.eye(m, dtype=complex), Z.shape[:-2] + (m, m)).copy()
    Zc = Z
    for col, sgn in ((a, 1), (b, 1), (a, -1), (b, -1)):
        W = np.zeros_like(Z)
        W[..., :, col - 1] = sgn * side * u[..., :, 1]
        G = _rk4_segment(core, Zc, W, G, steps)
        Zc = Zc + W
    _, _, K, _ = frame_data(core, Z)
    h, hinv = _sqrt_pair(K)
    hol = h @ G @ hinv
    res = np.max(np.abs(hol - np.eye(m)), axis=(-1, -2))
    return float(res[0]) if single else res


def analytic_gauge(
    core: Core,
    reference: HarmonicPoint,
    tol: float = 1e-6,
    order: Optional[Sequence[int]] = None,
    steps: Optional[int] = None,
) -> AnalyticGauge:
    """Build the analytic gauge by transport along z^{-a} lines from the transversal through the reference.

    ``order`` lists 1-based columns; columns the core does not depend on are skipped.
    """
    cols = active_columns(core)
    if order is None:
        order_c = tuple(cols)
    else:
        order_c = tuple(a - 1 for a in order if a - 1 in cols)
        if sorted(order_c) != cols:
            raise ValueError("order must be a permutation of the transported columns")
    Zr = z_matrix(reference.base)
    for i, a in enumerate(cols):
        for b in cols[i + 1 :]:
            hol = loop_holonomy(core, Zr, reference.u, a + 1, b + 1)
            if hol > 10 * tol:
                raise FlatnessError(f"holonomy {hol:.3e} in the (z-{a + 1}, z-{b + 1}) plane exceeds {10 * tol:.1e}")
    return AnalyticGauge(core, reference, order_c, steps or _cell_steps(reference), tol)


# ---------------------------------------------------------------- prepotentials


def _point_arrays(hps: Union[HarmonicPoint, Sequence[HarmonicPoint]]):
    if isinstance(hps, HarmonicPoint):
        hps = [hps]
    Z = np.array([z_matrix(h.base) for h in hps])
    u = np.array([h.u for h in hps])
    return Z, u


@dataclass
class PrepotentialSample:
    point: HarmonicPoint
    A_mm: np.ndarray
    A_pp: np.ndarray
    A_pa: list = field(default_factory=list)
    A_pa_direct: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "A_mm": cmatrix_to_json(self.A_mm),
            "A_pp": cmatrix_to_json(self.A_pp),
            "residuals": self.residuals,
        }


def prepotential_minus(ag: AnalyticGauge, hp: HarmonicPoint) -> np.ndarray:
    ag.require_cell(hp)
    Z, u = _point_arrays(hp)
    return ag.A_mm(Z, u)[0]


def prepotential_plus(ag: AnalyticGauge, hp: HarmonicPoint) -> PrepotentialSample:
    """A++ and A+a computed both as -d A++/dz^{-a} and directly."""
    ag.require_cell(hp)
    Z, u = _point_arrays(hp)
    N = Z.shape[-1]
    A_pa = [-batched_derivative(ag.A_pp, Z, u, ("z", "-", a), FD_OUTER)[0] for a in range(1, N + 1)]
    A_pa_direct = [v[0] for v in ag.potentials(Z, u, [("z", "+", a) for a in range(1, N + 1)])]
    sample = PrepotentialSample(hp, ag.A_mm(Z, u)[0], ag.A_pp(Z, u)[0], A_pa, A_pa_direct)
    sample.residuals["A_pa_two_ways"] = float(max(np.max(np.abs(x - y)) for x, y in zip(A_pa, A_pa_direct)))
    return sample


def vanishing_residuals(ag: AnalyticGauge, hps: Sequence[HarmonicPoint]) -> dict:
    """max |A'_0|, |A'_{-a}|, |A'_{+1}|, |A'_{+2}| over the given points."""
    Z, u = _point_arrays(hps)
    N = Z.shape[-1]
    moves = [("H", "H0"), ("z", "+", 1), ("z", "+", 2)] + [("z", "-", a) for a in range(1, N + 1)]
    vals = [float(np.max(np.abs(v))) for v in ag.potentials(Z, u, moves)]
    return {"A0": vals[0], "A+1": vals[1], "A+2": vals[2], "A-a": max(vals[3:])}


def homogeneity_residuals(ag: AnalyticGauge, hps: Sequence[HarmonicPoint]) -> dict:
    """H0 A-- + 2 A-- and H0 A++ - 2 A++."""
    Z, u = _point_arrays(hps)
    amm, app = ag.A_mm(Z, u), ag.A_pp(Z, u)
    h0_mm = batched_derivative(ag.A_mm, Z, u, ("H", "H0"), FD_OUTER)
    h0_pp = batched_derivative(ag.A_pp, Z, u, ("H", "H0"), FD_OUTER)
    return {
        "A--": float(np.max(np.abs(h0_mm + 2 * amm))),
        "A++": float(np.max(np.abs(h0_pp - 2 * app))),
    }


def forbidden_derivative_residual(ag: AnalyticGauge, hps: Sequence[HarmonicPoint]) -> float:
    """max over d/dz^{-a} (all a), d/dz^{+1}, d/dz^{+2} of |d A--|."""
    Z, u = _point_arrays(hps)
    N = Z.shape[-1]
    moves = [("z", "-", a) for a in range(1, N + 1)] + [("z", "+", 1), ("z", "+", 2)]
    return float(max(np.max(np.abs(batched_derivative(ag.A_mm, Z, u, mv, FD_OUTER))) for mv in moves))


def check_characterising(ag: AnalyticGauge, hps, tol: float = 1e-5) -> float:
    """max of |H-- A++ - H++ A-- + [A--, A++]| and |H0 A++ - 2 A++|."""
    Z, u = _point_arrays(hps)
    amm, app = ag.A_mm(Z, u), ag.A_pp(Z, u)
    hmm_app = batched_derivative(ag.A_pp, Z, u, ("H", "H--"), FD_OUTER)
    hpp_amm = batched_derivative(ag.A_mm, Z, u, ("H", "H++"), FD_OUTER)
    h0_app = batched_derivative(ag.A_pp, Z, u, ("H", "H0"), FD_OUTER)
    r1 = np.max(np.abs(hmm_app - hpp_amm + amm @ app - app @ amm))
    r2 = np.max(np.abs(h0_app - 2 * app))
    return float(max(r1, r2))


def check_curvature_relation(ag: AnalyticGauge, hps, tol: float = 1e-4) -> float:
    """Max relative residual of g^{-1} F(e_{+a}, e_{-b}) g = d^2 A++ / dz^{-a} dz^{-b}."""
    if isinstance(hps, HarmonicPoint):
        hps = [hps]
    Z, u = _point_arrays(hps)
    cols = [c + 1 for c in active_columns(ag.core)]
    worst = 0.0
    g = ag.gauge(Z, u)
    ginv = np.linalg.inv(g)
    pms = [pm_components(curvature_components(ag.core, hp)) for hp in hps]
    for a in cols:
        da = lambda z, v, a=a: batched_derivative(ag.A_pp, z, v, ("z", "-", a), FD_OUTER)
        for b in cols:
            rhs = batched_derivative(da, Z, u, ("z", "-", b), FD_OUTER)
            lhs = ginv @ np.array([pm[0, a - 1, 1, b - 1] for pm in pms]) @ g
            scale = max(1.0, float(np.max(np.abs(lhs))))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


# ---------------------------------------------------------------- equivalence


Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def ghat_constraint_residual(ghat: Field, Z: np.ndarray, u: np.ndarray, step: float = FD_INNER) -> float:
    N = Z.shape[-1]
    moves = [("H", "H0")] + [("z", "-", a) for a in range(1, N + 1)] + [("z", "+", 1), ("z", "+", 2)]
    return float(max(np.max(np.abs(batched_derivative(ghat, Z, u, mv, step))) for mv in moves))


def _expm_batch(a: np.ndarray) -> np.ndarray:
    return np.array([expm(m) for m in a.reshape((-1,) + a.shape[-2:])]).reshape(a.shape)


def check_equivalence(A_mm_1: Field, A_mm_2: Field, ghat: Field, hps, tol: float = 1e-6) -> bool:
    """True iff A_mm_2 = exp(-ghat) (A_mm_1 + H-- ghat) exp(ghat) at all points.

    Raises ConstraintViolation if ghat is not annihilated by H0, d/dz^{-a}, d/dz^{+1}, d/dz^{+2}.
    """
    Z, u = _point_arrays(hps)
    cres = ghat_constraint_residual(ghat, Z, u)
    if cres > tol:
        raise ConstraintViolation(f"ghat violates its constraints (residual {cres:.3e})")
    gh = np.asarray(ghat(Z, u))
    hmm = batched_derivative(ghat, Z, u, ("H", "H--"), FD_INNER)
    e_minus = _expm_batch(-gh)
    e_plus = _expm_batch(gh)
    want = e_minus @ (np.asarray(A_mm_1(Z, u)) + hmm) @ e_plus
    got = np.asarray(A_mm_2(Z, u))
    return bool(np.max(np.abs(want - got)) < tol)


def z_pm_batch(Z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Rows z^{+a}, z^{-a} for batches."""
    return inv2(u) @ Z
