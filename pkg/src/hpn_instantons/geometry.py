"""Cone chart of H^{n+1} minus the origin, harmonic coordinates, and invariant vector fields.

Conventions
-----------
* ``zeta`` has length ``2n+2`` ordered ``(z0, z0', z1, z1', ...)``; quaternion slot
  ``alpha`` is ``zeta[2 alpha] + zeta[2 alpha + 1] j``.  Slot 0 is ``q0 = (eta, zeta)``,
  slots ``1..n`` are ``r^a = q^a (q^0)^{-1}``.
* Real coordinates ``x`` have length ``4n+4`` with ``x[2c] = Re zeta[c]`` and
  ``x[2c+1] = Im zeta[c]``.
* The 2 x (2n+2) matrix ``Z`` of coordinates ``z^{ia}`` has first row ``zeta`` and second
  row ``(-conj zeta[c+1], conj zeta[c])`` on each pair.
* ``u`` is a 2x2 matrix with columns ``u_+``, ``u_-``; ``z^{+-} = u^{-1} Z`` and
  ``d/dz^{+-a} = u^i_{+-} d/dz^{ia}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ChartError, ShapeError
from .quatlin import Quaternion, complex_from_json, complex_to_json, cmatrix_from_json, cmatrix_to_json

TAGS = ("H0", "H++", "H--", "G_D", "G0", "G1", "G2")

# sl2 basis acting on u from the right
H_GEN = {
    "H0": np.array([[1, 0], [0, -1]], dtype=complex),
    "H++": np.array([[0, 1], [0, 0]], dtype=complex),
    "H--": np.array([[0, 0], [1, 0]], dtype=complex),
}
# su2 basis, used for the u-part of the G fields
SU2_GEN = {
    "G0": np.array([[1j, 0], [0, -1j]]),
    "G1": np.array([[0, 1], [-1, 0]], dtype=complex),
    "G2": np.array([[0, 1j], [1j, 0]]),
}
# linear holomorphic generators on (eta, zeta) = slot 0
SLOT0_GEN = {
    "G_D": np.eye(2, dtype=complex),
    "G0": 1j * np.eye(2),
    "G1": np.array([[0, -1], [0, 0]], dtype=complex),
    "G2": np.array([[0, 1j], [0, 0]]),
}


def expm2(a: np.ndarray) -> np.ndarray:
    """Exponential of (a batch of) 2x2 complex matrices in closed form."""
    a = np.asarray(a, dtype=complex)
    tr = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    b = a - tr[..., None, None] * np.eye(2)
    s = np.sqrt(-(b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]))
    small = np.abs(s) < 1e-8
    s_safe = np.where(small, 1.0, s)
    ch = np.where(small, 1 + s * s / 2, np.cosh(s_safe))
    sh = np.where(small, 1 + s * s / 6, np.sinh(s_safe) / s_safe)
    out = ch[..., None, None] * np.eye(2) + sh[..., None, None] * b
    return np.exp(tr)[..., None, None] * out


@dataclass(frozen=True)
class ConePoint:
    n: int
    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=complex).copy()
        if self.n < 1:
            raise ShapeError("n must be at least 1")
        if z.shape != (2 * self.n + 2,):
            raise ShapeError(f"zeta must have length {2 * self.n + 2}, got shape {z.shape}")
        if z[0] == 0 and z[1] == 0:
            raise ChartError("the slot-0 quaternion vanishes, point outside the chart")
        z.flags.writeable = False
        object.__setattr__(self, "zeta", z)

    @classmethod
    def from_real(cls, x: np.ndarray) -> "ConePoint":
        x = np.asarray(x, dtype=float)
        return cls(len(x) // 4 - 1, x[0::2] + 1j * x[1::2])

    def real_coords(self) -> np.ndarray:
        out = np.empty(4 * self.n + 4)
        out[0::2] = self.zeta.real
        out[1::2] = self.zeta.imag
        return out

    def quaternion(self, slot: int) -> Quaternion:
        return Quaternion.from_complex_pair(complex(self.zeta[2 * slot]), complex(self.zeta[2 * slot + 1]))

    def to_json(self) -> dict:
        return {"n": self.n, "zeta": [complex_to_json(v) for v in self.zeta]}

    @classmethod
    def from_json(cls, obj: dict) -> "ConePoint":
        return cls(int(obj["n"]), np.array([complex_from_json(v) for v in obj["zeta"]]))


@dataclass(frozen=True)
class HarmonicPoint:
    base: ConePoint
    u: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).copy()
        if u.shape != (2, 2):
            raise ShapeError("u must be 2x2")
        det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
        if abs(det - 1) > 1e-12 * max(1.0, float(np.max(np.abs(u))) ** 2):
            raise ShapeError(f"det u = {det} differs from 1")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.base.n

    def to_json(self) -> dict:
        return {"base": self.base.to_json(), "u": cmatrix_to_json(self.u)}

    @classmethod
    def from_json(cls, obj: dict) -> "HarmonicPoint":
        return cls(ConePoint.from_json(obj["base"]), cmatrix_from_json(obj["u"]))


@dataclass(frozen=True)
class TangentDirection:
    """A complex tangent vector at a harmonic point.

    ``coeffs`` are complex weights on the real coordinate vectors; ``fiber`` is an
    optional 2x2 generator ``E`` acting by ``du = u E``; ``zeta_gen`` is an optional
    2x2 generator ``K`` of a holomorphic linear field on slot 0 (used for exact flows).
    """

    coeffs: np.ndarray
    fiber: Optional[np.ndarray] = None
    zeta_gen: Optional[np.ndarray] = None
    tag: Optional[str] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.tag is not None and self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")

    @property
    def is_base(self) -> bool:
        return self.fiber is None or not np.any(self.fiber)

    def __add__(self, other: "TangentDirection") -> "TangentDirection":
        fib = _add_opt(self.fiber, other.fiber)
        return TangentDirection(self.coeffs + other.coeffs, fib, None, None)

    def scaled(self, s: complex) -> "TangentDirection":
        fib = None if self.fiber is None else s * self.fiber
        return TangentDirection(s * self.coeffs, fib, None, None)


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


@dataclass(frozen=True)
class FrameSpec:
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


def chart_from_quaternions(qs: Sequence[Quaternion]) -> ConePoint:
    qs = list(qs)
    if len(qs) < 2:
        raise ShapeError("need at least two quaternions")
    q0 = qs[0]
    if q0.norm2() == 0.0:
        raise ChartError("q0 = 0 lies outside the chart")
    inv = q0.inverse()
    parts = [q0.complex_pair()]
    for q in qs[1:]:
        parts.append((q * inv).complex_pair())
    return ConePoint(len(qs) - 1, np.array([c for pair in parts for c in pair]))


def z_from_zeta(zeta: np.ndarray) -> np.ndarray:
    """Batched z-matrix: (..., 2n+2) -> (..., 2, 2n+2)."""
    zeta = np.asarray(zeta, dtype=complex)
    row2 = np.empty_like(zeta)
    row2[..., 0::2] = -np.conj(zeta[..., 1::2])
    row2[..., 1::2] = np.conj(zeta[..., 0::2])
    return np.stack([zeta, row2], axis=-2)


def z_matrix(p: ConePoint) -> np.ndarray:
    return z_from_zeta(p.zeta)


def x_of_z(Z: np.ndarray) -> np.ndarray:
    """Holomorphic extension of the real coordinates as functions of Z, batched.

    On the real slice (Z = z_matrix(p)) this returns ``p.real_coords()``.
    """
    Z = np.asarray(Z, dtype=complex)
    zeta = Z[..., 0, :]
    zbar = np.empty_like(zeta)
    zbar[..., 0::2] = Z[..., 1, 1::2]
    zbar[..., 1::2] = -Z[..., 1, 0::2]
    shape = zeta.shape[:-1] + (2 * zeta.shape[-1],)
    x = np.empty(shape, dtype=complex)
    x[..., 0::2] = 0.5 * (zeta + zbar)
    x[..., 1::2] = (zeta - zbar) / 2j
    return x


def coords_from_z(Z: np.ndarray) -> ConePoint:
    """Recover a real-slice cone point from its z-matrix."""
    Z = np.asarray(Z, dtype=complex)
    p = ConePoint((Z.shape[1] - 2) // 2, Z[0])
    if np.max(np.abs(z_matrix(p) - Z)) > 1e-12 * max(1.0, float(np.max(np.abs(Z)))):
        raise ChartError("matrix is not on the real slice")
    return p


def inv2(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    det = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
    out = np.empty_like(u)
    out[..., 0, 0] = u[..., 1, 1]
    out[..., 1, 1] = u[..., 0, 0]
    out[..., 0, 1] = -u[..., 0, 1]
    out[..., 1, 0] = -u[..., 1, 0]
    return out / det[..., None, None]


def z_pm(hp: HarmonicPoint) -> np.ndarray:
    """Rows ``z^{+a}`` and ``z^{-a}``."""
    return inv2(hp.u) @ z_matrix(hp.base)


def coord_jacobian(n: int) -> np.ndarray:
    """Constant complex Jacobian J[(i,a), k] = d z^{ia} / d x_k, rows ordered (i, a) row-major."""
    size = 4 * n + 4
    eye = np.eye(size)
    cols = []
    for k in range(size):
        # z is real-linear in x, so Z(e_k) - Z(0) is the k-th partial
        zeta = eye[k][0::2] + 1j * eye[k][1::2]
        cols.append(z_from_zeta(zeta).reshape(-1))
    return np.array(cols).T


_INV_JAC_CACHE: dict[int, np.ndarray] = {}


def inverse_coord_jacobian(n: int) -> np.ndarray:
    """Columns are the coordinate vectors d/dz^{ia} over the real basis."""
    if n not in _INV_JAC_CACHE:
        _INV_JAC_CACHE[n] = np.linalg.inv(coord_jacobian(n))
    return _INV_JAC_CACHE[n]


def z_direction(i: int, a: int, n: int) -> TangentDirection:
    """d/dz^{ia}, with i in {1, 2} and a in 1..2n+2."""
    if i not in (1, 2) or not 1 <= a <= 2 * n + 2:
        raise IndexError(f"index ({i}, {a}) out of range")
    col = (i - 1) * (2 * n + 2) + (a - 1)
    return TangentDirection(inverse_coord_jacobian(n)[:, col])


def complex_direction(a: int, sign: str, hp: HarmonicPoint) -> TangentDirection:
    n = hp.n
    if not 1 <= a <= 2 * n + 2:
        raise IndexError(f"index {a} outside 1..{2 * n + 2}")
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    col = 0 if sign == "+" else 1
    jinv = inverse_coord_jacobian(n)
    m = 2 * n + 2
    coeffs = hp.u[0, col] * jinv[:, a - 1] + hp.u[1, col] * jinv[:, m + a - 1]
    return TangentDirection(coeffs)


def real_direction(k: int, n: int) -> TangentDirection:
    c = np.zeros(4 * n + 4, dtype=complex)
    c[k] = 1.0
    return TangentDirection(c)


def holomorphic_slot0_coeffs(K: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Real-basis coefficients of the holomorphic field (K q0) d/dq0 on slot 0."""
    v = K @ zeta[:2]
    c = np.zeros(2 * len(zeta), dtype=complex)
    c[0:4:2] = 0.5 * v
    c[1:4:2] = -0.5j * v
    return c


def invariant_vector_field(tag: str, hp: HarmonicPoint) -> TangentDirection:
    if tag not in TAGS:
        raise ValueError(f"unknown tag {tag!r}")
    size = 4 * hp.n + 4
    if tag in H_GEN:
        return TangentDirection(np.zeros(size, dtype=complex), H_GEN[tag], None, tag)
    K = SLOT0_GEN[tag]
    coeffs = holomorphic_slot0_coeffs(K, hp.base.zeta)
    fiber = SU2_GEN.get(tag)
    return TangentDirection(coeffs, fiber, K, tag)


def flow_step(hp: HarmonicPoint, d: TangentDirection, t: float) -> HarmonicPoint:
    """Flow of ``d`` for time ``t``.

    Tagged fields use their exact flows.  Untagged directions need real
    coefficients and move along straight lines in the real coordinates.
    """
    zeta = hp.base.zeta
    u = hp.u
    if d.fiber is not None:
        u = u @ expm2(t * np.asarray(d.fiber))
    if d.zeta_gen is not None:
        zeta = zeta.copy()
        zeta[:2] = expm2(t * np.asarray(d.zeta_gen)) @ zeta[:2]
        base = ConePoint(hp.n, zeta)
    elif np.any(d.coeffs):
        if np.max(np.abs(d.coeffs.imag)) > 0:
            raise ValueError("straight-line flows need real coefficients")
        base = ConePoint.from_real(hp.base.real_coords() + t * d.coeffs.real)
    else:
        base = hp.base
    return HarmonicPoint(base, u)


def _state(hp: HarmonicPoint) -> np.ndarray:
    return np.concatenate([hp.base.zeta, hp.u.reshape(-1)])


def flow_commutator(hp: HarmonicPoint, tag_x: str, tag_y: str, t: float = 1e-4) -> np.ndarray:
    """Finite-difference estimate of [X, Y] at ``hp`` as a velocity in (zeta, u).

    Uses the group commutator of flows with one Richardson level.
    """

    def phi(s):
        p = hp
        for tag, sgn in ((tag_x, 1), (tag_y, 1), (tag_x, -1), (tag_y, -1)):
            p = flow_step(p, invariant_vector_field(tag, p), sgn * s)
        return (_state(p) - _state(hp)) / (s * s)

    return 2 * phi(t / 2) - phi(t)


def field_velocity(combo: dict[str, complex], hp: HarmonicPoint) -> np.ndarray:
    """Velocity in (zeta, u) of a complex linear combination of invariant fields."""
    vel = np.zeros(2 * hp.n + 2 + 4, dtype=complex)
    for tag, coef in combo.items():
        if tag in SLOT0_GEN:
            vel[:2] += coef * (SLOT0_GEN[tag] @ hp.base.zeta[:2])
        gen = H_GEN.get(tag, SU2_GEN.get(tag))
        if gen is not None:
            vel[-4:] += coef * (hp.u @ gen).reshape(-1)
    return vel


# Tabulated brackets; each right side is a combination of fields.
BRACKET_TABLE: list[tuple[str, str, dict[str, complex]]] = [
    ("G0", "G1", {"G2": 1}),
    ("G0", "G2", {"G1": -1}),
    ("G1", "G2", {"G0": 1}),
    ("H0", "H++", {"H++": 2}),
    ("H0", "H--", {"H--": -2}),
    ("H++", "H--", {"H0": 1}),
    ("G0", "H0", {}),
    ("G0", "H++", {"H++": 2j}),
    ("G1", "H0", {"H++": -2, "H--": -2}),
    ("G1", "H++", {"H0": 1}),
    ("G1", "H--", {"H0": 1}),
    ("G2", "H0", {"H++": -2j, "H--": 2j}),
    ("G2", "H++", {"H0": -1j}),
    ("G2", "H--", {"H0": 1j}),
] + [("G_D", t, {}) for t in ("G0", "G1", "G2", "H0", "H++", "H--")]

AMBIGUOUS = ("G0", "H--")


@dataclass
class BracketEntry:
    left: str
    right: str
    expected: dict
    max_residual: float
    passed: bool


@dataclass
class BracketReport:
    entries: list[BracketEntry]
    ambiguous_sign: str
    ambiguous_residual: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[BracketEntry]:
        return [e for e in self.entries if not e.passed]

    def to_json(self) -> dict:
        return {
            "tol": self.tol,
            "samples": self.samples,
            "entries": [
                {
                    "bracket": f"[{e.left},{e.right}]",
                    "expected": {k: complex_to_json(complex(v)) for k, v in e.expected.items()},
                    "max_residual": e.max_residual,
                    "pass": e.passed,
                }
                for e in self.entries
            ],
            "G0_Hmm_sign": self.ambiguous_sign,
            "G0_Hmm_residual": self.ambiguous_residual,
            "pass": self.passed,
        }


def random_sl2(rng: np.random.Generator, bound: float = 0.5) -> np.ndarray:
    coef = rng.uniform(-bound, bound, size=3) + 1j * rng.uniform(-bound, bound, size=3)
    gen = coef[0] * H_GEN["H0"] + coef[1] * H_GEN["H++"] + coef[2] * H_GEN["H--"]
    return expm2(gen)


def random_harmonic_point(
    rng: np.random.Generator, n: int, box: float = 1.0, u_bound: float = 0.5
) -> HarmonicPoint:
    """Slot 0 near (1, 0); remaining coordinates uniform in [-box, box]."""
    zeta = rng.uniform(-box, box, size=2 * n + 2) + 1j * rng.uniform(-box, box, size=2 * n + 2)
    zeta[0] = 1.0 + 0.5 * zeta[0] / max(box, 1e-300)
    zeta[1] = 0.5 * zeta[1] / max(box, 1e-300)
    return HarmonicPoint(ConePoint(n, zeta), random_sl2(rng, u_bound))


def verify_bracket_table(
    tol: float = 1e-6,
    samples: int = 50,
    seed: int = 0,
    ns: Sequence[int] = (1, 2),
    t: float = 1e-4,
) -> BracketReport:
    rng = np.random.default_rng(seed)
    points = [random_harmonic_point(rng, ns[i % len(ns)]) for i in range(samples)]
    entries = []
    for left, right, rhs in BRACKET_TABLE:
        worst = 0.0
        for hp in points:
            got = flow_commutator(hp, left, right, t)
            want = field_velocity(rhs, hp)
            worst = max(worst, float(np.max(np.abs(got - want))))
        entries.append(BracketEntry(left, right, rhs, worst, worst < tol))
    # the sign of [G0, H--] = +-2i H-- is measured, not assumed
    res = {}
    for sign, coef in (("+", 2j), ("-", -2j)):
        res[sign] = max(
            float(np.max(np.abs(flow_commutator(hp, *AMBIGUOUS, t) - field_velocity({"H--": coef}, hp))))
            for hp in points
        )
    sign = min(res, key=res.get)
    coef = 2j if sign == "+" else -2j
    entries.append(BracketEntry(*AMBIGUOUS, {"H--": coef}, res[sign], res[sign] < tol))
    return BracketReport(entries, sign, res[sign], tol, samples)


def strongly_adapted_vertical_frame(
    hp: HarmonicPoint, spec: FrameSpec = FrameSpec()
) -> tuple[TangentDirection, TangentDirection, TangentDirection, TangentDirection]:
    """Return (e_{+1}, e_{+2}, e_{-1}, e_{-2})."""
    eta, zet = hp.base.zeta[0], hp.base.zeta[1]
    r = np.sqrt(abs(eta) ** 2 + abs(zet) ** 2)
    if r == 0:
        raise ChartError("frame undefined at eta = zeta = 0")
    size = 4 * hp.n + 4
    pref = 1.0 / (spec.kappa * r)

    def holo(v_eta, v_zeta):
        c = np.zeros(size, dtype=complex)
        c[0], c[1] = 0.5 * v_eta, -0.5j * v_eta
        c[2], c[3] = 0.5 * v_zeta, -0.5j * v_zeta
        return c

    f11 = pref * holo(eta, zet)
    f12 = pref * holo(-zet, eta)
    # conjugate vector fields: complex-conjugate coefficients on the real basis
    f21, f22 = np.conj(f11), np.conj(f12)
    u = hp.u
    e = [
        u[0, 0] * f11 + u[1, 0] * f21,
        u[0, 0] * f12 + u[1, 0] * f22,
        u[0, 1] * f11 + u[1, 1] * f21,
        u[0, 1] * f12 + u[1, 1] * f22,
    ]
    return tuple(TangentDirection(c) for c in e)


