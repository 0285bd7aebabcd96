"""ADHM-type matrix data on HP^n and the cores they generate.

The field is ``nu(r) = A_0 + sum_a A_a blockdiag_k(M(r^a))`` with ``A_a`` quaternionic
m x k matrices (complex 2m x 2k) and ``r^a`` the quaternion in chart slot ``a``.
The core is ``lambda = -nu^dagger``; it never depends on slot 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ChartError, ConstraintViolation, ParseError, ShapeError
from .gauge import Core, linear_core
from .geometry import ConePoint
from .quatlin import BASIS_MATRICES, QuatMatrix, Quaternion, block_residual, dagger


@dataclass(frozen=True)
class AdhmData:
    n: int
    k: int
    m: int
    A: tuple

    def __post_init__(self):
        mats = tuple(a if isinstance(a, QuatMatrix) else QuatMatrix(np.asarray(a)) for a in self.A)
        object.__setattr__(self, "A", mats)
        if self.n < 1 or self.k < 1 or self.m < 1:
            raise ShapeError("n, k, m must be positive")
        if len(mats) != self.n + 1:
            raise ShapeError(f"expected {self.n + 1} matrices, got {len(mats)}")
        for i, a in enumerate(mats):
            if (a.qrows, a.qcols) != (self.m, self.k):
                raise ShapeError(f"matrix {i} has shape {a.qrows}x{a.qcols}, expected {self.m}x{self.k}")

    def complexified(self) -> list[np.ndarray]:
        return [a.complexify() for a in self.A]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "matrices": [{"index": i, "rows": a.to_json()} for i, a in enumerate(self.A)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AdhmData":
        return parse_adhm(obj)


def parse_adhm(obj) -> AdhmData:
    if not isinstance(obj, dict):
        raise ParseError("top level must be a JSON object")
    for key in ("n", "k", "m", "matrices"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}")
    try:
        n, k, m = int(obj["n"]), int(obj["k"]), int(obj["m"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"n, k, m must be integers: {exc}") from None
    mats = obj["matrices"]
    if not isinstance(mats, list):
        raise ParseError("'matrices' must be a list")
    slots: dict[int, np.ndarray] = {}
    for pos, entry in enumerate(mats):
        if not isinstance(entry, dict) or "rows" not in entry:
            raise ParseError(f"matrices[{pos}]: missing key 'rows'")
        idx = int(entry.get("index", pos))
        rows = entry["rows"]
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise ParseError(f"matrices[{pos}].rows must be a non-empty list of lists")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ShapeError(f"matrices[{pos}] has ragged rows")
        data = np.zeros((len(rows), widths.pop(), 4))
        for i, row in enumerate(rows):
            for j, q in enumerate(row):
                try:
                    data[i, j] = Quaternion.from_json(q).as_array()
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"matrices[{pos}].rows[{i}][{j}]: bad quaternion ({exc})") from None
        if idx in slots:
            raise ParseError(f"duplicate matrix index {idx}")
        slots[idx] = data
    if sorted(slots) != list(range(len(slots))):
        raise ParseError(f"matrix indices must be 0..{len(slots) - 1}")
    shapes = {v.shape for v in slots.values()}
    if len(shapes) != 1:
        raise ShapeError(f"matrices of mixed shapes: {sorted(s[:2] for s in shapes)}")
    return AdhmData(n, k, m, tuple(QuatMatrix(slots[i]) for i in range(len(slots))))


def load_adhm(path) -> AdhmData:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_adhm(obj)


def save_adhm(data: AdhmData, path) -> None:
    Path(path).write_text(json.dumps(data.to_json(), indent=2) + "\n")


@dataclass
class ValidationReport:
    reality_residuals: list
    commutation_residuals: dict
    realness_residual: float
    tol: float
    valid: bool = field(init=False)

    def __post_init__(self):
        worst = max([*self.reality_residuals, *self.commutation_residuals.values(), 0.0])
        self.valid = bool(worst < self.tol)

    @property
    def max_residual(self) -> float:
        return float(max([*self.reality_residuals, *self.commutation_residuals.values(), 0.0]))

    def to_json(self) -> dict:
        return {
            "reality_residuals": self.reality_residuals,
            "commutation_residuals": {f"{a},{b}": v for (a, b), v in self.commutation_residuals.items()},
            "realness_residual": self.realness_residual,
            "max_residual": self.max_residual,
            "tol": self.tol,
            "valid": self.valid,
        }


def quaternion_imaginary_norm(m: np.ndarray) -> float:
    """Norm of the imaginary quaternion parts of a block-quaternionic complex matrix."""
    p = m[0::2, 0::2]
    r = m[1::2, 0::2]
    # block [[z1, -conj z2], [z2, conj z1]]: Im z1 and z2 are the imaginary parts
    return float(np.sqrt(np.sum(p.imag**2) + np.sum(np.abs(r) ** 2) + block_residual(m) ** 2))


def validate(data: AdhmData, tol: float = 1e-10, samples: int = 8, seed: int = 0) -> ValidationReport:
    mats = data.complexified()
    reality = [quaternion_imaginary_norm(a @ dagger(a)) for a in mats]
    comm = {}
    for a in range(len(mats)):
        for b in range(a + 1, len(mats)):
            comm[(a, b)] = float(np.linalg.norm(mats[a] @ dagger(mats[b]) - mats[b] @ dagger(mats[a])))
    rng = np.random.default_rng(seed)
    realness = 0.0
    for _ in range(samples):
        p = _random_cone_point(rng, data.n)
        nu = nu_at(data, p)
        realness = max(realness, quaternion_imaginary_norm(np.eye(2 * data.k) + dagger(nu) @ nu))
    return ValidationReport(reality, comm, realness, tol)


def _random_cone_point(rng: np.random.Generator, n: int, box: float = 1.0) -> ConePoint:
    z = rng.uniform(-box, box, 2 * n + 2) + 1j * rng.uniform(-box, box, 2 * n + 2)
    z[0] = 1.0
    return ConePoint(n, z)


def nu_coefficients(data: AdhmData) -> tuple[np.ndarray, np.ndarray]:
    """``nu(x) = C0 + sum_j x_j C[j]`` over the real coordinates."""
    mats = data.complexified()
    size = 4 * data.n + 4
    cs = np.zeros((size, 2 * data.m, 2 * data.k), dtype=complex)
    eye_k = np.eye(data.k)
    for a in range(1, data.n + 1):
        for c in range(4):
            cs[4 * a + c] = mats[a] @ np.kron(eye_k, BASIS_MATRICES[c])
    return mats[0].astype(complex), cs


def nu_at(data: AdhmData, p: ConePoint) -> np.ndarray:
    if p.n != data.n:
        raise ChartError(f"point has n={p.n}, data has n={data.n}")
    c0, cs = nu_coefficients(data)
    return c0 + np.einsum("j,jab->ab", p.real_coords(), cs)


def core_from_adhm(data: AdhmData) -> Core:
    c0, cs = nu_coefficients(data)
    lam0 = -dagger(c0)
    lams = -np.conj(np.swapaxes(cs, -1, -2))
    mask = np.zeros(4 * data.n + 4, dtype=bool)
    mask[4:] = True
    return linear_core(data.n, lam0, lams, mask, name=f"adhm(n={data.n},k={data.k},m={data.m})")


def _qmat(entries) -> QuatMatrix:
    return QuatMatrix(np.asarray(entries, dtype=float))


def one_instanton(n: int, center: Optional[Sequence[Quaternion]] = None, scale: float = 1.0) -> AdhmData:
    """k = m = 1 data with nu(r) = scale - sum_a c_a + sum_a r^a.

    The algebraic conditions force ``sum_a c_a`` to be real.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    center = list(center) if center is not None else [Quaternion()] * n
    if len(center) != n:
        raise ShapeError(f"center needs {n} quaternions")
    shift = Quaternion()
    for c in center:
        shift = shift + c
    if max(abs(shift.x), abs(shift.y), abs(shift.z)) > 1e-14:
        raise ConstraintViolation("the summed center must be real for the data to satisfy the algebraic conditions")
    a0 = _qmat([[[scale - shift.w, 0, 0, 0]]])
    ident = _qmat([[[1.0, 0, 0, 0]]])
    return AdhmData(n, 1, 1, (a0,) + (ident,) * n)


def perturb(data: AdhmData, epsilon: float, seed: int) -> AdhmData:
    """Add a seeded random quaternionic matrix of norm ``epsilon`` to one of the matrices."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon == 0:
        return data
    rng = np.random.default_rng(seed)
    idx = int(rng.integers(0, data.n + 1))
    delta = rng.normal(size=(data.m, data.k, 4))
    delta *= epsilon / np.linalg.norm(delta)
    mats = list(data.A)
    mats[idx] = QuatMatrix(mats[idx].data + delta)
    return AdhmData(data.n, data.k, data.m, tuple(mats))


def _random_unit_quaternion(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_valid_family(
    n: int, k: int, m: int, rng: np.random.Generator, scales: Optional[Sequence[float]] = None
) -> AdhmData:
    """A_a = p D_a O with p a unit quaternion, D_a real diagonal, O real with orthonormal rows (m <= k).

    Then A_a A_b^dagger = p D_a D_b conj(p) is real and symmetric in (a, b).
    """
    if m > k:
        raise ShapeError("this family needs m <= k")
    p = _random_unit_quaternion(rng)
    o = np.linalg.qr(rng.normal(size=(k, m)))[0].T  # m x k, orthonormal rows
    if scales is None:
        scales = rng.uniform(0.5, 1.5, size=n + 1)
    mats = []
    for a in range(n + 1):
        real = np.diag(scales[a] * rng.uniform(0.8, 1.2, size=m)) @ o
        mats.append(QuatMatrix(real[:, :, None] * p[None, None, :]))
    return AdhmData(n, k, m, tuple(mats))


def negative_control_base() -> AdhmData:
    """Valid data on which single-matrix perturbations are most visible among the families we tried."""
    return random_valid_family(2, 3, 3, np.random.default_rng(7), scales=[0.0, 0.3, 0.3])


def single_matrix_family(n: int, k: int, m: int, rng: np.random.Generator) -> AdhmData:
    """Only A_0 is nonzero: A_0 = p R with R real, so A_0 A_0^dagger is real."""
    p = _random_unit_quaternion(rng)
    real = rng.normal(size=(m, k))
    mats = [QuatMatrix(real[:, :, None] * p[None, None, :])]
    mats += [QuatMatrix.zeros(m, k)] * n
    return AdhmData(n, k, m, tuple(mats))
