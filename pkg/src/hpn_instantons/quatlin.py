"""Quaternions, their 2x2 complex representation, and small dense linear algebra.

A quaternion ``q = w + x i + y j + z k`` is written as a complex pair
``q = z1 + z2 j`` with ``z1 = w + i x`` and ``z2 = y + i z``.  The matrix of
right multiplication by ``q`` on ``H = C^2`` is

    M(q) = [[z1, -conj(z2)],
            [z2,  conj(z1)]]

so that ``M(a) @ M(b) == M(b * a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NotPositiveDefinite, NotQuaternionic, ShapeError

JACOBI_THRESHOLD = 1e-13


@dataclass(frozen=True)
class Quaternion:
    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_complex_pair(cls, z1: complex, z2: complex) -> "Quaternion":
        return cls(z1.real, z1.imag, z2.real, z2.imag)

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        w, x, y, z = (float(v) for v in arr)
        return cls(w, x, y, z)

    def complex_pair(self) -> tuple[complex, complex]:
        return complex(self.w, self.x), complex(self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w + other.w, self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - other.w, self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            a1, b1, c1, d1 = self.w, self.x, self.y, self.z
            a2, b2, c2, d2 = other.w, other.x, other.y, other.z
            return Quaternion(
                a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
            )
        s = float(other)
        return Quaternion(self.w * s, self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm2(self) -> float:
        return self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroDivisionError("quaternion 0 has no inverse")
        c = self.conj()
        return Quaternion(c.w / n2, c.x / n2, c.y / n2, c.z / n2)

    def to_json(self) -> dict:
        return {"w": self.w, "x": self.x, "y": self.y, "z": self.z}

    @classmethod
    def from_json(cls, obj: dict) -> "Quaternion":
        return cls(float(obj["w"]), float(obj["x"]), float(obj["y"]), float(obj["z"]))


ONE = Quaternion(1.0, 0.0, 0.0, 0.0)
QI = Quaternion(0.0, 1.0, 0.0, 0.0)
QJ = Quaternion(0.0, 0.0, 1.0, 0.0)
QK = Quaternion(0.0, 0.0, 0.0, 1.0)

# M(1), M(i), M(j), M(k); M is real-linear in (w, x, y, z).
BASIS_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[1j, 0], [0, -1j]],
        [[0, -1], [1, 0]],
        [[0, 1j], [1j, 0]],
    ],
    dtype=complex,
)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def embed(q: Quaternion) -> np.ndarray:
    z1, z2 = q.complex_pair()
    return np.array([[z1, -np.conj(z2)], [z2, np.conj(z1)]], dtype=complex)


def embed_components(wxyz: np.ndarray) -> np.ndarray:
    """Vectorised ``embed`` on an array of shape (..., 4); entries may be complex."""
    wxyz = np.asarray(wxyz)
    return np.einsum("...c,cij->...ij", wxyz, BASIS_MATRICES)


def block_residual(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] % 2 or m.shape[1] % 2:
        raise ShapeError(f"expected a matrix with even dimensions, got shape {m.shape}")
    p = m[0::2, 0::2]
    q = m[0::2, 1::2]
    r = m[1::2, 0::2]
    s = m[1::2, 1::2]
    if p.size == 0:
        return 0.0
    return float(max(np.max(np.abs(s - np.conj(p))), np.max(np.abs(q + np.conj(r)))))


def is_quaternionic_block(m: np.ndarray, tol: float = 1e-12) -> bool:
    return block_residual(m) <= tol


def extract(m: np.ndarray, tol: float = 1e-12) -> Quaternion:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ShapeError(f"expected a 2x2 matrix, got shape {m.shape}")
    res = block_residual(m)
    if res > tol:
        raise NotQuaternionic(f"block pattern residual {res:.3e} exceeds tolerance {tol:.1e}")
    # average the redundant entries so round-trips are exact for exact input
    z1 = 0.5 * (m[0, 0] + np.conj(m[1, 1]))
    z2 = 0.5 * (m[1, 0] - np.conj(m[0, 1]))
    return Quaternion.from_complex_pair(complex(z1), complex(z2))


@dataclass(frozen=True)
class QuatMatrix:
    """Quaternionic matrix stored as a real array of shape (rows, cols, 4)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 4 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"quaternionic matrix data must have shape (r, c, 4), got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def qrows(self) -> int:
        return self.data.shape[0]

    @property
    def qcols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_quaternions(cls, rows: list[list[Quaternion]]) -> "QuatMatrix":
        return cls(np.array([[q.as_array() for q in row] for row in rows], dtype=float))

    @classmethod
    def identity(cls, size: int) -> "QuatMatrix":
        data = np.zeros((size, size, 4))
        data[np.arange(size), np.arange(size), 0] = 1.0
        return cls(data)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "QuatMatrix":
        return cls(np.zeros((rows, cols, 4)))

    @classmethod
    def from_complex(cls, m: np.ndarray, tol: float = 1e-12) -> "QuatMatrix":
        m = np.asarray(m, dtype=complex)
        res = block_residual(m)
        if res > tol:
            raise NotQuaternionic(f"block pattern residual {res:.3e} exceeds tolerance {tol:.1e}")
        rows, cols = m.shape[0] // 2, m.shape[1] // 2
        data = np.zeros((rows, cols, 4))
        for i in range(rows):
            for j in range(cols):
                data[i, j] = extract(m[2 * i : 2 * i + 2, 2 * j : 2 * j + 2], tol).as_array()
        return cls(data)

    def entry(self, i: int, j: int) -> Quaternion:
        return Quaternion.from_array(self.data[i, j])

    def complexify(self) -> np.ndarray:
        blocks = embed_components(self.data)  # (r, c, 2, 2)
        return blocks.transpose(0, 2, 1, 3).reshape(2 * self.qrows, 2 * self.qcols)

    def conj_transpose(self) -> "QuatMatrix":
        d = self.data.transpose(1, 0, 2).copy()
        d[..., 1:] *= -1.0
        return QuatMatrix(d)

    def __matmul__(self, other: "QuatMatrix") -> "QuatMatrix":
        """Product matching the complexification: complexify(A @ B) = complexify(A) complexify(B).

        Since M(a)M(b) = M(ba), entries multiply in reversed order.
        """
        if self.qcols != other.qrows:
            raise ShapeError(f"cannot multiply {self.qrows}x{self.qcols} by {other.qrows}x{other.qcols}")
        out = np.zeros((self.qrows, other.qcols, 4))
        for i in range(self.qrows):
            for j in range(other.qcols):
                acc = Quaternion()
                for l in range(self.qcols):
                    acc = acc + other.entry(l, j) * self.entry(i, l)
                out[i, j] = acc.as_array()
        return QuatMatrix(out)

    def __add__(self, other: "QuatMatrix") -> "QuatMatrix":
        if self.data.shape != other.data.shape:
            raise ShapeError("shape mismatch in quaternionic matrix sum")
        return QuatMatrix(self.data + other.data)

    def scaled(self, s: float) -> "QuatMatrix":
        return QuatMatrix(self.data * s)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.data**2)))

    def imaginary_norm(self) -> float:
        return float(np.sqrt(np.sum(self.data[..., 1:] ** 2)))

    def to_json(self) -> list:
        return [[self.entry(i, j).to_json() for j in range(self.qcols)] for i in range(self.qrows)]


def quat_conj_transpose(m: QuatMatrix) -> QuatMatrix:
    return m.conj_transpose()


def jacobi_eigh(h: np.ndarray, threshold: float = JACOBI_THRESHOLD, max_sweeps: int = 100):
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Returns ``(w, v)`` with ascending eigenvalues and ``h = v @ diag(w) @ v^H``.
    """
    a = np.array(h, dtype=complex)
    size = a.shape[0]
    v = np.eye(size, dtype=complex)
    scale = max(float(np.max(np.abs(a))), 1.0) if size else 1.0
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if size < 2 or float(off.max()) <= threshold * scale:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                b = a[p, q]
                mag = abs(b)
                if mag <= threshold * scale * 1e-3:
                    continue
                phase = b / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # U acts on columns p, q: first rotate b to real, then a real Givens rotation
                u_pp, u_pq = c, s
                u_qp, u_qq = -s * np.conj(phase), c * np.conj(phase)
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = cp * u_pp + cq * u_qp
                a[:, q] = cp * u_pq + cq * u_qq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = np.conj(u_pp) * rp + np.conj(u_qp) * rq
                a[q, :] = np.conj(u_pq) * rp + np.conj(u_qq) * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = vp * u_pp + vq * u_qp
                v[:, q] = vp * u_pq + vq * u_qq
    w = np.real(np.diag(a))
    order = np.argsort(w)
    return w[order], v[:, order]


def hermitian_residual(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - dagger(h)))) if np.size(h) else 0.0


def hermitian_inv_sqrt(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {h.shape}")
    herm = hermitian_residual(h)
    if herm > tol * max(1.0, float(np.max(np.abs(h)))):
        raise NotHermitian(f"anti-Hermitian residual {herm:.3e} exceeds tolerance")
    h = 0.5 * (h + dagger(h))
    w, v = jacobi_eigh(h)
    if w.size and w[0] <= tol:
        raise NotPositiveDefinite(f"minimum eigenvalue {w[0]:.3e} is not above {tol:.1e}")
    r = (v * (1.0 / np.sqrt(w))) @ dagger(v)
    return 0.5 * (r + dagger(r))


def complex_to_json(z: complex) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def complex_from_json(obj: dict) -> complex:
    return complex(float(obj["re"]), float(obj["im"]))


def cmatrix_to_json(m: np.ndarray) -> list:
    return [[complex_to_json(v) for v in row] for row in np.atleast_2d(m)]


def cmatrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex_from_json(v) for v in row] for row in rows], dtype=complex)
