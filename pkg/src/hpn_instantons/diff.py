"""Central finite differences with optional Richardson extrapolation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import StepUnderflow
from .geometry import ConePoint, HarmonicPoint, TangentDirection, expm2


@dataclass(frozen=True)
class DiffEngine:
    step: float = 1e-4
    richardson: bool = True

    def __post_init__(self):
        if not self.step >= 1e-12:
            raise StepUnderflow(f"finite-difference step {self.step!r} is below 1e-12")

    def line(self, g: Callable[[float], np.ndarray]) -> np.ndarray:
        """Derivative at 0 of a function of one real variable."""
        h = self.step

        def central(s):
            return (np.asarray(g(s)) - np.asarray(g(-s))) / (2 * s)

        if not self.richardson:
            return central(h)
        return (4 * central(h / 2) - central(h)) / 3

    def along_real(self, f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Complex-linear derivative of ``f`` (a function of real coordinates) along complex ``coeffs``."""
        x = np.asarray(x, dtype=float)
        coeffs = np.asarray(coeffs, dtype=complex)
        out = 0
        re, im = coeffs.real, coeffs.imag
        if np.any(re):
            out = out + self.line(lambda s: f(x + s * re))
        if np.any(im):
            out = out + 1j * self.line(lambda s: f(x + s * im))
        if isinstance(out, int):
            return np.zeros_like(np.asarray(f(x)), dtype=complex)
        return out

    def derivative(
        self,
        field: Callable[[HarmonicPoint], np.ndarray],
        hp: HarmonicPoint,
        d: TangentDirection,
        mask: Optional[np.ndarray] = None,
        u_independent: bool = False,
    ) -> np.ndarray:
        """Derivative of a matrix-valued field on harmonic space along ``d``.

        ``mask`` marks the real coordinates the field may depend on; derivatives
        along the remaining coordinates are exact zeros.  ``u_independent``
        drops the fiber part of ``d`` exactly.
        """
        coeffs = d.coeffs
        if mask is not None:
            coeffs = np.where(mask, coeffs, 0)
        x0 = hp.base.real_coords()
        out = None
        if np.any(coeffs):
            out = self.along_real(lambda x: field(HarmonicPoint(ConePoint.from_real(x), hp.u)), x0, coeffs)
        if d.fiber is not None and np.any(d.fiber) and not u_independent:
            E = np.asarray(d.fiber)
            part = self.line(lambda s: field(HarmonicPoint(hp.base, hp.u @ expm2(s * E))))
            out = part if out is None else out + part
        if out is None:
            return np.zeros_like(np.asarray(field(hp)), dtype=complex)
        return out
