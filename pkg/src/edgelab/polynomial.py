"""Even correction polynomial ``Q(m) = a_2 m^2 + a_4 m^4 + ... + a_{2L} m^{2L}``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPerturbativeError

__all__ = ["CorrectionPolynomial", "PERTURBATIVE_LIMIT", "LARGE_T_CUTOFF"]

PERTURBATIVE_LIMIT = 0.5
# beyond this time e^{-t} < 2e-22 and Q_t is treated as identically zero
LARGE_T_CUTOFF = 50.0


@dataclass(frozen=True)
class CorrectionPolynomial:
    """Coefficients ``(a_2, a_4, ..., a_{2L})`` of an even polynomial.

    Instances are immutable.  Evaluation accepts scalars or arrays, real or
    complex.
    """

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        c = tuple(float(a) for a in self.coeffs)
        if not c:
            c = (0.0,)
        if not all(math.isfinite(a) for a in c):
            raise ValueError("correction coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, L: int = 1) -> "CorrectionPolynomial":
        return cls((0.0,) * L)

    @classmethod
    def from_powers(cls, powers: dict[int, float]) -> "CorrectionPolynomial":
        """Build from ``{2: a_2, 4: a_4, ...}``; odd powers are rejected."""
        if any(k % 2 or k < 2 for k in powers):
            raise ValueError("Q is even: only powers 2, 4, 6, ... are allowed")
        L = max(powers) // 2 if powers else 1
        c = [0.0] * L
        for k, a in powers.items():
            c[k // 2 - 1] = float(a)
        return cls(tuple(c))

    @property
    def L(self) -> int:
        return len(self.coeffs)

    @property
    def degree2L(self) -> int:
        return 2 * self.L

    def __getitem__(self, power: int) -> float:
        """Coefficient of ``m**power``."""
        if power % 2 or power < 2 or power > self.degree2L:
            return 0.0
        return self.coeffs[power // 2 - 1]

    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.coeffs)

    def max_abs(self) -> float:
        return max(abs(a) for a in self.coeffs)

    def check_perturbative(self, limit: float = PERTURBATIVE_LIMIT) -> None:
        if self.max_abs() > limit:
            raise NonPerturbativeError(
                f"max |a_2l| = {self.max_abs():.4g} exceeds the perturbative guard {limit}"
            )

    def __call__(self, m):
        m = np.asarray(m)
        m2 = m * m
        acc = np.zeros_like(m2)
        for a in reversed(self.coeffs):
            acc = (acc + a) * m2
        return acc[()] if acc.ndim == 0 else acc

    def deriv(self, m):
        """``Q'(m)``."""
        m = np.asarray(m)
        m2 = m * m
        acc = np.zeros_like(m2)
        for l in range(self.L, 0, -1):
            acc = acc * m2 + 2 * l * self.coeffs[l - 1]
        out = acc * m
        return out[()] if out.ndim == 0 else out

    def deriv2(self, m):
        """``Q''(m)``."""
        m = np.asarray(m)
        m2 = m * m
        acc = np.zeros_like(m2)
        for l in range(self.L, 0, -1):
            acc = acc * m2 + 2 * l * (2 * l - 1) * self.coeffs[l - 1]
        return acc[()] if acc.ndim == 0 else acc

    def evolved(self, t: float) -> "CorrectionPolynomial":
        """``Q_t(m) = Q(exp(-t/2) m)``, i.e. ``a_2l -> a_2l exp(-t l)``.

        ``t = 0`` returns ``self``; ``t > LARGE_T_CUTOFF`` returns the zero
        polynomial of the same length.  Negative ``t`` is allowed (it is used
        for centred differences at ``t = 0``).
        """
        if t == 0:
            return self
        if t > LARGE_T_CUTOFF:
            return CorrectionPolynomial.zero(self.L)
        return CorrectionPolynomial(
            tuple(a * math.exp(-t * l) for l, a in enumerate(self.coeffs, start=1))
        )

    def self_consistent_coeffs(self, z: complex) -> np.ndarray:
        """Coefficients of ``m -> P(z, m) = 1 + z m + m^2 + Q(m)``, highest power first."""
        deg = max(2, self.degree2L)
        c = np.zeros(deg + 1, dtype=complex)
        # index from the constant term, reversed at the end
        c[0] = 1.0
        c[1] = z
        c[2] = 1.0
        for l, a in enumerate(self.coeffs, start=1):
            c[2 * l] += a
        return c[::-1]

    def to_list(self) -> list[float]:
        return list(self.coeffs)
