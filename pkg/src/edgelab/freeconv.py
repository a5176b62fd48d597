"""Free convolution of the corrected measure with a semicircle.

The Stieltjes transform of the time-``t`` measure solves

    1 + z m_t + m_t^2 + Q(exp(-t/2) m_t) = 0,

which is the time-zero equation with ``Q`` replaced by ``Q_t(m) = Q(e^{-t/2} m)``.
It is tied to the time-zero transform through the subordination map
``xi_t(z) = e^{t/2} z + e^{t/2} (1 - e^{-t}) m_t(z)`` via
``e^{-t/2} m_t(z) = m(xi_t(z))``, and its edge moves with velocity
``dL_t/dt = Q_t'(zeta_t) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import EquilibriumMeasure, find_edge, solve_stieltjes
from .polynomial import CorrectionPolynomial

__all__ = [
    "EvolvedMeasure",
    "solve_stieltjes_t",
    "subordination_map",
    "subordination_check",
    "edge_t",
    "edge_velocity",
]


@dataclass(frozen=True, eq=False)
class EvolvedMeasure:
    base: CorrectionPolynomial
    t: float
    measure: EquilibriumMeasure

    @property
    def edge(self) -> float:
        return self.measure.edge

    @property
    def edge_stieltjes(self) -> float:
        return self.measure.edge_stieltjes

    @property
    def Q_t(self) -> CorrectionPolynomial:
        return self.measure.Q

    def density(self, x):
        return self.measure.density(x)

    def cdf(self, x):
        return self.measure.cdf(x)


def _check_t(t):
    if not t >= 0:
        raise ValueError(f"t must be >= 0, got {t}")


def solve_stieltjes_t(z, Q: CorrectionPolynomial, t: float):
    _check_t(t)
    return solve_stieltjes(z, Q.evolved(t))


def subordination_map(z, m_t, t: float):
    et = math.exp(t / 2)
    return et * np.asarray(z) + et * (-math.expm1(-t)) * np.asarray(m_t)


def subordination_check(z, Q: CorrectionPolynomial, t: float):
    """``|e^{-t/2} m_t(z) - m(xi_t(z))|``; elementwise for array ``z``."""
    mt = solve_stieltjes_t(z, Q, t)
    xi = subordination_map(z, mt, t)
    res = np.abs(math.exp(-t / 2) * mt - solve_stieltjes(xi, Q))
    return float(res) if np.ndim(res) == 0 else res


def edge_t(Q: CorrectionPolynomial, t: float) -> EvolvedMeasure:
    _check_t(t)
    return EvolvedMeasure(Q, float(t), find_edge(Q.evolved(t)))


def edge_velocity(Q: CorrectionPolynomial, t: float) -> float:
    """``dL_t/dt = Q_t'(zeta_t) / 2`` from the polynomial coefficients."""
    ev = edge_t(Q, t)
    return 0.5 * float(ev.Q_t.deriv(ev.edge_stieltjes))
