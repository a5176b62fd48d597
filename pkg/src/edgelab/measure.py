"""Random corrected equilibrium measure.

The Stieltjes transform ``m(z)`` of the measure is the upper-half-plane root of

    P(z, m) = 1 + z m + m^2 + Q(m) = 0

for an even correction polynomial ``Q``.  Its right edge ``L`` and the edge
value ``zeta = m(L)`` solve

    L = -1/zeta - zeta - Q(zeta)/zeta,   d/dm [-1/m - m - Q(m)/m] (zeta) = 0.

Density, CDF and classical locations are computed without small-``eta``
extrapolation: on the real axis the physical root is the complex root of the
real polynomial ``P(x, .)`` continued from the edge, and integrals near the
edge use the substitution ``x = L - u^2`` under which ``u -> 2u rho(L - u^2)``
is analytic on ``[0, sqrt(L)]``.  That function is interpolated once in a
Chebyshev basis and integrated exactly, which gives the tail mass, CDF and
all quantiles from one object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import EdgeNotFound, NoUpperHalfPlaneRoot, QuadratureFailure
from .polynomial import CorrectionPolynomial

__all__ = [
    "P",
    "dP_dm",
    "m_sc",
    "solve_stieltjes",
    "find_edge",
    "EquilibriumMeasure",
    "density",
    "cdf",
    "classical_locations",
    "ImAsymptoticsReport",
    "im_asymptotics_check",
]

RESIDUAL_TOL = 1e-12
MAX_NEWTON = 100
EDGE_BRACKET = (-1.5, -0.5)
_HOMOTOPY = (0.0, 0.25, 0.5, 0.75, 1.0)


def P(z, m, Q: CorrectionPolynomial):
    """``1 + z m + m^2 + Q(m)``."""
    return 1.0 + z * m + m * m + Q(m)


def dP_dm(z, m, Q: CorrectionPolynomial):
    """Partial derivative of ``P`` in its second argument."""
    return z + 2.0 * m + Q.deriv(m)


def m_sc(z):
    """Semicircle Stieltjes transform, branch with ``Im m_sc > 0`` on the upper half plane."""
    z = np.asarray(z, dtype=complex)
    out = (-z + np.sqrt(z - 2.0) * np.sqrt(z + 2.0)) / 2.0
    return out[()] if out.ndim == 0 else out


def _newton(z, m0, Q, max_iter=MAX_NEWTON):
    """Vectorised Newton on ``P(z, .)``; returns ``(m, converged_mask)``."""
    m = np.array(m0, dtype=complex, copy=True)
    z = np.broadcast_to(np.asarray(z, dtype=complex), m.shape)
    done = np.zeros(m.shape, dtype=bool)
    for _ in range(max_iter):
        act = ~done
        if not act.any():
            break
        za, ma = z[act], m[act]
        d = dP_dm(za, ma, Q)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = P(za, ma, Q) / d
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        ma = ma - step
        m[act] = ma
        small = np.abs(step) <= 4e-16 * (1.0 + np.abs(ma))
        idx = np.flatnonzero(act)
        done[idx[small | bad]] = True
    res = np.abs(P(z, m, Q))
    ok = np.isfinite(m) & (res < RESIDUAL_TOL)
    return m, ok


def _polish(z, m0, Q, steps=3):
    m = complex(m0)
    for _ in range(steps):
        d = complex(dP_dm(z, m, Q))
        if d == 0:
            break
        m -= complex(P(z, m, Q)) / d
    return m


def _enumerate_upper_root(z, Q):
    roots = np.roots(Q.self_consistent_coeffs(complex(z)))
    roots = [_polish(z, r, Q) for r in roots]
    upper = [r for r in roots if r.imag > 0]
    if not upper:
        return None
    return min(upper, key=abs)


def _acceptable(z, m, Q):
    eta = z.imag
    return (
        np.isfinite(m)
        and m.imag > 0
        and abs(m) <= 1.0 / eta + 1e-12
        and abs(complex(P(z, m, Q))) < RESIDUAL_TOL
    )


def _solve_one_fallback(z, Q):
    # homotopy in Q from the semicircle root
    m = complex(m_sc(z))
    ok = True
    for tau in _HOMOTOPY[1:]:
        Qt = CorrectionPolynomial(tuple(tau * a for a in Q.coeffs))
        mm, good = _newton(np.array([z]), np.array([m]), Qt)
        if not good[0]:
            ok = False
            break
        m = complex(mm[0])
    if ok and _acceptable(z, m, Q):
        return m
    m = _enumerate_upper_root(z, Q)
    if m is not None and _acceptable(z, m, Q):
        return m
    raise NoUpperHalfPlaneRoot(f"no admissible root of P(z, m) = 0 in the upper half plane at z = {z!r}")


def solve_stieltjes(z, Q: CorrectionPolynomial):
    """Stieltjes transform ``m(z)`` of the corrected measure, ``Im z > 0``.

    Newton iteration seeded at ``m_sc(z)``; entries where it fails or lands on
    a root with ``Im m <= 0`` are retried by homotopy in ``Q`` and finally by
    enumerating all roots of ``P(z, .)``.  Accepts scalars or arrays.
    """
    Q.check_perturbative()
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("solve_stieltjes needs Im z > 0")
    flat = z.ravel()
    m, ok = _newton(flat, m_sc(flat), Q)
    ok &= (m.imag > 0) & (np.abs(m) <= 1.0 / flat.imag + 1e-12)
    for i in np.flatnonzero(~ok):
        m[i] = _solve_one_fallback(complex(flat[i]), Q)
    out = m.reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def find_edge(Q: CorrectionPolynomial) -> "EquilibriumMeasure":
    """Right edge ``L`` and ``zeta = m(L)`` of the measure defined by ``Q``.

    Newton on the stationarity condition, written as
    ``g(m) = 1 - m^2 + Q(m) - m Q'(m) = 0`` (the derivative times ``m^2``),
    started at ``m = -1`` and confined to ``(-1.5, -0.5)``.
    """
    Q.check_perturbative()
    lo, hi = EDGE_BRACKET
    zeta = -1.0
    for _ in range(MAX_NEWTON):
        g = 1.0 - zeta * zeta + Q(zeta) - zeta * Q.deriv(zeta)
        dg = -2.0 * zeta - zeta * Q.deriv2(zeta)
        if dg == 0:
            raise EdgeNotFound("stationarity derivative vanished")
        step = g / dg
        zeta -= step
        if not lo < zeta < hi:
            raise EdgeNotFound(f"edge iteration left {EDGE_BRACKET}: zeta = {zeta!r}")
        if abs(step) <= 2e-16 * abs(zeta):
            break
    else:
        raise EdgeNotFound("edge Newton iteration did not converge")
    zeta = float(zeta)
    L = float(-1.0 / zeta - zeta - Q(zeta) / zeta)
    stationarity = float((1.0 - zeta * zeta + Q(zeta) - zeta * Q.deriv(zeta)) / (zeta * zeta))
    residual = float(P(L, zeta, Q))
    if abs(stationarity) >= RESIDUAL_TOL or abs(residual) >= RESIDUAL_TOL:
        raise EdgeNotFound(f"edge residuals too large: {stationarity:.3g}, {residual:.3g}")
    return EquilibriumMeasure(Q, L, zeta, stationarity, residual)


def _real_axis_root(x: float, M: "EquilibriumMeasure") -> complex:
    """Physical root of ``P(x, .)`` for ``|x| < L``: the ``Im > 0`` continuation."""
    Q, L, zeta = M.Q, M.edge, M.edge_stieltjes
    ax = abs(x)
    kappa = L - ax
    # square-root expansion at the edge: P_z (x - L) + P_mm (m - zeta)^2 / 2 = 0
    pmm = 2.0 + Q.deriv2(zeta)
    seed = zeta + 1j * math.sqrt(2.0 * abs(zeta) * kappa / pmm)
    if ax > 0.5 * L:
        m, ok = _newton(np.array([ax + 0j]), np.array([seed]), Q)
        m = complex(m[0])
    else:
        m0 = complex(m_sc(ax + 1e-300j)) if ax < 2.0 else seed
        m, ok = _newton(np.array([ax + 0j]), np.array([m0]), Q)
        m = complex(m[0])
    if not (ok[0] and m.imag > 0):
        roots = np.roots(Q.self_consistent_coeffs(ax))
        upper = [_polish(ax, r, Q) for r in roots if r.imag > 0]
        upper = [r for r in upper if r.imag > 0]
        if not upper:
            return complex(zeta, 0.0) if x >= 0 else complex(-zeta, 0.0)
        m = min(upper, key=abs)
    # m(-x + i0) = -conj(m(x + i0)) for the symmetric measure
    return m if x >= 0 else complex(-m.real, m.imag)


@dataclass(frozen=True, eq=False)
class EquilibriumMeasure:
    """Immutable handle on ``Q``, the edge ``L``, ``zeta = m(L)`` and derived objects."""

    Q: CorrectionPolynomial
    edge: float
    edge_stieltjes: float
    stationarity_residual: float = 0.0
    edge_residual: float = 0.0
    cheb_tol: float = field(default=1e-15, repr=False)

    def stieltjes(self, z):
        return solve_stieltjes(z, self.Q)

    def density(self, x):
        """Density at real ``x`` (scalar or array); zero outside ``[-L, L]``."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(xs.shape)
        for i, xi in enumerate(xs.flat):
            if abs(xi) < self.edge:
                out.flat[i] = max(_real_axis_root(float(xi), self).imag, 0.0) / math.pi
        return out[0] if np.ndim(x) == 0 else out

    @cached_property
    def _u_density(self):
        """Chebyshev interpolant of ``u -> 2 u rho(L - u^2)`` on ``[0, sqrt(L)]``."""
        U = math.sqrt(self.edge)

        def g(u):
            u = np.asarray(u, dtype=float)
            return 2.0 * u * self.density(self.edge - u * u)

        for deg in (48, 96, 192, 384):
            ser = C.Chebyshev.interpolate(g, deg, domain=[0.0, U])
            coef = np.abs(ser.coef)
            if coef[-6:].max() <= self.cheb_tol * max(coef.max(), 1e-300) * 10:
                return ser
        raise QuadratureFailure("Chebyshev representation of the edge-regularised density did not converge")

    @cached_property
    def _u_tail(self):
        return self._u_density.integ(lbnd=0.0)

    @cached_property
    def half_mass(self) -> float:
        return float(self._u_tail(math.sqrt(self.edge)))

    @property
    def mass(self) -> float:
        return 2.0 * self.half_mass

    def tail(self, x):
        """``int_x^L rho``."""
        xs = np.asarray(x, dtype=float)
        ax = np.minimum(np.abs(xs), self.edge)
        u = np.sqrt(self.edge - ax)
        t = self._u_tail(u)
        out = np.where(xs >= 0, t, self.mass - t)
        out = np.where(xs >= self.edge, 0.0, out)
        out = np.where(xs <= -self.edge, self.mass, out)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        """``int_{-L}^x rho``."""
        t = self.tail(x)
        return self.mass - t

    def quantiles_from_top(self, levels) -> np.ndarray:
        """Points ``gamma`` with ``int_gamma^L rho = level`` (vectorised bisection)."""
        levels = np.asarray(levels, dtype=float)
        half = self.half_mass
        upper = levels <= half
        target = np.where(upper, levels, self.mass - levels)
        lo = np.zeros(levels.shape)
        hi = np.full(levels.shape, math.sqrt(self.edge))
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self._u_tail(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 4e-16 * hi):
                break
        u = 0.5 * (lo + hi)
        x = self.edge - u * u
        return np.where(upper, x, -x)

    def classical_locations(self, N: int, indices=None) -> np.ndarray:
        """``gamma_k`` for ``k = 1..N`` (or the 1-based ``indices``), descending."""
        if N < 1:
            raise ValueError("N must be >= 1")
        k = np.arange(1, N + 1) if indices is None else np.asarray(indices)
        if np.any((k < 1) | (k > N)):
            raise ValueError("indices must lie in [1, N]")
        return self.quantiles_from_top((k - 0.5) / N)


def density(x, M: EquilibriumMeasure):
    return M.density(x)


def cdf(x, M: EquilibriumMeasure):
    return M.cdf(x)


def classical_locations(N: int, M: EquilibriumMeasure, indices=None) -> np.ndarray:
    return M.classical_locations(N, indices)


@dataclass(frozen=True)
class ImAsymptoticsReport:
    inside_ratios: np.ndarray
    outside_ratios: np.ndarray
    bounds: tuple[float, float]

    @property
    def inside_range(self):
        return float(self.inside_ratios.min()), float(self.inside_ratios.max())

    @property
    def outside_range(self):
        return float(self.outside_ratios.min()), float(self.outside_ratios.max())

    @property
    def passed(self) -> bool:
        lo, hi = self.bounds
        r = np.concatenate([self.inside_ratios.ravel(), self.outside_ratios.ravel()])
        return bool(np.all((r >= lo) & (r <= hi)))


def im_asymptotics_check(M: EquilibriumMeasure, kappas, etas, bounds=(0.1, 10.0)) -> ImAsymptoticsReport:
    """Compare ``Im m`` near the edge with ``sqrt(kappa+eta)`` (inside) and ``eta/sqrt(kappa+eta)`` (outside)."""
    k, e = np.meshgrid(np.asarray(kappas, float), np.asarray(etas, float), indexing="ij")
    if np.any(np.abs(k) > 1) or np.any(e <= 0) or np.any(e > 1):
        raise ValueError("grids must satisfy |kappa| <= 1 and 0 < eta <= 1")
    ak = np.abs(k)
    inside = M.stieltjes(M.edge - ak + 1j * e).imag / np.sqrt(ak + e)
    outside = M.stieltjes(M.edge + ak + 1j * e).imag / (e / np.sqrt(ak + e))
    return ImAsymptoticsReport(inside, outside, tuple(bounds))
