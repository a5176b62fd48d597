"""Dense symmetric eigensolver, Green's functions and resolvent diagnostics.

Both eigensolver back ends use Householder tridiagonalisation followed by
implicit-shift QL/QR iteration.  ``method="lapack"`` calls LAPACK ``dsyev``
through scipy (the path used by the Monte Carlo experiments);
``method="native"`` is a self-contained numpy implementation of the same
algorithm, kept as a cross-check and for small matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, InvalidParams
from .measure import m_sc

__all__ = [
    "SpectrumResult",
    "GreensFunctionSample",
    "tridiagonalize",
    "tridiagonal_ql",
    "eigen_decompose",
    "greens_function",
    "ward_identity_check",
    "LocalLawReport",
    "local_law_residual",
    "DelocalizationReport",
    "delocalization_check",
]

MAX_DIM = 4096


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Eigenvalues in descending order and optional orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True, eq=False)
class GreensFunctionSample:
    z: complex
    entries: np.ndarray | None
    diagonal: np.ndarray
    mN: complex

    @property
    def full(self) -> bool:
        return self.entries is not None


def tridiagonalize(a, want_q: bool = False):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns ``(d, e, Q)`` such that ``a = Q T Q^T`` with ``diag(T) = d`` and
    ``e`` on the off-diagonals; ``Q`` is ``None`` unless ``want_q``.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    q = np.eye(n) if want_q else None
    for k in range(n - 2):
        x = a[k + 1:, k]
        xnorm = math.sqrt(float(x @ x))
        if xnorm == 0.0:
            continue
        alpha = -math.copysign(xnorm, x[0])
        v = x.copy()
        v[0] -= alpha
        vv = float(v @ v)
        if vv == 0.0:
            continue
        beta = 2.0 / vv
        sub = a[k + 1:, k + 1:]
        p = beta * (sub @ v)
        w = p - (0.5 * beta * float(v @ p)) * v
        sub -= np.outer(v, w) + np.outer(w, v)
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = a[k, k + 1] = alpha
        if want_q:
            q[:, k + 1:] -= beta * np.outer(q[:, k + 1:] @ v, v)
    d = np.diagonal(a).copy()
    e = np.zeros(n)
    e[: n - 1] = np.diagonal(a, 1)
    return d, e, q


def tridiagonal_ql(d, e, z=None, max_iter: int | None = None):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    ``e[i]`` couples rows ``i`` and ``i + 1``.  If ``z`` is given its columns
    are rotated along, so passing the Householder ``Q`` yields eigenvectors.
    Eigenvalues are returned unsorted.
    """
    d = np.array(d, dtype=float, copy=True)
    e = np.array(e, dtype=float, copy=True)
    n = d.size
    if z is not None:
        z = np.array(z, dtype=float, copy=True)
    eps = np.finfo(float).eps
    budget = 30 * n if max_iter is None else max_iter
    total = 0
    for l in range(n):
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            total += 1
            if total > budget:
                raise ConvergenceFailure(f"QL iteration exceeded {budget} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    zi1 = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * zi1
                    z[:, i] = c * z[:, i] - s * zi1
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, z


def eigen_decompose(H, vectors: bool = False, method: str = "lapack", max_dim: int = MAX_DIM) -> SpectrumResult:
    """Full spectrum of a symmetric matrix, eigenvalues sorted descending."""
    a = np.asarray(getattr(H, "entries", H), dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidParams("expected a square matrix")
    if n > max_dim:
        raise InvalidParams(f"dimension {n} exceeds the configured maximum {max_dim}")
    if method == "lapack":
        try:
            if vectors:
                w, u = scipy.linalg.eigh(a, driver="ev", check_finite=False)
            else:
                w = scipy.linalg.eigh(a, eigvals_only=True, driver="ev", check_finite=False)
                u = None
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
    elif method == "native":
        d, e, q = tridiagonalize(a, want_q=vectors)
        w, u = tridiagonal_ql(d, e, q)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")[::-1]
    w = np.ascontiguousarray(w[order])
    w.setflags(write=False)
    if u is not None:
        u = np.ascontiguousarray(u[:, order])
        u.setflags(write=False)
    return SpectrumResult(w, u)


def greens_function(H, z: complex, mode: str = "full", spectrum: SpectrumResult | None = None) -> GreensFunctionSample:
    """``G(z) = (H - z)^{-1}`` assembled from the eigendecomposition.

    Pass ``spectrum`` (with eigenvectors) to reuse one decomposition across a
    sweep of ``z`` values.
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("Green's function needs Im z != 0")
    if mode not in ("full", "diag"):
        raise ValueError("mode must be 'full' or 'diag'")
    if spectrum is None or spectrum.eigenvectors is None:
        spectrum = eigen_decompose(H, vectors=True)
    lam, u = spectrum.eigenvalues, spectrum.eigenvectors
    r = 1.0 / (lam - z)
    mN = complex(np.mean(r))
    if mode == "full":
        G = (u * r) @ u.T
        return GreensFunctionSample(z, G, np.diagonal(G).copy(), mN)
    return GreensFunctionSample(z, None, (u * u) @ r, mN)


def ward_identity_check(G: GreensFunctionSample, i: int) -> float:
    """``|sum_j |G_ij|^2 - Im G_ii / Im z|``."""
    if not G.full:
        raise ValueError("Ward identity check needs a full-mode Green's function")
    row = G.entries[i]
    return abs(float(np.sum(np.abs(row) ** 2)) - G.entries[i, i].imag / G.z.imag)


@dataclass(frozen=True)
class LocalLawReport:
    z: np.ndarray
    residual: np.ndarray
    control: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.residual / self.control


def local_law_residual(H, zgrid, q: float | None = None, spectrum: SpectrumResult | None = None) -> LocalLawReport:
    """Entrywise deviation ``max_ij |G_ij - delta_ij m_sc|`` against the local-law control parameter.

    The control is ``1/q + sqrt(Im m_sc / (N eta)) + 1/(N eta)``.  ``q``
    defaults to the matrix provenance, or ``sqrt(N)`` if there is none.
    """
    a = np.asarray(getattr(H, "entries", H), dtype=float)
    N = a.shape[0]
    if q is None:
        params = getattr(H, "params", None)
        q = params.q if params is not None else math.sqrt(N)
    if spectrum is None or spectrum.eigenvectors is None:
        spectrum = eigen_decompose(a, vectors=True)
    zs = np.atleast_1d(np.asarray(zgrid, dtype=complex))
    res = np.empty(zs.size)
    ctl = np.empty(zs.size)
    for k, z in enumerate(zs):
        G = greens_function(a, z, "full", spectrum).entries
        msc = complex(m_sc(z))
        dev = np.abs(G - msc * np.eye(N))
        res[k] = dev.max()
        eta = z.imag
        ctl[k] = 1.0 / q + math.sqrt(msc.imag / (N * eta)) + 1.0 / (N * eta)
    return LocalLawReport(zs, res, ctl)


@dataclass(frozen=True)
class DelocalizationReport:
    per_vector: np.ndarray
    threshold: float

    @property
    def statistic(self) -> float:
        return float(self.per_vector.max())

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold


def delocalization_check(S: SpectrumResult, constant: float = 4.0) -> DelocalizationReport:
    """``sqrt(N) ||u_alpha||_inf`` for every eigenvector; threshold ``constant * N**0.1``."""
    if S.eigenvectors is None:
        raise ValueError("delocalization check needs eigenvectors")
    N = S.N
    per = math.sqrt(N) * np.abs(S.eigenvectors).max(axis=0)
    return DelocalizationReport(per, constant * N**0.1)
