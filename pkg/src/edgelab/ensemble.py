"""Sparse random matrix ensembles.

Samplers for the centred and rescaled Erdős–Rényi adjacency matrix, the GOE,
and the Gaussian-divisible interpolation ``H(t)`` between them, plus exact and
empirical entry moments/cumulants and a Dyson Brownian motion integrator used
as an independent cross-check of ``H(t)``.

All samplers are pure functions of ``(params, seed)``.  Random streams are
derived from a master seed through :func:`make_rng`, which feeds a
``SeedSequence`` spawn key into the counter-based Philox bit generator, so
replicate ``i`` of an experiment always sees the same stream regardless of how
replicates are scheduled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy import stats as _sps

from .errors import (
    CollisionError,
    DimensionMismatch,
    InsufficientSamples,
    InvalidParams,
)

__all__ = [
    "Model",
    "EnsembleParams",
    "SymmetricMatrix",
    "CumulantProfile",
    "make_rng",
    "sample_erdos_renyi",
    "sample_goe",
    "sample",
    "entry_moment_exact",
    "entry_cumulant_exact",
    "exact_cumulant_profile",
    "empirical_cumulants",
    "gaussian_divisible",
    "dbm_step",
    "dbm_evolve",
]

MAX_SEED = 2**64 - 1


class Model(str, enum.Enum):
    ERDOS_RENYI = "erdos_renyi"
    GOE = "goe"


def make_rng(seed, *keys: int) -> np.random.Generator:
    """Return a Philox generator for the stream ``keys`` under master ``seed``.

    A ``Generator`` passed as ``seed`` is returned unchanged (``keys`` must then
    be empty), which lets callers thread one stream through several draws.
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise ValueError("cannot derive a keyed stream from a Generator")
        return seed
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise InvalidParams(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class EnsembleParams:
    """Dimension ``N``, sparsity ``q = sqrt(pN)``, model and seed."""

    N: int
    q: float | None = None
    model: Model = Model.ERDOS_RENYI
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParams(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if self.q is None:
            if self.model is Model.ERDOS_RENYI:
                raise InvalidParams("Erdos-Renyi ensemble needs a sparsity parameter q")
            object.__setattr__(self, "q", math.sqrt(self.N))
        q = float(self.q)
        if not q > 0 or not math.isfinite(q):
            raise InvalidParams(f"q must be a positive real, got {self.q}")
        object.__setattr__(self, "q", q)
        if self.model is Model.ERDOS_RENYI and not (1.0 <= q * q <= self.N):
            raise InvalidParams(f"need 1 <= q^2 <= N, got q^2={q * q:.6g}, N={self.N}")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise InvalidParams("seed must be a 64-bit unsigned integer")

    @property
    def p(self) -> float:
        """Edge probability ``q^2 / N``."""
        return self.q * self.q / self.N

    def with_seed(self, seed: int) -> "EnsembleParams":
        return EnsembleParams(self.N, self.q, self.model, seed)


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Dense real symmetric matrix with optional sampling provenance.

    ``entries`` is stored read-only; symmetry is checked bit-for-bit on
    construction.
    """

    entries: np.ndarray
    params: EnsembleParams | None = None
    stream: tuple = field(default=())

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise InvalidParams("matrix is not exactly symmetric")
        if self.params is not None and self.params.N != a.shape[0]:
            raise DimensionMismatch("matrix size disagrees with params.N")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class CumulantProfile:
    """Cumulants ``kappa_k`` and normalised constants ``C_k`` for ``k = 2..K``.

    ``C_k = kappa_k * N * q**(k-2) / (k-1)!``, so ``C_2 = N * Var(h) = 1`` for a
    correctly normalised ensemble.
    """

    orders: tuple[int, ...]
    kappas: tuple[float, ...]
    C: tuple[float, ...]

    def __getitem__(self, k: int) -> float:
        return self.C[self.orders.index(k)]

    def kappa(self, k: int) -> float:
        return self.kappas[self.orders.index(k)]

    def check(self, bound: float = 10.0, c4_min: float = 0.0, tol: float = 1e-12) -> None:
        """Raise ``InvalidParams`` unless ``C_2 = 1``, ``|C_k| <= bound``, ``C_4 >= c4_min``."""
        if abs(self[2] - 1.0) > tol:
            raise InvalidParams(f"C_2 = {self[2]!r}, expected 1")
        if any(abs(c) > bound for c in self.C):
            raise InvalidParams("some |C_k| exceeds the configured bound")
        if 4 in self.orders and self[4] < c4_min:
            raise InvalidParams(f"C_4 = {self[4]!r} below the configured lower bound")


def _params_or_raise(params) -> EnsembleParams:
    if not isinstance(params, EnsembleParams):
        raise InvalidParams("expected EnsembleParams")
    return params


def sample_erdos_renyi(params: EnsembleParams, seed=None) -> SymmetricMatrix:
    """Centred, rescaled adjacency matrix of ``G(N, q^2/N)``.

    ``H = (A - p J) / (q sqrt(1 - p))`` where ``J`` is the all-ones matrix.
    Diagonal entries (self-loops) are drawn with the same Bernoulli law as the
    off-diagonal ones.  ``seed`` defaults to ``params.seed``.
    """
    params = _params_or_raise(params)
    if params.model is not Model.ERDOS_RENYI:
        raise InvalidParams("sample_erdos_renyi needs model=erdos_renyi")
    N, q, p = params.N, params.q, params.p
    if not 0.0 < p < 1.0:
        raise InvalidParams(f"edge probability p = q^2/N must lie in (0, 1), got {p!r}")
    rng = make_rng(params.seed if seed is None else seed)
    iu, ju = np.triu_indices(N)
    bern = rng.random(iu.size) < p
    scale = q * math.sqrt(1.0 - p)
    vals = (bern - p) / scale
    h = np.empty((N, N))
    h[iu, ju] = vals
    h[ju, iu] = vals
    return SymmetricMatrix(h, params)


def sample_goe(N: int, seed=0) -> SymmetricMatrix:
    """GOE matrix with off-diagonal variance ``1/N`` and diagonal variance ``2/N``."""
    if int(N) != N or N < 2:
        raise InvalidParams(f"N must be an integer >= 2, got {N}")
    N = int(N)
    rng = make_rng(seed)
    g = rng.standard_normal((N, N))
    w = (g + g.T) / math.sqrt(2.0 * N)
    params = EnsembleParams(N, None, Model.GOE, seed if not isinstance(seed, np.random.Generator) else 0)
    return SymmetricMatrix(w, params)


def sample(params: EnsembleParams, seed=None) -> SymmetricMatrix:
    """Dispatch on ``params.model``."""
    params = _params_or_raise(params)
    s = params.seed if seed is None else seed
    if params.model is Model.GOE:
        return sample_goe(params.N, s)
    return sample_erdos_renyi(params, s)


def _check_nq(N, q):
    if N < 2 or not q > 0 or q * q > N:
        raise InvalidParams(f"invalid (N, q) = ({N}, {q})")


def entry_moment_exact(k: int, N: int, q: float) -> float:
    """Exact ``E[h_ij^k]`` of a centred rescaled Erdős–Rényi entry."""
    if int(k) != k or k < 2:
        raise InvalidParams(f"moment order must be an integer >= 2, got {k}")
    _check_nq(N, q)
    p = q * q / N
    if p >= 1.0:
        raise InvalidParams("p = 1 has a degenerate (zero) entry law")
    return (1.0 / (N * q ** (k - 2))) * (1.0 - p) ** (-k / 2 + 1) * (
        (1.0 - p) ** (k - 1) + (-1) ** k * p ** (k - 1)
    )


def _cumulants_from_central_moments(mu: dict[int, float], kmax: int) -> dict[int, float]:
    # mean-zero moment-cumulant recursion
    kappa = {1: 0.0}
    for n in range(2, kmax + 1):
        s = mu[n]
        for m in range(2, n - 1):
            s -= comb(n - 1, m - 1) * kappa[m] * mu[n - m]
        kappa[n] = s
    return kappa


def entry_cumulant_exact(k: int, N: int, q: float) -> float:
    """Exact ``k``-th cumulant of a centred rescaled Erdős–Rényi entry."""
    mu = {n: entry_moment_exact(n, N, q) for n in range(2, k + 1)}
    return _cumulants_from_central_moments(mu, k)[k]


def exact_cumulant_profile(N: int, q: float, kmax: int = 6) -> CumulantProfile:
    if kmax < 2:
        raise InvalidParams("kmax must be >= 2")
    mu = {n: entry_moment_exact(n, N, q) for n in range(2, kmax + 1)}
    kap = _cumulants_from_central_moments(mu, kmax)
    orders = tuple(range(2, kmax + 1))
    kappas = tuple(kap[k] for k in orders)
    C = tuple(kap[k] * N * q ** (k - 2) / factorial(k - 1) for k in orders)
    return CumulantProfile(orders, kappas, C)


def empirical_cumulants(samples, kmax: int, N: int, q: float, min_samples: int = 10_000) -> CumulantProfile:
    """Estimate cumulants from i.i.d. entry draws.

    Orders up to 4 use the unbiased k-statistics; higher orders fall back to the
    moment-cumulant recursion on sample central moments.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_samples:
        raise InsufficientSamples(f"need at least {min_samples} draws, got {x.size}")
    if kmax < 2:
        raise InvalidParams("kmax must be >= 2")
    orders = tuple(range(2, kmax + 1))
    kap: dict[int, float] = {}
    for k in orders:
        if k <= 4:
            kap[k] = float(_sps.kstat(x, k))
    if kmax > 4:
        xc = x - x.mean()
        mu = {n: float(np.mean(xc**n)) for n in range(2, kmax + 1)}
        rec = _cumulants_from_central_moments(mu, kmax)
        for k in range(5, kmax + 1):
            kap[k] = rec[k]
    kappas = tuple(kap[k] for k in orders)
    C = tuple(kap[k] * N * q ** (k - 2) / factorial(k - 1) for k in orders)
    return CumulantProfile(orders, kappas, C)


def gaussian_divisible(H: SymmetricMatrix, W: SymmetricMatrix, t: float) -> SymmetricMatrix:
    """``H(t) = exp(-t/2) H + sqrt(1 - exp(-t)) W``."""
    if H.dim != W.dim:
        raise DimensionMismatch(f"H is {H.dim}x{H.dim} but W is {W.dim}x{W.dim}")
    if not t >= 0:
        raise InvalidParams(f"t must be >= 0, got {t}")
    a = math.exp(-t / 2)
    b = math.sqrt(-math.expm1(-t))
    return SymmetricMatrix(a * H.entries + b * W.entries, H.params)


def dbm_step(eigs, dt: float, seed=0, beta: float = 1.0, floor: float = 1e-12) -> np.ndarray:
    """One Euler–Maruyama step of Dyson Brownian motion.

    ``d lam_i = sqrt(2/(beta N)) dB_i + (1/N) sum_{j != i} dt/(lam_i - lam_j) - lam_i/2 dt``
    with standard Brownian motions ``B_i``.  ``beta = 1`` is the law of the
    eigenvalues of ``H(t)`` driven by a GOE with diagonal variance ``2/N``;
    ``beta = 2`` gives noise ``dB_i/sqrt(N)``.

    ``eigs`` is strictly descending along its last axis; leading axes are
    independent batches.  Raises ``CollisionError`` if the step makes two
    eigenvalues cross or come within ``floor`` of each other.
    """
    lam = np.asarray(eigs, dtype=float)
    if lam.ndim == 0:
        raise InvalidParams("eigs must be a vector")
    if not dt > 0:
        raise InvalidParams("dt must be positive")
    N = lam.shape[-1]
    if N > 1 and not np.all(np.diff(lam, axis=-1) < 0):
        raise InvalidParams("eigs must be strictly sorted in descending order")
    out = _dbm_raw(lam, dt, make_rng(seed), beta)
    if N > 1:
        gaps = -np.diff(out, axis=-1)
        if np.any(gaps < floor):
            raise CollisionError(
                f"eigenvalue gap {gaps.min():.3g} below floor {floor:g}; reduce dt"
            )
    return out


def _dbm_raw(lam: np.ndarray, dt: float, rng: np.random.Generator, beta: float) -> np.ndarray:
    N = lam.shape[-1]
    if N > 1:
        diff = lam[..., :, None] - lam[..., None, :]
        idx = np.arange(N)
        diff[..., idx, idx] = np.inf
        repulsion = np.sum(1.0 / diff, axis=-1) / N
    else:
        repulsion = np.zeros_like(lam)
    drift = repulsion - lam / 2
    noise = math.sqrt(2.0 * dt / (beta * N)) * rng.standard_normal(lam.shape)
    return lam + drift * dt + noise


def dbm_evolve(
    eigs, t: float, n_steps: int, seed=0, beta: float = 1.0, floor: float = 1e-12, max_refine: int = 10
) -> np.ndarray:
    """Integrate Dyson Brownian motion from time 0 to ``t`` with ``n_steps`` equal steps.

    A batch row whose step trips the collision guard is retried as two half
    steps with fresh noise, recursively up to ``max_refine`` halvings; other
    rows are unaffected.
    """
    rng = make_rng(seed)
    lam = np.array(eigs, dtype=float, ndmin=1)
    if not t > 0 or n_steps < 1:
        raise InvalidParams("need t > 0 and n_steps >= 1")
    N = lam.shape[-1]
    if N > 1 and not np.all(np.diff(lam, axis=-1) < 0):
        raise InvalidParams("eigs must be strictly sorted in descending order")
    flat = lam.reshape(-1, N)

    def advance(x, h, depth):
        out = _dbm_raw(x, h, rng, beta)
        if N == 1:
            return out
        bad = np.any(-np.diff(out, axis=-1) < floor, axis=-1)
        if bad.any():
            if depth >= max_refine:
                raise CollisionError(f"collision persists after {max_refine} step halvings")
            out[bad] = advance(advance(x[bad], h / 2, depth + 1), h / 2, depth + 1)
        return out

    dt = t / n_steps
    for _ in range(n_steps):
        flat = advance(flat, dt, 0)
    return flat.reshape(lam.shape)
