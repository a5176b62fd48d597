"""Monte Carlo experiments on rigidity and edge statistics.

Every experiment is a list of independent replicates.  Replicate ``i`` draws
its matrices from seeds derived from ``(master_seed, stream, i)``, so a report
depends only on the configuration: it is identical for any worker count, and
two experiments that share a stream (for instance the edge-fluctuation run and
the Gaussian-divisible run at ``t = 0``) see the same matrices.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from . import ensemble as ens
from .errors import EdgeLabError, EmptySample, InvalidParams, RegimeViolation, ReplicateBudgetExceeded
from .forests import ForestTerm, build_correction, default_terms, terms_to_json
from .freeconv import edge_t
from .measure import find_edge
from .polynomial import CorrectionPolynomial
from .spectra import eigen_decompose

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "replicate_seed",
    "ks_two_sample",
    "run_rigidity",
    "run_edge_fluctuations",
    "run_gaussian_shift",
    "run_divisible_edge",
    "summarize",
    "histogram",
    "DEFAULT_THRESHOLDS",
]

STREAM_H = 1
STREAM_W = 2
STREAM_GOE = 3
STREAM_CONTROL = 4

DEFAULT_THRESHOLDS = {
    "ks_max": 0.15,
    "ks_max_large_t": 0.1,
    "rigidity_edge_p99_goe": 15.0,
    "rigidity_p99_ratio": 3.0,
    "rigidity_bulk_p99": 50.0,
    "shift_corr_min": 0.5,
    "shift_control_corr_max": 0.2,
}


def replicate_seed(master_seed: int, stream: int, index: int) -> int:
    """64-bit seed of replicate ``index`` in ``stream``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(index)))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: ens.EnsembleParams
    replicates: int
    k_range: tuple[int, ...] = (1,)
    t: float | None = None
    correction_terms: tuple[ForestTerm, ...] = field(default_factory=lambda: tuple(default_terms()))
    master_seed: int = 0
    failure_budget: float = 0.01
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidParams("need at least 2 replicates")
        N = self.ensemble.N
        k = tuple(int(x) for x in self.k_range)
        if not k or any(x < 1 or x > N for x in k):
            raise InvalidParams(f"eigenvalue indices must lie in [1, {N}]")
        object.__setattr__(self, "k_range", k)
        object.__setattr__(self, "correction_terms", tuple(self.correction_terms))
        if self.t is not None and not self.t >= 0:
            raise InvalidParams("t must be >= 0")
        th = dict(DEFAULT_THRESHOLDS)
        th.update(self.thresholds or {})
        object.__setattr__(self, "thresholds", th)

    @property
    def N(self) -> int:
        return self.ensemble.N

    def to_dict(self) -> dict:
        e = self.ensemble
        return {
            "ensemble": {"N": e.N, "q": e.q, "model": e.model.value},
            "replicates": self.replicates,
            "k_range": list(self.k_range),
            "t": self.t,
            "correction_terms": terms_to_json(self.correction_terms),
            "master_seed": self.master_seed,
            "failure_budget": self.failure_budget,
            "thresholds": dict(self.thresholds),
        }


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list[dict]
    summary: dict

    @property
    def ok_records(self) -> list[dict]:
        return [r for r in self.records if not r.get("failed")]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.ok_records], dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "summary": self.summary, "records": self.records}

    def to_json(self, path=None) -> str:
        text = json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text

    def csv_columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.records:
            for key in _flatten(r):
                if key not in cols:
                    cols.append(key)
        return cols

    def to_csv(self, path=None) -> str:
        cols = self.csv_columns()
        buf = io.StringIO()
        buf.write(f"# edgelab {self.kind} report: one row per replicate\n")
        for c in cols:
            buf.write(f"# {c}: {_describe(c)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.records:
            flat = _flatten(r)
            w.writerow([_fmt(flat.get(c, "")) for c in cols])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


_COLUMN_DOC = {
    "index": "replicate index",
    "seed": "64-bit seed of the sparse (or primary) matrix",
    "failed": "1 if the replicate failed and is excluded from the summary",
    "error": "failure message",
    "edge": "random edge L of the corrected measure (L_t for divisible runs)",
    "lambda1": "largest eigenvalue",
    "X": "N^(2/3) (lambda_1 - L)",
    "U": "N^(2/3) (lambda_1 - 2), uncorrected",
    "Y": "N^(2/3) (mu_1 - 2) for the GOE reference matrix",
    "goe_seed": "seed of the GOE reference matrix",
    "w_seed": "seed of the Gaussian component W",
    "mu1": "largest GOE reference eigenvalue",
    "control_a2": "a_2 of an independent sparse draw (GOE control)",
    "control_seed": "seed of the independent control draw",
}


def _describe(col: str) -> str:
    if col in _COLUMN_DOC:
        return _COLUMN_DOC[col]
    if col.startswith("a_"):
        return f"correction coefficient {col}"
    for prefix, doc in (
        ("lambda_", "eigenvalue lambda_k"),
        ("gamma_", "classical location gamma_k"),
        ("dev_", "N^(2/3) min(k, N-k+1)^(1/3) |lambda_k - gamma_k|"),
    ):
        if col.startswith(prefix):
            return f"{doc}, k = {col[len(prefix):]}"
    return col


def _flatten(r: dict) -> dict:
    out = {}
    for k, v in r.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                out[f"{k}_{kk}"] = vv
        elif isinstance(v, (list, tuple)):
            if k == "a_coeffs":
                for l, a in enumerate(v, start=1):
                    out[f"a_{2 * l}"] = a
            else:
                for j, a in enumerate(v):
                    out[f"{k}_{j}"] = a
        else:
            out[k] = v
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def ks_two_sample(x, y) -> float:
    """Two-sample Kolmogorov–Smirnov statistic ``sup |F_x - F_y|``."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise EmptySample("KS statistic needs two non-empty samples")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def histogram(values, lo: float, hi: float, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-width histogram; returns ``(bin_centers, counts)``."""
    counts, edges = np.histogram(np.asarray(values, float), bins=bins, range=(lo, hi))
    return 0.5 * (edges[:-1] + edges[1:]), counts


def histogram_csv(values, lo: float, hi: float, bins: int, path=None) -> str:
    centers, counts = histogram(values, lo, hi, bins)
    lines = ["bin_center,count"] + [f"{format(float(c), '.17g')},{int(n)}" for c, n in zip(centers, counts)]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# -- replicate kernels -------------------------------------------------------


def _correction(cfg: ExperimentConfig, H) -> CorrectionPolynomial:
    if cfg.ensemble.model is ens.Model.GOE:
        return CorrectionPolynomial.zero(2)
    return build_correction(H, cfg.correction_terms)


def _sparse(cfg: ExperimentConfig, i: int):
    seed = replicate_seed(cfg.master_seed, STREAM_H, i)
    return seed, ens.sample(cfg.ensemble, seed)


def _goe_reference(cfg: ExperimentConfig, i: int):
    seed = replicate_seed(cfg.master_seed, STREAM_GOE, i)
    return seed, ens.sample_goe(cfg.N, seed)


def _top(H) -> float:
    return float(eigen_decompose(H).eigenvalues[0])


def _rigidity_replicate(cfg: ExperimentConfig, i: int) -> dict:
    seed, H = _sparse(cfg, i)
    Q = _correction(cfg, H)
    M = find_edge(Q)
    N = cfg.N
    lam = eigen_decompose(H).eigenvalues
    k = np.array(cfg.k_range)
    gam = M.classical_locations(N, k)
    dev = N ** (2 / 3) * np.minimum(k, N - k + 1) ** (1 / 3) * np.abs(lam[k - 1] - gam)
    return {
        "index": i,
        "seed": seed,
        "a_coeffs": Q.to_list(),
        "edge": M.edge,
        "lambda": {int(kk): float(v) for kk, v in zip(k, lam[k - 1])},
        "gamma": {int(kk): float(v) for kk, v in zip(k, gam)},
        "dev": {int(kk): float(v) for kk, v in zip(k, dev)},
    }


def _edge_replicate(cfg: ExperimentConfig, i: int) -> dict:
    seed, H = _sparse(cfg, i)
    Q = _correction(cfg, H)
    M = find_edge(Q)
    lam1 = _top(H)
    gseed, W = _goe_reference(cfg, i)
    mu1 = _top(W)
    s = cfg.N ** (2 / 3)
    return {
        "index": i,
        "seed": seed,
        "a_coeffs": Q.to_list(),
        "edge": M.edge,
        "lambda1": lam1,
        "X": s * (lam1 - M.edge),
        "U": s * (lam1 - 2.0),
        "goe_seed": gseed,
        "mu1": mu1,
        "Y": s * (mu1 - 2.0),
    }


def _shift_replicate(cfg: ExperimentConfig, i: int) -> dict:
    seed, H = _sparse(cfg, i)
    Q = _correction(cfg, H)
    M = find_edge(Q)
    lam1 = _top(H)
    gseed, W = _goe_reference(cfg, i)
    cseed = replicate_seed(cfg.master_seed, STREAM_CONTROL, i)
    control = build_correction(ens.sample(cfg.ensemble, cseed), cfg.correction_terms)
    return {
        "index": i,
        "seed": seed,
        "a_coeffs": Q.to_list(),
        "edge": M.edge,
        "lambda1": lam1,
        "goe_seed": gseed,
        "mu1": _top(W),
        "control_seed": cseed,
        "control_a2": control[2],
    }


def _divisible_replicate(cfg: ExperimentConfig, i: int) -> dict:
    t = cfg.t or 0.0
    seed, H = _sparse(cfg, i)
    Q = _correction(cfg, H)
    wseed = replicate_seed(cfg.master_seed, STREAM_W, i)
    Ht = ens.gaussian_divisible(H, ens.sample_goe(cfg.N, wseed), t)
    ev = edge_t(Q, t)
    lam1 = _top(Ht)
    gseed, G = _goe_reference(cfg, i)
    mu1 = _top(G)
    s = cfg.N ** (2 / 3)
    return {
        "index": i,
        "seed": seed,
        "w_seed": wseed,
        "a_coeffs": Q.to_list(),
        "edge": ev.edge,
        "lambda1": lam1,
        "X": s * (lam1 - ev.edge),
        "goe_seed": gseed,
        "mu1": mu1,
        "Y": s * (mu1 - 2.0),
    }


_KERNELS: dict[str, Callable[[ExperimentConfig, int], dict]] = {
    "rigidity": _rigidity_replicate,
    "edge_fluctuations": _edge_replicate,
    "gaussian_shift": _shift_replicate,
    "divisible_edge": _divisible_replicate,
}


def _guarded(kind: str, cfg: ExperimentConfig, i: int) -> dict:
    with threadpool_limits(1):
        try:
            return _KERNELS[kind](cfg, i)
        except (EdgeLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("replicate %d of %s failed: %s", i, kind, exc)
            return {"index": i, "seed": replicate_seed(cfg.master_seed, STREAM_H, i), "failed": True, "error": str(exc)}


def _guarded_star(args):
    return _guarded(*args)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("EDGE_LAB_WORKERS", "1"))
    if workers < 1:
        raise InvalidParams("workers must be >= 1")
    return workers


def _run(kind: str, cfg: ExperimentConfig, workers: int | None, on_record=None) -> ExperimentReport:
    workers = resolve_workers(workers)
    jobs = [(kind, cfg, i) for i in range(cfg.replicates)]
    records: list[dict] = []
    if workers == 1:
        for job in jobs:
            records.append(_guarded(*job))
            if on_record:
                on_record(records[-1])
    else:
        chunk = max(1, cfg.replicates // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_guarded_star, jobs, chunksize=chunk):
                records.append(rec)
                if on_record:
                    on_record(rec)
    records.sort(key=lambda r: r["index"])
    failed = sum(1 for r in records if r.get("failed"))
    if failed > cfg.failure_budget * cfg.replicates:
        raise ReplicateBudgetExceeded(
            f"{failed} of {cfg.replicates} replicates failed (budget {cfg.failure_budget:.1%})"
        )
    return ExperimentReport(kind, cfg.to_dict(), records, summarize(kind, records, cfg.to_dict()))


# -- summaries ---------------------------------------------------------------


def _moments(x: np.ndarray) -> dict:
    return {"mean": float(np.mean(x)), "var": float(np.var(x, ddof=1)) if x.size > 1 else 0.0}


def _quantiles(x: np.ndarray) -> dict:
    return {f"q{int(round(100 * p))}": float(np.quantile(x, p)) for p in (0.5, 0.9, 0.99)}


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def bootstrap_variance_gap(x, u, n_boot: int = 2000, seed: int = 0, level: float = 0.95) -> dict:
    """Paired bootstrap of ``Var(u) - Var(x)``; returns the gap and its lower one-sided bound."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    rng = ens.make_rng(seed, 99)
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    gaps = np.var(u[idx], axis=1, ddof=1) - np.var(x[idx], axis=1, ddof=1)
    return {
        "gap": float(np.var(u, ddof=1) - np.var(x, ddof=1)),
        "lower": float(np.quantile(gaps, 1.0 - level)),
        "level": level,
    }


def summarize(kind: str, records: list[dict], config: dict) -> dict:
    """Summary statistics recomputed from per-replicate records only."""
    ok = [r for r in records if not r.get("failed")]
    out: dict = {"replicates": len(records), "failed": len(records) - len(ok)}
    if not ok:
        return out
    col = lambda name: np.array([r[name] for r in ok], dtype=float)  # noqa: E731
    out["edge"] = _moments(col("edge"))
    if kind == "rigidity":
        per_k = {}
        for k in ok[0]["dev"]:
            d = np.array([r["dev"][k] for r in ok], dtype=float)
            per_k[str(k)] = {**_moments(d), **_quantiles(d)}
        out["dev"] = per_k
    elif kind in ("edge_fluctuations", "divisible_edge"):
        X, Y = col("X"), col("Y")
        out["X"] = _moments(X)
        out["Y"] = _moments(Y)
        out["ks_X_Y"] = ks_two_sample(X, Y)
        out["mean_gap"] = out["X"]["mean"] - out["Y"]["mean"]
        out["var_gap"] = out["X"]["var"] - out["Y"]["var"]
        if kind == "edge_fluctuations":
            U = col("U")
            out["U"] = _moments(U)
            out["ks_U_Y"] = ks_two_sample(U, Y)
            out["var_contrast"] = bootstrap_variance_gap(X, U, seed=int(config.get("master_seed", 0)))
    elif kind == "gaussian_shift":
        lam1, edge, mu1 = col("lambda1"), col("edge"), col("mu1")
        out["corr_shift"] = _corr(lam1 - 2.0, edge - edge.mean())
        out["corr_control"] = _corr(mu1 - 2.0, col("control_a2"))
    return out


# -- public experiments ------------------------------------------------------


def run_rigidity(config: ExperimentConfig, workers: int | None = None, on_record=None) -> ExperimentReport:
    """Normalised deviations ``N^{2/3} min(k, N-k+1)^{1/3} |lambda_k - gamma_k|``."""
    return _run("rigidity", config, workers, on_record)


def run_edge_fluctuations(config: ExperimentConfig, workers: int | None = None, on_record=None) -> ExperimentReport:
    """``N^{2/3}(lambda_1 - L)`` for the sparse ensemble against ``N^{2/3}(mu_1 - 2)`` for GOE."""
    return _run("edge_fluctuations", config, workers, on_record)


def run_gaussian_shift(config: ExperimentConfig, workers: int | None = None, on_record=None) -> ExperimentReport:
    """Correlation of the uncorrected top eigenvalue with the random edge shift.

    Only meaningful where the Gaussian edge shift dominates; raises
    ``RegimeViolation`` for ``q > N^{1/3}``.
    """
    e = config.ensemble
    if e.model is not ens.Model.ERDOS_RENYI:
        raise InvalidParams("the Gaussian-shift experiment needs a sparse ensemble")
    if e.q > e.N ** (1 / 3):
        raise RegimeViolation(f"q = {e.q:.4g} exceeds N^(1/3) = {e.N ** (1 / 3):.4g}")
    return _run("gaussian_shift", config, workers, on_record)


def run_divisible_edge(config: ExperimentConfig, workers: int | None = None, on_record=None) -> ExperimentReport:
    """``N^{2/3}(lambda_1(t) - L_t)`` for ``H(t)`` against the GOE reference."""
    if config.t is None:
        raise InvalidParams("divisible-edge experiment needs t")
    return _run("divisible_edge", config, workers, on_record)
