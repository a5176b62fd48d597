"""``edge-lab`` command-line front end.

Every command reads a JSON config (``schema_version`` 1), runs, and writes its
outputs into ``--out``: ``report.json`` and ``report.csv`` (plus
``histogram.csv`` for Monte Carlo commands) and ``manifest.json`` echoing the
resolved run.  Files are written to a temporary name and renamed into place
only after the computation succeeded.

Exit codes: 0 success, 1 invalid config, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import ensemble as ens
from . import stats
from .errors import ConfigError, EdgeLabError
from .forests import default_terms, terms_from_json, terms_to_json
from .freeconv import edge_t, edge_velocity, subordination_check
from .measure import find_edge
from .polynomial import CorrectionPolynomial
from .spectra import eigen_decompose

log = logging.getLogger("edgelab.cli")

COMMANDS = ("sample", "measure", "rigidity", "edgestats", "freeconv-check", "divisible")
SCHEMA_VERSION = 1
U64_MAX = 2**64 - 1

_number = {"type": "number"}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "ensemble": {
            "type": "object",
            "required": ["N"],
            "additionalProperties": False,
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "q": {"type": "number", "exclusiveMinimum": 0},
                "q_exponent": {"type": "number", "minimum": 0, "maximum": 0.5},
                "model": {"enum": [m.value for m in ens.Model]},
            },
            "not": {"required": ["q", "q_exponent"]},
        },
        "replicates": {"type": "integer", "minimum": 2},
        "k_range": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "t": {"type": "number", "minimum": 0},
        "correction_terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["vertices", "edges"],
                "additionalProperties": False,
                "properties": {
                    "vertices": {"type": "integer", "minimum": 1},
                    "edges": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "integer"}, "minItems": 3, "maxItems": 3},
                    },
                    "coeff": _number,
                },
            },
        },
        "master_seed": {"type": "integer", "minimum": 0, "maximum": U64_MAX},
        "workers": {"type": "integer", "minimum": 1},
        "failure_budget": {"type": "number", "minimum": 0, "maximum": 1},
        "thresholds": {"type": "object", "additionalProperties": _number},
        "histogram": {
            "type": "object",
            "required": ["lo", "hi", "bins"],
            "additionalProperties": False,
            "properties": {"lo": _number, "hi": _number, "bins": {"type": "integer", "minimum": 1}},
        },
        "Q": {"type": "array", "items": _number, "minItems": 1},
        "t_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "z_grid": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}},
        "classical_N": {"type": "integer", "minimum": 1},
    },
}

MC_COMMANDS = {
    "rigidity": stats.run_rigidity,
    "edgestats": stats.run_edge_fluctuations,
    "divisible": stats.run_divisible_edge,
}


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: Path
    output_dir: Path
    workers: int
    master_seed: int
    dry_run: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if not 0 <= self.master_seed <= U64_MAX:
            raise ConfigError("seed: must be an unsigned 64-bit integer")


def version_string() -> str:
    """Package version with ``git describe`` appended when available."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        desc = out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+g{desc}" if desc else __version__


def _line_of_key(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_config(path) -> dict:
    """Parse and schema-validate a config file, raising ``ConfigError`` with location details."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        field = ".".join(str(p) for p in err.absolute_path) or "<root>"
        keys = [p for p in err.absolute_path if isinstance(p, str)]
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                field = ".".join([*map(str, err.absolute_path), extra[0]])
                keys.append(extra[0])
        line = _line_of_key(text, keys[-1]) if keys else None
        loc = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{loc}: field '{field}': {err.message}")
    return data


def _params(cfg: dict, seed: int) -> ens.EnsembleParams:
    e = cfg.get("ensemble")
    if e is None:
        raise ConfigError("field 'ensemble': required for this command")
    N = e["N"]
    q = e.get("q")
    if "q_exponent" in e:
        q = N ** e["q_exponent"]
    try:
        return ens.EnsembleParams(N, q=q, model=ens.Model(e.get("model", "erdos_renyi")), seed=seed)
    except EdgeLabError as exc:
        raise ConfigError(f"field 'ensemble': {exc}") from exc


def experiment_config(cfg: dict, seed: int) -> stats.ExperimentConfig:
    if "replicates" not in cfg:
        raise ConfigError("field 'replicates': required for this command")
    try:
        terms = terms_from_json(cfg["correction_terms"]) if "correction_terms" in cfg else default_terms()
        return stats.ExperimentConfig(
            ensemble=_params(cfg, seed),
            replicates=cfg["replicates"],
            k_range=tuple(cfg.get("k_range", (1,))),
            t=cfg.get("t"),
            correction_terms=tuple(terms),
            master_seed=seed,
            failure_budget=cfg.get("failure_budget", 0.01),
            thresholds=cfg.get("thresholds", {}),
        )
    except EdgeLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config: {exc}") from exc


def _correction(cfg: dict) -> CorrectionPolynomial:
    if "Q" not in cfg:
        raise ConfigError("field 'Q': required for this command")
    return CorrectionPolynomial(tuple(cfg["Q"]))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(stats._jsonable(obj), indent=1, sort_keys=True) + "\n"


def _rows_csv(header: list[str], rows, comments: list[str]) -> str:
    lines = [f"# {c}" for c in comments] + [",".join(header)]
    lines += [",".join(stats._fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- commands ----------------------------------------------------------------


def _cmd_sample(cfg, m: RunManifest) -> dict[str, str]:
    params = _params(cfg, m.master_seed)
    H = ens.sample(params, m.master_seed)
    lam = eigen_decompose(H).eigenvalues
    out = {"command": "sample", "N": params.N, "q": params.q, "model": params.model.value, "seed": m.master_seed}
    if params.model is ens.Model.ERDOS_RENYI:
        from .forests import build_correction

        Q = build_correction(H, terms_from_json(cfg["correction_terms"]) if "correction_terms" in cfg else None)
        out["a_coeffs"] = Q.to_list()
        out["edge"] = find_edge(Q).edge
    out.update(lambda1=float(lam[0]), trace=float(lam.sum()), eigenvalues=lam.tolist())
    files = {
        "report.json": _dumps(out),
        "report.csv": _rows_csv(["index", "eigenvalue"], enumerate(lam.tolist(), 1), ["eigenvalues in descending order"]),
    }
    h = cfg.get("histogram", {"lo": -2.5, "hi": 2.5, "bins": 50})
    files["histogram.csv"] = stats.histogram_csv(lam, h["lo"], h["hi"], h["bins"])
    return files


def _cmd_measure(cfg, m: RunManifest) -> dict[str, str]:
    Q = _correction(cfg)
    M = find_edge(Q)
    out = {
        "command": "measure",
        "Q": Q.to_list(),
        "edge": M.edge,
        "edge_stieltjes": M.edge_stieltjes,
        "stationarity_residual": M.stationarity_residual,
        "edge_residual": M.edge_residual,
        "mass": M.mass,
    }
    x = np.linspace(-M.edge, M.edge, 201)
    rho = M.density(x)
    rows = list(zip(x.tolist(), np.asarray(rho).tolist()))
    if "classical_N" in cfg:
        out["classical_locations"] = M.classical_locations(cfg["classical_N"]).tolist()
    return {
        "report.json": _dumps(out),
        "report.csv": _rows_csv(["x", "density"], rows, ["density of the corrected measure on a uniform grid"]),
    }


def _cmd_freeconv(cfg, m: RunManifest) -> dict[str, str]:
    Q = _correction(cfg)
    ts = cfg.get("t_grid", [0.0, 0.3, 1.0])
    zs = np.array([complex(a, b) for a, b in cfg.get("z_grid", [[0.5, 0.1], [2.5, 0.01], [-1.0, 1.0]])])
    h = 1e-4
    rows = []
    for t in ts:
        ev = edge_t(Q, t)
        vel = edge_velocity(Q, t)
        fd = (find_edge(Q.evolved(t + h)).edge - find_edge(Q.evolved(t - h)).edge) / (2 * h)
        sub = float(np.max(subordination_check(zs, Q, t)))
        rows.append([t, ev.edge, vel, fd, abs(vel - fd), sub])
    header = ["t", "edge_t", "velocity", "velocity_fd", "velocity_gap", "subordination_residual"]
    out = {"command": "freeconv-check", "Q": Q.to_list(), "rows": [dict(zip(header, r)) for r in rows]}
    return {
        "report.json": _dumps(out),
        "report.csv": _rows_csv(header, rows, ["edge velocity against central differences, per time t"]),
    }


def _histogram_for(report: stats.ExperimentReport, cfg: dict) -> str | None:
    if report.kind == "rigidity":
        k = report.records and next((r for r in report.records if not r.get("failed")), None)
        if not k:
            return None
        first = next(iter(k["dev"]))
        values = [r["dev"][first] for r in report.ok_records]
        default = {"lo": 0.0, "hi": 20.0, "bins": 40}
    else:
        values = report.column("X")
        default = {"lo": -8.0, "hi": 4.0, "bins": 48}
    h = cfg.get("histogram", default)
    return stats.histogram_csv(values, h["lo"], h["hi"], h["bins"])


def _cmd_mc(cfg, m: RunManifest, collected: list) -> dict[str, str]:
    config = experiment_config(cfg, m.master_seed)
    if m.command == "divisible" and config.t is None:
        raise ConfigError("field 't': required for the divisible command")
    report = MC_COMMANDS[m.command](config, workers=m.workers, on_record=collected.append)
    files = {"report.json": report.to_json() + "\n", "report.csv": report.to_csv()}
    hist = _histogram_for(report, cfg)
    if hist is not None:
        files["histogram.csv"] = hist
    return files


def plan(cfg: dict, m: RunManifest) -> dict:
    """Resolved run description, as echoed to ``manifest.json`` and by ``--dry-run``."""
    out = {
        "command": m.command,
        "config_path": str(m.config_path),
        "output_dir": str(m.output_dir),
        "workers": m.workers,
        "master_seed": m.master_seed,
        "version": version_string(),
    }
    if m.command in MC_COMMANDS:
        out["resolved_config"] = experiment_config(cfg, m.master_seed).to_dict()
    elif m.command == "sample":
        p = _params(cfg, m.master_seed)
        out["resolved_config"] = {"N": p.N, "q": p.q, "model": p.model.value}
    else:
        out["resolved_config"] = {"Q": _correction(cfg).to_list(), **{k: v for k, v in cfg.items() if k != "Q"}}
    if "correction_terms" not in cfg and m.command in ("sample",):
        out["resolved_config"]["correction_terms"] = terms_to_json(default_terms())
    return out


def run(m: RunManifest, cfg: dict | None = None) -> int:
    """Execute a manifest; returns the process exit code."""
    try:
        if cfg is None:
            cfg = load_config(m.config_path)
        resolved = plan(cfg, m)
    except ConfigError as exc:
        print(f"edge-lab: config error: {exc}", file=sys.stderr)
        return 1
    if m.dry_run:
        print(_dumps(resolved), end="")
        return 0
    collected: list = []
    try:
        m.output_dir.mkdir(parents=True, exist_ok=True)
        if m.command in MC_COMMANDS:
            files = _cmd_mc(cfg, m, collected)
        else:
            files = {"sample": _cmd_sample, "measure": _cmd_measure, "freeconv-check": _cmd_freeconv}[m.command](cfg, m)
    except ConfigError as exc:
        print(f"edge-lab: config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        if collected:
            path = m.output_dir / "partial_records.json"
            _atomic_write(path, _dumps(sorted(collected, key=lambda r: r["index"])))
            print(f"edge-lab: interrupted; {len(collected)} completed records in {path}", file=sys.stderr)
        else:
            print("edge-lab: interrupted", file=sys.stderr)
        return 2
    except (EdgeLabError, RuntimeError, ArithmeticError, ValueError) as exc:
        print(f"edge-lab: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for name, text in files.items():
        _atomic_write(m.output_dir / name, text)
    _atomic_write(m.output_dir / "manifest.json", _dumps(resolved))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edge-lab", description="Sparse random matrix edge experiments.")
    ap.add_argument("--version", action="version", version=f"edge-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("edge-lab-out"), help="output directory")
        p.add_argument("--workers", type=int, default=None, help="worker processes (env EDGE_LAB_WORKERS)")
        p.add_argument("--seed", type=int, default=None, help="master seed, overrides the config")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        workers = args.workers
        if workers is None:
            env = os.environ.get("EDGE_LAB_WORKERS")
            try:
                workers = int(env) if env else cfg.get("workers", 1)
            except ValueError:
                raise ConfigError(f"EDGE_LAB_WORKERS: not an integer: {env!r}") from None
        seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
        manifest = RunManifest(args.command, args.config, args.out, workers, seed, args.dry_run)
    except ConfigError as exc:
        print(f"edge-lab: config error: {exc}", file=sys.stderr)
        return 1
    return run(manifest, cfg)


if __name__ == "__main__":
    sys.exit(main())
