import json
import subprocess
import sys

import pytest

from edgelab import cli


def write(path, obj):
    path.write_text(json.dumps(obj, indent=1) if not isinstance(obj, str) else obj)
    return path


def test_measure_zero_edge(tmp_path):
    cfg = write(tmp_path / "cfg.json", {"schema_version": 1, "Q": [0.0], "classical_N": 2})
    assert cli.main(["measure", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert abs(rep["edge"] - 2.0) < 1e-12
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["command"] == "measure" and man["version"].startswith("0.1.0")


def test_rigidity_csv_independent_of_workers(tmp_path):
    cfg = write(
        tmp_path / "cfg.json",
        {"schema_version": 1, "ensemble": {"N": 150, "q_exponent": 0.3}, "replicates": 16, "k_range": [1, 75], "master_seed": 3},
    )
    outs = []
    for w in (1, 8):
        out = tmp_path / f"w{w}"
        assert cli.main(["rigidity", "--config", str(cfg), "--out", str(out), "--workers", str(w)]) == 0
        outs.append((out / "report.csv").read_bytes())
        assert (out / "histogram.csv").exists()
    assert outs[0] == outs[1]


def test_malformed_configs(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", '{"schema_version": 1,\n "replicates": [}')
    assert cli.main(["rigidity", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "bad.json:2:" in capsys.readouterr().err
    wrong = write(tmp_path / "wrong.json", {"schema_version": 1, "ensemble": {"N": 100, "q": 3.0}, "replicates": "many"})
    assert cli.main(["edgestats", "--config", str(wrong), "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "'replicates'" in err and "wrong.json:" in err
    extra = write(tmp_path / "extra.json", {"schema_version": 1, "Q": [0.0], "kappa": 3})
    assert cli.main(["measure", "--config", str(extra)]) == 1
    assert "'kappa'" in capsys.readouterr().err
    version = write(tmp_path / "v.json", {"schema_version": 2, "Q": [0.0]})
    assert cli.main(["measure", "--config", str(version)]) == 1
    assert "schema_version" in capsys.readouterr().err
    params = write(tmp_path / "p.json", {"schema_version": 1, "ensemble": {"N": 10, "q": 5.0}, "replicates": 4})
    assert cli.main(["rigidity", "--config", str(params)]) == 1
    assert not (tmp_path / "x").exists()


def test_runtime_failure_exit_code_and_no_partial_files(tmp_path):
    cfg = write(tmp_path / "cfg.json", {"schema_version": 1, "Q": [-0.5, -0.5]})
    out = tmp_path / "o"
    assert cli.main(["measure", "--config", str(cfg), "--out", str(out)]) == 2
    assert list(out.iterdir()) == []


def test_dry_run_and_seed_override(tmp_path, capsys, monkeypatch):
    cfg = write(
        tmp_path / "cfg.json",
        {"schema_version": 1, "ensemble": {"N": 100, "q": 4.0}, "replicates": 4, "t": 0.5},
    )
    monkeypatch.setenv("EDGE_LAB_WORKERS", "3")
    assert cli.main(["divisible", "--config", str(cfg), "--seed", "99", "--dry-run", "--out", str(tmp_path / "d")]) == 0
    plan = json.loads(capsys.readouterr().out)
    assert plan["workers"] == 3 and plan["master_seed"] == 99
    assert plan["resolved_config"]["t"] == 0.5 and plan["resolved_config"]["correction_terms"]
    assert not (tmp_path / "d").exists()


def test_other_commands(tmp_path):
    s = write(tmp_path / "s.json", {"schema_version": 1, "ensemble": {"N": 60, "q": 4.0}})
    assert cli.main(["sample", "--config", str(s), "--out", str(tmp_path / "s"), "--seed", "4"]) == 0
    rep = json.loads((tmp_path / "s" / "report.json").read_text())
    assert len(rep["eigenvalues"]) == 60 and rep["seed"] == 4
    f = write(tmp_path / "f.json", {"schema_version": 1, "Q": [0.0, 0.01], "t_grid": [0.0, 0.3, 1.0]})
    assert cli.main(["freeconv-check", "--config", str(f), "--out", str(tmp_path / "f")]) == 0
    rows = json.loads((tmp_path / "f" / "report.json").read_text())["rows"]
    assert all(r["velocity_gap"] < 1e-5 and r["subordination_residual"] < 1e-9 for r in rows)


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path / "cfg.json", {"schema_version": 1, "Q": [0.0]})
    proc = subprocess.run(
        [sys.executable, "-m", "edgelab.cli", "measure", "--config", str(cfg), "--dry-run"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and '"measure"' in proc.stdout


def test_manifest_guards():
    with pytest.raises(cli.ConfigError):
        cli.RunManifest("nope", "c", "o", 1, 0)
    with pytest.raises(cli.ConfigError):
        cli.RunManifest("sample", "c", "o", 0, 0)
