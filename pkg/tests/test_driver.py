import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from stokesmg.driver import cli, experiments
from stokesmg.driver.config import (PRESETS, ExperimentKind, build_config,
                                    load_config, parse_levels)
from stokesmg.errors import ConfigurationError


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@given(st.integers(1, 8), st.integers(0, 5))
def test_parse_levels_range(lo, span):
    assert parse_levels(f"{lo}..{lo + span}") == list(range(lo, lo + span + 1))
    assert parse_levels(",".join(map(str, range(lo, lo + span + 1)))) == \
        list(range(lo, lo + span + 1))


def test_presets_are_valid():
    for name in PRESETS:
        cfg = build_config(load_config(name))
        assert cfg.experiment in ExperimentKind


def test_flag_overrides_collapse_blocks():
    cfg = build_config(load_config("table3"), beta=[1e-3], levels=[4])
    assert len(cfg.blocks) == 1
    assert cfg.blocks[0].betas == [1e-3] and cfg.blocks[0].gamma_u == 1.0
    assert cfg.levels == [4]


@pytest.mark.parametrize("overrides", [
    {"experiment": "solve", "levels": [3], "num_levels": [4], "beta": [1e-3]},
    {"experiment": "solve", "levels": [3], "beta": [-1.0]},
    {"experiment": "spectrum", "levels": [7], "beta": [1.0]},
    {"experiment": "spectrum", "levels": [1], "beta": [1.0]},
    {"experiment": "nonsense"},
    {"levels": [3]},
    {"experiment": "solve", "levels": [3], "beta": [1.0], "format": "xml"},
])
def test_invalid_configs(overrides):
    with pytest.raises(ConfigurationError):
        build_config({}, **overrides)


def test_heavy_flag_unlocks_fine_levels():
    cfg = build_config({}, experiment="solve", levels=[7], num_levels=[1],
                       beta=[1e-4], heavy=True)
    assert cfg.heavy


def test_config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("experiment: spectrum\nlevels: [2, 3]\n"
                    "blocks:\n  - {gamma_u: 1, gamma_p: 0, betas: [1.0]}\n")
    cfg = build_config(load_config(str(path)))
    assert cfg.levels == [2, 3] and cfg.blocks[0].betas == [1.0]
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "missing.yaml"))


def test_cli_spectrum_single_level(capsys):
    code, out, _ = _run(["--config", "table1", "--levels", "2"], capsys)
    rows = _csv(out)
    assert code == 0 and len(rows) == 1
    assert rows[0]["ratio"] == ""
    assert float(rows[0]["d_h"]) == pytest.approx(1.0274e-4, rel=0.1)
    for key in ("level", "h", "beta", "gamma_u", "gamma_p", "d_h", "d_tilde"):
        assert key in rows[0]


def test_cli_spectrum_table2_ratios(capsys):
    code, out, _ = _run(["--config", "table2", "--levels", "2..4"], capsys)
    ratios = [float(r["ratio"]) for r in _csv(out)[1:]]
    assert code == 0 and all(3 <= r <= 4.2 for r in ratios)


def test_cli_json_schema_and_determinism(tmp_path, capsys):
    argv = ["--experiment", "solve", "--level", "3", "--num-levels", "1,2",
            "--beta", "1e-3", "--format", "json", "--out"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run(argv + [str(a)], capsys)[0] == 0
    assert _run(argv + [str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema_version"] == 1 and doc["ok"]
    row = doc["rows"][0]
    assert row["residual_history"][0] == 1.0
    for key in ("beta", "gamma_u", "gamma_p", "strategy", "tol", "max_iter",
                "num_levels", "level"):
        assert key in row


def test_cli_large_beta(capsys):
    code, out, _ = _run(["--experiment", "solve", "--level", "4",
                         "--num-levels", "1,2,3", "--beta", "1e3"], capsys)
    assert code == 0
    assert all(int(r["iterations"]) <= 2 for r in _csv(out))


def test_timing_accounting(capsys):
    code, out, _ = _run(["--experiment", "timing", "--level", "4",
                         "--num-levels", "1,2", "--beta", "1e-5"], capsys)
    rows = _csv(out)
    plain, two = rows
    assert int(plain["fine_stokes_solves"]) == 2 * int(plain["iterations"]) + 1
    assert int(two["fine_stokes_solves"]) < int(plain["fine_stokes_solves"])
    assert float(two["setup_time"]) >= 0


def test_nc_marker(capsys):
    code, out, _ = _run(["--experiment", "solve", "--level", "4",
                         "--num-levels", "1", "--beta", "1e-7",
                         "--max-iter-unpreconditioned", "3"], capsys)
    (row,) = _csv(out)
    assert code == 0 and row["result"] == "nc" and row["converged"] == "False"


def test_cell_failure_recorded(monkeypatch, capsys):
    real = experiments.build_preconditioner

    def flaky(level, num, params, cache):
        if num == 2:
            raise ConfigurationError("simulated guard")
        return real(level, num, params, cache)

    monkeypatch.setattr(experiments, "build_preconditioner", flaky)
    code, out, err = _run(["--experiment", "solve", "--level", "3",
                           "--num-levels", "1,2", "--beta", "1e-3"], capsys)
    rows = _csv(out)
    assert code == 1 and len(rows) == 2
    assert rows[0]["result"] != "error" and rows[1]["result"] == "error"
    assert "simulated guard" in err


def test_recovery(capsys):
    code, out, _ = _run(["--experiment", "recovery", "--level", "5",
                         "--num-levels", "2", "--gamma-u", "1",
                         "--gamma-p", "0", "--beta", "1e-7"], capsys)
    (row,) = _csv(out)
    assert float(row["E_u"]) == pytest.approx(1.88e-3, rel=0.05)
    assert float(row["E_p"]) == pytest.approx(1.0, abs=0.01)


def test_validate_passes(capsys):
    code, out, _ = _run(["--config", "validate", "--levels", "3..5"], capsys)
    rows = _csv(out)
    assert code == 0 and all(r["passed"] == "True" for r in rows)


def test_validate_failure_exit_code(monkeypatch, capsys):
    from stokesmg.validation import CheckResult
    monkeypatch.setattr(experiments, "zero_target_check",
                        lambda *a, **k: CheckResult("broken invariant", 1.0, 0.0))
    code, _, err = _run(["--config", "validate", "--levels", "3..5"], capsys)
    assert code == 1 and "broken invariant" in err


def test_config_error_exit_code(capsys):
    code, _, err = _run(["--experiment", "solve", "--level", "7",
                         "--beta", "1e-4"], capsys)
    assert code == 2 and "heavy" in err
