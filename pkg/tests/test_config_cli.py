import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
from conftest import torsion_case

from finsler_pohozaev import cli, config, identity_sides
from finsler_pohozaev.errors import ConfigParseError
from finsler_pohozaev.reporting import emit_convergence_table, observed_orders

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TORSION = """
[run]
version = 1
experiment = verify-identity
resolutions = {res}

[anisotropy]
kind = euclidean

[profile]
kind = power
p = {p}

[domain]
kind = disk

[source]
kind = constant

[field]
kind = torsion
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ------------------------------------------------------------------ parsing


@pytest.mark.parametrize(
    "text, match",
    [
        ("[anisotropy]\nkind = euclidean\n", "missing \\[run\\]"),
        ("[run]\nexperiment = solve\n", "explicit version"),
        ("[run]\nversion = 2\nexperiment = solve\n", "unsupported config version"),
        ("[run]\nversion = 1\nexperiment = dance\n", "experiment must be one of"),
        ("[run]\nversion = 1\nexperiment = solve\n", "needs section"),
        ("[run]\nversion = 1\nexperiment = critical-exponent\n[mystery]\nx = 1\n", "unknown section"),
        ("[run]\nversion = 1\nexperiment = critical-exponent\n[profile]\nkind = power\ncolour = red\n", "unknown key"),
        ("[run]\nversion = 1\nexperiment = critical-exponent\nresolutions = 4\n[profile]\np = 2\n", ">= 8"),
        ("[run]\nversion = 1\nexperiment = critical-exponent\nseed = x\n[profile]\np = 2\n", "\\[run\\]"),
        ("[run\nversion = 1\n", "."),
    ],
)
def test_parse_errors(text, match):
    with pytest.raises(ConfigParseError, match=match):
        config.parse_text(text)


def test_convergence_study_needs_two_resolutions():
    with pytest.raises(ConfigParseError, match="two resolutions"):
        config.parse_text(TORSION.format(res="64", p=2).replace("verify-identity", "convergence-study"))


def test_parse_lists_and_typed_thresholds():
    text = TORSION.format(res="16, 32; 64", p=3) + "[thresholds]\nresidual_rel = 1e-4\nexpect_condition = yes\n"
    cfg = config.parse_text(text)
    assert cfg.resolutions == [16, 32, 64]
    assert cfg.threshold("residual_rel", 1e-3) == 1e-4
    assert cfg.threshold("min_order", 1.5) == 1.5
    assert cfg.threshold("expect_condition", False) is True
    assert cfg.as_dict()["sections"]["profile"] == {"kind": "power", "p": "3"}


def test_load_missing_file():
    with pytest.raises(ConfigParseError, match="cannot read"):
        config.load("/nonexistent/run.ini")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    assert config.load(path).experiment in config.EXPERIMENTS


# -------------------------------------------------------------------- tables


def test_convergence_order_from_example_residuals():
    orders = observed_orders([1e-2, 2.5e-3, 6.3e-4], [1 / 64, 1 / 128, 1 / 256])
    assert orders[0] == pytest.approx(2.0, abs=1e-12)
    assert orders[1] == pytest.approx(2.0, abs=0.02)


def test_convergence_table_needs_two_reports():
    with pytest.raises(ValueError):
        emit_convergence_table([identity_sides(*torsion_case(2, 16))])


# ----------------------------------------------------------------------- CLI


def test_critical_exponent_prints_value(tmp_path, capsys):
    assert cli.main(["--config", str(CONFIGS / "critical.ini"), "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "5"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] is True
    assert report["results"]["critical_exponent"] == "5.0000000000000000e+00"


def test_supercritical_pair_exits_with_error_code(tmp_path, capsys):
    text = "[run]\nversion = 1\nexperiment = critical-exponent\ndimension = 3\n[profile]\nkind = power\np = 3\n"
    assert cli.main(["--config", write(tmp_path, text), "--out", str(tmp_path)]) == 3
    assert "SupercriticalDimensionPair" in capsys.readouterr().err
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["error"]["type"] == "SupercriticalDimensionPair"


def test_config_error_exit_code(tmp_path):
    assert cli.main(["--config", write(tmp_path, "[run]\nversion = 1\n"), "--out", str(tmp_path)]) == 2
    assert cli.main(["--config", str(CONFIGS / "critical.ini"), "--resolution", "4"]) == 2
    assert cli.main(["--config", str(CONFIGS / "torsion_p3.ini"), "--resolution", "64"]) == 2


def test_unknown_profile_kind_is_config_error(tmp_path):
    text = TORSION.format(res="16", p=2).replace("kind = power", "kind = orlicz")
    assert cli.main(["--config", write(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_failed_assertion_exit_code(tmp_path, capsys):
    text = TORSION.format(res="16, 32", p=2) + "[thresholds]\nresidual_rel = 1e-12\n"
    assert cli.main(["--config", write(tmp_path, text), "--out", str(tmp_path)]) == 1
    assert "residual_rel_top" in capsys.readouterr().err
    assert json.loads((tmp_path / "report.json").read_text())["passed"] is False


def test_verify_identity_writes_convergence_table(tmp_path):
    text = TORSION.format(res="32, 64, 128", p=2)
    assert cli.main(["--config", write(tmp_path, text), "--out", str(tmp_path / "out")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "convergence.csv")))
    assert [int(r["n_r"]) for r in rows] == [32, 64, 128]
    res = [float(r["residual_rel"]) for r in rows]
    assert res[0] > res[1] > res[2]
    assert float(rows[-1]["observed_order"]) >= 1.9


def test_resolution_override_and_field_csv(tmp_path):
    out = tmp_path / "solve"
    assert cli.main(["--config", str(CONFIGS / "solve_p3.ini"), "--out", str(out), "--resolution", "16"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["resolutions"] == [16]
    assert len((out / "field.csv").read_text().splitlines()) == 1 + 17 * 16


def test_deterministic_reports_are_byte_identical(tmp_path):
    text = TORSION.format(res="16, 32", p=3)
    cfg = write(tmp_path, text)
    for name in ("a", "b"):
        assert cli.main(["--config", cfg, "--out", str(tmp_path / name), "--deterministic", "--seed", "3"]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    report = json.loads(a)
    assert "timestamp" not in report and report["deterministic"] is True


def test_non_deterministic_report_has_timestamp(tmp_path):
    assert cli.main(["--config", str(CONFIGS / "critical.ini"), "--out", str(tmp_path)]) == 0
    assert "timestamp" in json.loads((tmp_path / "report.json").read_text())


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "finsler_pohozaev", "--config", str(CONFIGS / "critical.ini"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0 and out.stdout.strip() == "5"
