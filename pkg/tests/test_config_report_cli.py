import json
import os

import pytest

from driftlab import cli, report
from driftlab.config import DEFAULT_SEED, ConfigError, ScenarioConfig, load_config, read_sections

GOOD = """
id = demo
ops = constants, radial

[grid]
n = 8
box = 2.0

[radial]
c = 0.5
points = 1024

[tol]
radial.threshold = 0.05
"""


def _load(text):
    return load_config(text, report.OP_PARAMS)


def test_config_round_trip():
    cfg = _load(GOOD)
    assert cfg.id == "demo" and cfg.ops == ["constants", "radial"]
    assert cfg.n == 8 and cfg.box == 2.0 and cfg.seed == DEFAULT_SEED
    assert cfg.params["radial"] == {"c": 0.5, "points": 1024}
    assert cfg.tolerances == {"radial.threshold": 0.05}


@pytest.mark.parametrize("text,path", [
    ("ops = constants\n[grid]\nsize = 3\n", "grid.size"),
    ("ops = constants\ncolour = red\n", "scenario.colour"),
    ("ops = constants\n[nowhere]\nx = 1\n", "nowhere"),
    ("ops = constants\n[constants]\nzeta = 1\n", "constants.zeta"),
    ("ops = constants\n[radial]\nc = 1\n", "radial"),
    ("ops = fly\n", "scenario.ops"),
    ("ops = constants\n[grid]\nn = many\n", "grid.n"),
    ("ops = constants\n[grid]\nboundary = robin\n", "grid.boundary"),
    ("ops = constants\n[tol]\nidentity = tight\n", "tol.identity"),
])
def test_config_errors_carry_key_path(text, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        _load(text)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        read_sections("id = a\n[scenario]\nid = b\n")


def test_seed_accepts_hex():
    assert _load("ops = constants\nseed = 0x10\n").seed == 16


@pytest.mark.parametrize("tol", [{"nope": 1.0}, {"radial.identity": 1.0}, {"kernels.margin": 0.0}])
def test_unknown_tolerances_rejected(tol):
    cfg = ScenarioConfig(ops=["constants"], n=8, box=2.0, tolerances=tol)
    with pytest.raises(ConfigError):
        report.run_scenario(cfg)


def test_empty_op_list_gives_empty_result():
    res = report.run_scenario(ScenarioConfig(ops=[], n=8, box=2.0))
    assert res.checks == [] and res.passed


def test_same_seed_bit_identical(tmp_path):
    cfg = ScenarioConfig(id="kern", ops=["kernels"], n=8, box=2.0,
                         params={"kernels": {"rho_points": 4, "zeta_points": 3}})
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        report.emit_report([report.run_scenario(cfg)], str(out))
        blobs.append((out / "index.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_single_result_writes_index_csv_svg(tmp_path):
    cfg = ScenarioConfig(id="reg", ops=["regularity"], n=16, box=2.0,
                         params={"regularity": {"mu": "4,16,64"}})
    files = report.emit_report([report.run_scenario(cfg)], str(tmp_path))
    names = sorted(os.path.basename(f) for f in files)
    assert "index.json" in names and "reg.csv" in names
    svgs = [n for n in names if n.endswith(".svg")]
    assert svgs
    text = (tmp_path / svgs[0]).read_text()
    assert "fitted slope" in text and "predicted slope" in text
    index = json.loads((tmp_path / "index.json").read_text())
    assert index["reg"]["status"] in ("pass", "fail") and "fits" in index["reg"]


def test_emit_needs_result(tmp_path):
    from driftlab.results import DomainError
    with pytest.raises(DomainError):
        report.emit_report([], str(tmp_path))


def test_cli_pass(capsys):
    assert cli.main(["constants", "--delta", "1.0"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_fail_on_tight_tolerance(capsys):
    code = cli.main(["radial", "--points", "1024", "--tol", "radial.residual=1e-30"])
    assert code == 1


@pytest.mark.parametrize("argv", [["constants", "--bogus"], ["fly"], ["constants", "--tol", "x"],
                                  ["report", "--suite", "other"]])
def test_cli_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [["constants", "--tol", "nope=1"],
                                  ["constants", "--grid", "0"],
                                  ["constants", "--drift", "wiggly"],
                                  ["report", "--suite", "acceptance", "--only", "C99"],
                                  ["report", "--suite", "acceptance", "--tol", "C01.bogus=1"]])
def test_cli_config_errors(argv, capsys):
    assert cli.main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_cli_json_deterministic(capsys):
    outs = []
    for _ in range(2):
        cli.main(["kernels", "--rho-points", "4", "--zeta-points", "3", "--json"])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    assert "runtime" not in json.loads(outs[0])


def test_cli_run_config(tmp_path, capsys):
    path = tmp_path / "s.ini"
    path.write_text(GOOD)
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--out", str(out)]) == 0
    assert (out / "index.json").exists() and (out / "demo.csv").exists()


def test_cli_report_subset(capsys):
    assert cli.main(["report", "--suite", "acceptance", "--only", "C02,C14"]) == 0
    out = capsys.readouterr().out
    assert "C02 PASS" in out and "C14 PASS" in out


def test_cli_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["constants", "--out", str(blocker / "sub")]) == 2
