import json
import subprocess
import sys

import pytest

from bmodomain import artifacts
from bmodomain.cli import main, parse_number


def run(capsys, *argv):
    code = main(list(argv))
    err = capsys.readouterr().err
    return code, err


def test_parse_number():
    assert parse_number("1/128") == 1 / 128
    assert parse_number("inf") == float("inf")


def test_norm_of_constant(tmp_path, capsys):
    code, _ = run(capsys, "norm", "--function", "constant", "--function-params", '{"value": 3}',
                  "--lambda", "1/4", "--out", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "norm.json").read_text())["total"] == 3.0
    rows = artifacts.read_csv(tmp_path / "norm.csv")
    assert tuple(rows[0]) == artifacts.CSV_SCHEMAS["norm"]


def test_validation_exit_and_json_error(tmp_path, capsys):
    code, err = run(capsys, "norm", "--lambda", "0.01", "--out", str(tmp_path))
    assert code == 2
    doc = json.loads(err)
    assert doc["error"] == "validation" and doc["field"] == "lambda"


def test_usage_error_is_json(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["norm", "--no-such-flag"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_resolution_exit(tmp_path, capsys):
    code, err = run(capsys, "approximate", "--scheme", "lipschitz", "--params", "0.01", "--resolution", "1/32",
                    "--out", str(tmp_path))
    assert code == 3 and json.loads(err)["error"] == "resolution"


def test_not_evaluable_exit(tmp_path, capsys):
    code, err = run(capsys, "gamma", "--betas", "50,100", "--out", str(tmp_path))
    assert code == 4 and json.loads(err)["error"] == "not-evaluable"


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.5, "function": "constant", "resolution": "1/32"}))
    out = tmp_path / "o"
    code, _ = run(capsys, "norm", "--config", str(cfg), "--lambda", "0.25", "--out", str(out))
    assert code == 0
    eff = json.loads((out / "config.json").read_text())
    assert eff["lambda"] == "0.25" and eff["function"] == "constant" and eff["resolution"] == "1/32"
    cfg.write_text(json.dumps({"lambdaa": 1}))
    code, err = run(capsys, "norm", "--config", str(cfg), "--out", str(out))
    assert code == 2 and json.loads(err)["field"] == "config"


def test_outputs_are_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "omega", "--function", "sine", "--out", str(tmp_path / name))[0] == 0
        assert run(capsys, "approximate", "--scheme", "bounded", "--function", "log-distance",
                   "--out", str(tmp_path / name))[0] == 0
    for f in ("omega.csv", "approx.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("argv,files", [
    (["whitney", "--complement", "--resolution", "1/32"], ["whitney.svg", "whitney.json"]),
    (["extend", "--function", "constant", "--resolution", "1/128"],
     ["extension.bmog", "extension.bmog.json", "extension.svg"]),
    (["check-eps-delta", "--domain", "disk", "--pairs", "4", "--workers", "1"],
     ["witness.csv", "pairs.csv", "cigars.svg", "scan.json"]),
    (["oracle-compare", "--resolution", "1/32"], ["oracle.json"]),
    (["example", "--which", "2", "--counts", "2"], ["example2.csv", "gamma.csv"]),
])
def test_commands_write_artifacts(tmp_path, capsys, argv, files):
    code, err = run(capsys, *argv, "--out", str(tmp_path))
    assert code == 0, err
    for f in files + ["config.json"]:
        assert (tmp_path / f).exists()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bmodomain.cli", "norm", "--function", "constant",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
