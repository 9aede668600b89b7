import json
import os

import pytest
import yaml

from dcee import default_config
from dcee.cli import main


@pytest.fixture
def cfg_path(tmp_path):
    d = default_config()
    d["horizon_s"] = 20.0
    path = tmp_path / "scenario.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(d, fh)
    return str(path)


def test_run_writes_csv(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["run", cfg_path, "--out", out, "--format", "csv"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "run.csv"))
    assert "run[numerical_dcee]" in capsys.readouterr().out


def test_run_writes_json(cfg_path, tmp_path):
    out = str(tmp_path / "out")
    rc = main(["run", cfg_path, "--out", out, "--format", "json"])
    assert rc == 0
    with open(os.path.join(out, "run.json"), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    assert "metrics" in payload and "timing" in payload and "config" in payload


def test_run_seed_override_changes_output(cfg_path, tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["run", cfg_path, "--out", out_a, "--seed", "1"]) == 0
    assert main(["run", cfg_path, "--out", out_b, "--seed", "2"]) == 0
    with open(os.path.join(out_a, "run.csv"), "rb") as fh:
        a = fh.read()
    with open(os.path.join(out_b, "run.csv"), "rb") as fh:
        b = fh.read()
    assert a != b


def test_run_byte_identical_replay(cfg_path, tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    assert main(["run", cfg_path, "--out", out_a]) == 0
    assert main(["run", cfg_path, "--out", out_b]) == 0
    with open(os.path.join(out_a, "run.csv"), "rb") as fh:
        a = fh.read()
    with open(os.path.join(out_b, "run.csv"), "rb") as fh:
        b = fh.read()
    assert a == b


def test_run_requires_config():
    assert main(["run"]) == 2


def test_compare(cfg_path, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DCEE_THREADS", "2")
    out = str(tmp_path / "cmp")
    rc = main(["compare", cfg_path, "--controllers", "numerical_dcee,esc", "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "compare[numerical_dcee]" in text and "compare[esc]" in text
    with open(os.path.join(out, "compare_summary.json"), "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    assert set(summary) == {"numerical_dcee", "esc"}
    assert os.path.exists(os.path.join(out, "compare_numerical_dcee.csv"))


def test_compare_rejects_unknown_controller(cfg_path):
    assert main(["compare", cfg_path, "--controllers", "numerical_dcee,banana"]) == 2


def test_bench(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "bench")
    rc = main(["bench", cfg_path, "--reps", "1", "--out", out])
    assert rc == 0
    assert "bench[analytic_gn]" in capsys.readouterr().out
    with open(os.path.join(out, "bench.json"), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    assert "timing" in payload and "speedup_vs_analytic" in payload


def test_audit(cfg_path, tmp_path, capsys):
    out = str(tmp_path / "audit")
    rc = main(["audit", cfg_path, "--samples", "25", "--out", out])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out.split("wrote")[0])
    assert payload["passed"] is True
    assert os.path.exists(os.path.join(out, "audit.json"))
