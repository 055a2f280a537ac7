import json
import subprocess
import sys

import pytest

from daor.cli import main


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_design_json_to_file(tmp_path):
    out = tmp_path / "d.json"
    cfg = write(tmp_path, {"gamma_th_list": [0.0]})
    assert main(["design", "--config", cfg, "--seed", "4", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["strategy"] == "WaterFill" and rec["master_seed"] == 4


def test_design_csv(tmp_path, capsys):
    assert main(["design", "--config", write(tmp_path, {"gamma_th_list": [0.0]}), "--format", "csv"]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header.startswith("schema_version,command,timestamp")


def test_exit_code_config_error(tmp_path, capsys):
    assert main(["design", "--config", write(tmp_path, {"design": {"n_streams": 99}})]) == 2
    assert "n_streams" in capsys.readouterr().err
    assert main(["sweep", "--trials", "0"]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2


def test_exit_code_infeasible(tmp_path):
    assert main(["design", "--config", write(tmp_path, {"gamma_th_list": [1e9]})]) == 3


def test_overrides_apply(tmp_path, capsys):
    cfg = write(tmp_path, {"channel": {"n_t": 6, "n_r": 4}, "design": {"n_streams": 2}, "gamma_th_list": [1.0]})
    assert main(["sweep", "--config", cfg, "--trials", "2", "--strategy", "ss", "--q", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    calls = [l for l in lines if ",solver_calls," in l][0]
    assert calls.split(",")[3] == "3.0" and calls.split(",")[5] == "2"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "daor.cli", "bounds", "--trials", "2"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("snr_db,metric,mean,std,trials\n")
