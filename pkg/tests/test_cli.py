import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from coopsim import cli
from coopsim.model import LocalMode, SimConfig, save_config

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONF = ROOT / "configs" / "default.conf"


@pytest.fixture
def small_conf(tmp_path):
    path = tmp_path / "small.conf"
    save_config(SimConfig(horizon=300, cellular_loss_prob=0.2), path)
    return path


def test_validate_shipped_default(capsys):
    assert cli.main(["validate", str(DEFAULT_CONF)]) == cli.EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_validate_rejects_bad_values(tmp_path, capsys):
    path = tmp_path / "bad.conf"
    path.write_text("horizon = 0\nbeta = 5\n")
    assert cli.main(["validate", str(path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "horizon" in err and "beta exceeds capacity" in err


def test_unreadable_config(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "gone.conf")]) == cli.EXIT_CONFIG
    assert "cannot read config file" in capsys.readouterr().err


def test_unknown_preset(tmp_path, capsys):
    assert cli.main(["preset", "fig9", "--out-dir", str(tmp_path)]) == cli.EXIT_PRESET
    assert "unknown preset 'fig9'" in capsys.readouterr().err


def test_unwritable_out_dir(small_conf, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = cli.main(["run", str(small_conf), "--out-dir", str(blocker / "sub")])
    assert code == cli.EXIT_OUTPUT
    assert "not writable" in capsys.readouterr().err


def test_usage_error_is_distinct():
    assert cli.main(["run"]) == cli.EXIT_USAGE
    assert cli.main(["preset", "fig4-queues", "--jobs", "0"]) == cli.EXIT_USAGE


def test_run_twice_is_byte_identical(small_conf, tmp_path):
    outputs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        for fmt in ("csv", "json"):
            assert cli.main(["run", str(small_conf), "--seed", "7", "--format", fmt,
                             "--out-dir", str(out)]) == 0
        outputs.append(((out / "small_trace.csv").read_bytes(),
                        (out / "small_summary.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_run_overrides_seed_and_horizon(small_conf, tmp_path):
    cli.main(["run", str(small_conf), "--horizon", "40", "--seed", "3",
              "--out-dir", str(tmp_path)])
    with open(tmp_path / "small_trace.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == 41


def test_overhead_preset(tmp_path):
    assert cli.main(["preset", "fig3c-overhead", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "fig3c-overhead.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["N", "scheme", "overhead_percent"]
    at50 = {r["scheme"]: float(r["overhead_percent"]) for r in rows if r["N"] == "50"}
    assert at50 == {"DcC": 0.4, "ScC": 20.0}


def test_simulated_preset_jobs_do_not_change_files(tmp_path):
    args = ["preset", "fig4-queues", "--horizon", "200", "--replications", "2"]
    assert cli.main(args + ["--out-dir", str(tmp_path / "serial")]) == 0
    assert cli.main(args + ["--out-dir", str(tmp_path / "par"), "--jobs", "2"]) == 0
    serial = (tmp_path / "serial" / "fig4-queues.csv").read_bytes()
    assert serial == (tmp_path / "par" / "fig4-queues.csv").read_bytes()
    header = serial.decode().splitlines()[0].split(",")
    assert header[:4] == ["N", "scheme", "mode", "replications"]
    assert "mean_rate_mean" in header and "mean_rate_std" in header


def test_preset_json_format(tmp_path):
    assert cli.main(["preset", "oracle-gap", "--horizon", "100", "--replications", "1",
                     "--format", "json", "--out-dir", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "oracle-gap.json").read_text())
    assert [r["M"] for r in rows] == [5.0, 50.0, 500.0] * 2
    assert all("utility_gap_mean" in r for r in rows)


def test_oracle_command_on_instance_and_config(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"n_devices": 3, "mode": "Broadcast",
                                "cellular": 1.0, "local": 1.0}))
    assert cli.main(["oracle", str(inst)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["y_star"] == pytest.approx([5 / 3] * 3)
    conf = tmp_path / "u.conf"
    save_config(SimConfig(local_mode=LocalMode.UNICAST), conf)
    assert cli.main(["oracle", str(conf)]) == 0
    assert json.loads(capsys.readouterr().out)["y_star"] == pytest.approx([4 / 3] * 3)


def test_oracle_command_errors(tmp_path, capsys):
    assert cli.main(["oracle", str(tmp_path / "none.json")]) == cli.EXIT_ORACLE
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"n_devices": 8, "mode": "Broadcast", "cellular": 1,
                               "local": 1}))
    assert cli.main(["oracle", str(big)]) == cli.EXIT_ORACLE
    assert "at most 6" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    done = subprocess.run([sys.executable, "-m", "coopsim", "validate", str(DEFAULT_CONF)],
                          capture_output=True, text=True, env=env)
    assert done.returncode == 0 and "ok" in done.stdout
