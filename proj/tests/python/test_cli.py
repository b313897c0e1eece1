import csv
import json
import os
import subprocess

import pytest

CLI = os.environ.get("FRM_CLI")
CONFIGS = os.environ.get("FRM_CONFIGS", "")

pytestmark = pytest.mark.skipif(not CLI, reason="FRM_CLI not set")


def run(*args):
    return subprocess.run([CLI, *args], capture_output=True, text=True)


def small_config(tmp_path, **changes):
    with open(os.path.join(CONFIGS, "default.json")) as f:
        cfg = json.load(f)
    cfg["horizon_days"] = 1
    cfg.update(changes)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_missing_config_names_path(tmp_path):
    missing = str(tmp_path / "nope.json")
    r = run("simulate", "--config", missing, "--out", str(tmp_path / "o"))
    assert r.returncode == 2
    assert missing in r.stderr


def test_invalid_config_exits_1(tmp_path):
    cfg = small_config(tmp_path, horizon_days=-3)
    assert run("validate-config", "--config", cfg).returncode == 1


def test_unknown_field_exits_2(tmp_path):
    cfg = small_config(tmp_path, bogus=True)
    r = run("validate-config", "--config", cfg)
    assert r.returncode == 2
    assert "bogus" in r.stderr


def test_simulate_and_report(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "run"
    r = run("simulate", "--config", cfg, "--out", str(out), "--seed", "7")
    assert r.returncode == 0, r.stderr
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7
    with open(out / "metrics.csv") as f:
        rows = list(csv.DictReader(f))
    assert {row["metric"] for row in rows} >= {"time_at_ord_ge4_min", "incautious_event_rate"}
    r = run("report", "--log", str(out / "events.jsonl"), "--metrics", str(out / "metrics.csv"))
    assert r.returncode == 0, r.stderr
    assert "# conservation\nok" in r.stdout


def test_simulate_twice_same_bytes(tmp_path):
    cfg = small_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("simulate", "--config", cfg, "--out", str(d), "--seed", "3").returncode == 0
    assert (a / "events.jsonl").read_bytes() == (b / "events.jsonl").read_bytes()


def test_bad_toggle_exits_1(tmp_path):
    cfg = small_config(tmp_path)
    r = run("simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--toggle", "nope=off")
    assert r.returncode != 0


def test_truncated_log_reports_line(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "run"
    assert run("simulate", "--config", cfg, "--out", str(out)).returncode == 0
    text = (out / "events.jsonl").read_text()
    bad = tmp_path / "bad.jsonl"
    bad.write_text(text[: len(text) - 10])
    r = run("report", "--log", str(bad))
    assert r.returncode == 2
    n = text.count("\n")
    assert f"line {n}" in r.stderr


def test_plan_rotation(tmp_path):
    out = tmp_path / "plan.csv"
    r = run("plan-rotation", "--current", "08:00", "--target", "12:00", "--max-step", "120",
            "--out", str(out))
    assert r.returncode == 0
    assert "+120" in r.stdout or "120" in out.read_text()
    assert run("plan-rotation", "--current", "08:00", "--target", "05:00").returncode == 1
    assert run("plan-rotation", "--current", "08:00", "--target", "05:00",
               "--extended-rest").returncode == 0
    assert run("plan-rotation", "--current", "8am", "--target", "05:00").returncode == 2
