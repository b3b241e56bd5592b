import subprocess
import sys
from pathlib import Path

import pytest

from rtbyzcast.cli import main

LOSSLESS = """
params: {n: 4, R: 4}
broadcasts:
  - {sender: 0, round: 1, value: hello}
"""

EQUIVOCATE = """
params: {n: 4, R: 4}
adversary: {count: 1, kind: equivocate, targets: first-k}
broadcasts:
  - {sender: 0, round: 1, value: x}
  - {sender: 2, round: 3, value: y}
"""

GRID = """
seed: 3
reps: 1000
reliability: {sizes: [5, 10], p_loss: [0.3, 0.6], R: [5, 10]}
shutdown: {p_crash: [0.0001, 0.01, 0.5], f: [1]}
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_run_lossless_exit_zero(tmp_path):
    out = tmp_path / "ev.csv"
    assert main(["run", str(write(tmp_path, "s.yaml", LOSSLESS)), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "round,node,direction,kind,instance,value,signer_count"
    delivers = [r for r in rows if ",deliver," in r]
    assert len(delivers) == 4
    assert all(int(r.split(",")[0]) <= 1 + 3 * 4 for r in delivers)


def test_run_unknown_key_exit_two(tmp_path):
    bad = write(tmp_path, "bad.yaml", LOSSLESS + "bogus: 1\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "x.csv")]) == 2


def test_run_missing_file_exit_two(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_run_equivocation_passes_monitors(tmp_path):
    assert main(["run", str(write(tmp_path, "e.yaml", EQUIVOCATE)), "--out", str(tmp_path / "e.csv"), "--messages"]) == 0


def test_run_reports_violation(tmp_path, monkeypatch):
    from rtbyzcast import monitors

    def fake(world):
        rep = monitors.Report()
        rep.add("agreement", "injected")
        return rep

    monkeypatch.setattr("rtbyzcast.scenario.check_world", fake)
    assert main(["run", str(write(tmp_path, "s.yaml", LOSSLESS)), "--out", str(tmp_path / "o.csv")]) == 1


def test_experiment_grid_rows_and_determinism(tmp_path):
    spec = write(tmp_path, "g.yaml", GRID)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", str(spec), "--out", str(a)]) == 0
    assert main(["experiment", str(spec), "--out", str(b)]) == 0
    rel = (a / "reliability.csv").read_text().splitlines()
    assert len(rel) == 1 + 8
    for name in ("reliability", "shutdown", "window", "latency", "bandwidth"):
        assert (a / f"{name}.csv").read_bytes() == (b / f"{name}.csv").read_bytes()


def test_experiment_rejects_non_bursty_ge(tmp_path):
    spec = write(tmp_path, "ge.yaml", "reliability: {sizes: [5], R: [5], model: gilbert-elliot, ge: [[0.7, 0.4]], bursty: true}\n")
    assert main(["experiment", str(spec), "--out", str(tmp_path / "o")]) == 2


def test_experiment_unwritable_out(tmp_path):
    spec = write(tmp_path, "g.yaml", "shutdown: {p_crash: [0.5]}\n")
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["experiment", str(spec), "--out", str(blocker / "sub")]) == 2


def test_usage_error_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_entry_point(tmp_path):
    spec = write(tmp_path, "s.yaml", LOSSLESS)
    res = subprocess.run([sys.executable, "-m", "rtbyzcast", "run", str(spec), "--out", str(tmp_path / "o.csv")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "all properties hold" in res.stderr
