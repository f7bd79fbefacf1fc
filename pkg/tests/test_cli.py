import numpy as np
import pytest

from strat_lab.cli import TRAJECTORY_HEADER, main, resolve_workers
from strat_lab.harness import parse_report

CONFIG = """
[scenario]
id = cli
[params]
nu = 1e-2
kappa = 1e-2
beta = 1
[modes]
k = 0, 1
l = 1
eta = 0, 1
[ic]
u2 = 0, 1, 1
[checks]
enabled = envelopes, divergence, liftup_baseline
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(CONFIG)
    return path


def test_run_writes_report_and_trajectories(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--workers", "1", "--out", str(out), "--dump-trajectories"]) == 0
    rows = parse_report((out / "report.csv").read_text())
    assert len(rows) == 6 and all(r.passed and r.wall_ms == 0 for r in rows)
    files = sorted((out / "trajectories").glob("*.csv"))
    assert [f.name for f in files] == ["cli_k1_l1_eta0.csv", "cli_k1_l1_eta1.csv"]
    assert files[0].read_text().splitlines()[0] == TRAJECTORY_HEADER
    data = np.loadtxt(files[0], delimiter=",", skiprows=1)
    assert data.shape[1] == 12 and data[0, 0] == 0


def test_run_jsonl_to_stdout(cfg_path, capsys):
    assert main(["run", str(cfg_path), "--workers", "1", "--format", "jsonl", "--timings"]) == 0
    rows = parse_report(capsys.readouterr().out, "jsonl")
    assert len(rows) == 6 and all(r.wall_ms > 0 for r in rows)


def test_run_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[params]\nnu = x\n")
    assert main(["run", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    failing = tmp_path / "fail.cfg"
    failing.write_text(CONFIG.replace("liftup_baseline", "energy_identity\nidentity_dt = 10"))
    assert main(["run", str(failing), "--workers", "1"]) == 1


def test_thread_override(monkeypatch):
    monkeypatch.delenv("STRAT_LAB_THREADS", raising=False)
    assert resolve_workers(3) == 3
    assert resolve_workers(None) >= 1
    monkeypatch.setenv("STRAT_LAB_THREADS", "2")
    assert resolve_workers(8) == 2
    monkeypatch.setenv("STRAT_LAB_THREADS", "many")
    with pytest.raises(SystemExit):
        resolve_workers(1)


def test_baseline_liftup(capsys):
    assert main(["baseline-liftup", "--nu", "1e-2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "nu,baseline_peak,1/(e nu),stratified_sup"
    nu, peak, exact, strat = map(float, lines[1].split(","))
    assert peak == pytest.approx(exact, rel=1e-2) and strat < 8


def test_verify_streaks_coarse(capsys):
    assert main(["verify-streaks", "--grid", "coarse"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("ok") == 5
