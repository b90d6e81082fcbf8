import csv
from pathlib import Path

import pytest

from impactguide.cli import PLOT_FILES, build_parser, main
from impactguide.suites import SUITES

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_list_suites(capsys):
    assert main(["list-suites"]) == 0
    out = capsys.readouterr().out
    for name in SUITES:
        assert name in out


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", str(CONFIGS / "minimal.yaml"), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "impact_time_s" in printed
    for name in ("metrics.csv", "effort_table.csv", "effort_table.txt", "checks.csv",
                 "trajectories/minimal.csv"):
        assert (out / name).is_file(), name
    for name, cols in PLOT_FILES.items():
        with open(out / "plot_data" / "minimal" / name, newline="") as fh:
            assert tuple(next(csv.reader(fh))) == cols
    first = (out / "metrics.csv").read_text()
    assert main(["run", str(CONFIGS / "minimal.yaml"), "--out", str(out)]) == 0
    assert (out / "metrics.csv").read_text() == first


def test_run_reports_expected_checks(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("expected:\n  - {scenario: c, metric: miss_distance, value: 0.001, op: lt}\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "FAIL c: miss_distance" in capsys.readouterr().out


def test_seed_and_dt_overrides(tmp_path):
    cfg = tmp_path / "n.yaml"
    cfg.write_text("engagement: {t_d: 42}\nnoise: {seed: 1}\nrun: {log_every: 1000}\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a), "--seed", "2"]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--seed", "3", "--dt", "0.002"]) == 0
    ra = list(csv.DictReader(open(a / "trajectories" / "n.csv")))
    rb = list(csv.DictReader(open(b / "trajectories" / "n.csv")))
    assert float(rb[1]["t"]) == pytest.approx(2.0)
    assert float(ra[1]["t"]) == pytest.approx(1.0)


def test_config_error_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("engagement:\n  r0: -1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "bad.yaml:2" in capsys.readouterr().err
    cfg.write_text("engagement: {t_d: 60}\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_unknown_suite_exits_2(capsys):
    assert main(["paper-suite", "nope"]) == 2
    assert "case1-headings" in capsys.readouterr().err


def test_argument_validation():
    p = build_parser()
    for argv in (["run", "x.yaml", "--seed", "-1"], ["run", "x.yaml", "--seed", str(2 ** 64)],
                 ["run", "x.yaml", "--dt", "0"], ["run", "x.yaml", "--workers", "0"], []):
        with pytest.raises(SystemExit):
            p.parse_args(argv)
    assert p.parse_args(["run", "x.yaml", "--seed", "0xff"]).seed == 255
