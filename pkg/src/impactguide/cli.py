"""Command-line entry point: ``impactguide run | paper-suite | list-suites``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ExperimentSuite, override, parse_config
from .runner import (ConfigError, check_feasible, effort_table, run_batch,
                     write_metrics_csv, write_trajectory_csv)
from .suites import SUITES, expected_checks

log = logging.getLogger("impactguide")

# plot_data/<label>/<file>: columns derived from a trajectory record
PLOT_FILES = {
    "trajectory_xy.csv": ("x", "y"),
    "time_to_go.csv": ("t", "t_go", "t_go_d", "t_go_max", "t_go_min"),
    "accel_sigma.csv": ("t", "a_M", "a_M_achieved", "sigma"),
    "command.csv": ("t", "a_M_c"),
}


def _plot_row(rec) -> dict:
    t_go_d = rec.t_go - rec.rho
    return {
        "t": rec.t, "x": rec.x, "y": rec.y, "sigma": rec.sigma,
        "a_M": rec.a_M, "a_M_achieved": rec.a_M_achieved, "a_M_c": rec.a_M_c,
        "t_go": rec.t_go, "t_go_d": t_go_d,
        "t_go_max": rec.rho1 + t_go_d, "t_go_min": rec.rho2 + t_go_d,
    }


def write_plot_data(root: Path, label: str, records) -> None:
    d = root / "plot_data" / label
    d.mkdir(parents=True, exist_ok=True)
    rows = [_plot_row(r) for r in records]
    for name, cols in PLOT_FILES.items():
        with open(d / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([repr(row[c]) for c in cols])


def execute(suite: ExperimentSuite, out: Path, workers: int, extra_checks=None) -> int:
    """Run a suite, write every artifact under ``out`` and report; returns the exit status."""
    for s in suite.scenarios:
        try:
            check_feasible(s)
        except ConfigError as exc:
            raise ConfigError(f"scenario {s.label}: {exc}") from None
    out.mkdir(parents=True, exist_ok=True)
    results = run_batch(suite.scenarios, workers=workers, with_trajectories=True)
    metrics = [m for m, _ in results]

    (out / "trajectories").mkdir(exist_ok=True)
    for m, records in results:
        if records:
            write_trajectory_csv(out / "trajectories" / f"{m.label}.csv", records)
            write_plot_data(out, m.label, records)
    write_metrics_csv(out / "metrics.csv", metrics)
    csv_text, table = effort_table(metrics)
    (out / "effort_table.csv").write_text(csv_text, encoding="utf-8")
    (out / "effort_table.txt").write_text(table, encoding="utf-8")

    checks = expected_checks(suite, metrics)
    if extra_checks is not None:
        checks += extra_checks(metrics)
    with open(out / "checks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("check", "passed", "detail"))
        w.writerows(checks)

    print(f"suite {suite.name}: {len(metrics)} scenario(s) -> {out}")
    print(table, end="")
    failed_runs = [m for m in metrics if not m.success]
    for m in failed_runs:
        print(f"RUN FAILED {m.label}: {m.status}")
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    n_bad = sum(not ok for _, ok, _ in checks)
    if failed_runs or n_bad:
        print(f"{len(failed_runs)} failed run(s), {n_bad} failed check(s)")
        return 1
    return 0


def cmd_run(args) -> int:
    suite = override(parse_config(args.config), dt=args.dt, seed=args.seed)
    if args.seed is not None and all(s.noise is None for s in suite.scenarios):
        log.warning("--seed has no effect: no scenario enables noise")
    out = Path(args.out) if args.out else Path("out") / suite.name
    return execute(suite, out, args.workers)


def cmd_paper_suite(args) -> int:
    entry = SUITES.get(args.name)
    if entry is None:
        print(f"unknown suite {args.name!r}; valid names: {', '.join(SUITES)}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path("out") / entry.name
    return execute(entry.build(), out, args.workers, entry.check)


def cmd_list_suites(args) -> int:
    width = max(map(len, SUITES))
    for name, entry in SUITES.items():
        print(f"{name.ljust(width)}  {entry.summary}")
    return 0


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impactguide",
                                description="Impact-time guidance engagement simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the scenarios of a YAML config file")
    r.add_argument("config", help="path to the YAML config")
    r.add_argument("--out", help="output directory (default: out/<suite name>)")
    r.add_argument("--workers", type=_positive(int), default=1, help="parallel processes")
    r.add_argument("--dt", type=_positive(float), help="override the integration step, s")
    r.add_argument("--seed", type=_u64, help="override the noise seed of noisy scenarios")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("paper-suite", help="run a bundled suite and its checks")
    s.add_argument("name", help="suite name, see list-suites")
    s.add_argument("--out", help="output directory (default: out/<suite name>)")
    s.add_argument("--workers", type=_positive(int), default=1, help="parallel processes")
    s.set_defaults(func=cmd_paper_suite)

    ls = sub.add_parser("list-suites", help="list the bundled suites")
    ls.set_defaults(func=cmd_list_suites)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
