"""Command-line entry point: ``strat-lab {run, verify-streaks, verify-envelopes, baseline-liftup}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import StratLabError
from .harness import _nonzero_initial, all_passed, emit_report, parse_config, run_sweep
from .nonzero import integrate_mode
from .verification import liftup_comparison, matrix_identity_errors, verify_envelopes, verify_streaks

TRAJECTORY_HEADER = ("t,re_q,im_q,re_theta,im_theta,re_u1,im_u1,re_u3,im_u3,"
                     "sym_norm2,energy,envelope")

log = logging.getLogger("strat_lab")


def resolve_workers(requested):
    """``STRAT_LAB_THREADS`` wins over ``--workers``; default is all cores."""
    env = os.environ.get("STRAT_LAB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise SystemExit(f"STRAT_LAB_THREADS must be an integer, got {env!r}")
        return max(1, value)
    if requested is not None:
        return max(1, requested)
    return os.cpu_count() or 1


def dump_trajectories(config, out_dir: Path):
    """Write one CSV per nonzero (k, l, eta) sample of the scenario."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for k, l, eta in config.mode_list():
        if k == 0:
            continue
        mode, state = _nonzero_initial(config, k, l, eta)
        traj = integrate_mode(state, mode, config.params, config.integrator)
        s, d = traj.states, traj.diagnostics
        cols = [traj.times]
        for name in ("q", "theta", "u1", "u3"):
            v = np.asarray(getattr(s, name))
            cols += [v.real, v.imag]
        cols += [d["sym_norm2"], d["energy"], d["envelope_sym"]]
        path = out_dir / f"{config.scenario_id}_k{k}_l{l}_eta{eta:g}.csv"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=TRAJECTORY_HEADER,
                   comments="", fmt="%.17g")
        written.append(path)
    return written


def cmd_run(args) -> int:
    try:
        config = parse_config(Path(args.config).read_text())
    except (OSError, StratLabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for warning in config.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    rows = run_sweep(config, resolve_workers(args.workers), record_timing=args.timings)
    text = emit_report(rows, args.format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"report.{args.format}").write_text(text)
        if args.dump_trajectories:
            dump_trajectories(config, out / "trajectories")
    else:
        sys.stdout.write(text)
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed", file=sys.stderr)
    return 0 if all_passed(rows) else 1


def cmd_verify_streaks(args) -> int:
    res = verify_streaks(args.grid)
    mats = matrix_identity_errors()
    ok = res.max_rel_error <= 1e-8
    print(f"closed form vs numerical oracle: {res.n_cases} cases, max rel error {res.max_rel_error:.3e} "
          f"(min |c^2| {res.min_abs_c_squared:.2e}) {'ok' if ok else 'FAIL'}")
    limits = {"exp_M": 1e-10, "coupling": 1e-9, "semigroup": 1e-10, "determinant": 1e-10}
    for name, err in mats.items():
        good = err <= limits[name]
        ok &= good
        print(f"{name}: {err:.3e} (limit {limits[name]:g}) {'ok' if good else 'FAIL'}")
    return 0 if ok else 1


def cmd_verify_envelopes(args) -> int:
    rows = verify_envelopes(resolve_workers(args.workers))
    failed = [r for r in rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.scenario} k={r.mode_k} l={r.mode_l} eta={r.eta:g} {r.check}: {r.statistic:.3e}")
    print(f"{len(rows) - len(failed)}/{len(rows)} envelope and divergence checks passed")
    return 0 if not failed else 1


def cmd_baseline_liftup(args) -> int:
    rows = liftup_comparison(tuple(args.nu), args.beta)
    print("nu,baseline_peak,1/(e nu),stratified_sup")
    ok = True
    for r in rows:
        ok &= abs(r.baseline_peak - r.baseline_exact) <= 1e-2 * r.baseline_exact
        print(f"{r.nu:g},{r.baseline_peak:.6g},{r.baseline_exact:.6g},{r.stratified_sup:.6g}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strat-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every enabled check of a scenario file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--out", default=None, help="directory for report.{csv,jsonl}; stdout if omitted")
    run.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    run.add_argument("--dump-trajectories", action="store_true")
    run.add_argument("--timings", action="store_true",
                     help="record wall_ms per task (output is then no longer byte-reproducible)")
    run.set_defaults(func=cmd_run)

    vs = sub.add_parser("verify-streaks", help="closed-form streak solution against numerical integration")
    vs.add_argument("--grid", choices=("coarse", "fine"), default="fine")
    vs.set_defaults(func=cmd_verify_streaks)

    ve = sub.add_parser("verify-envelopes", help="envelope dominance over the standard scenario suite")
    ve.add_argument("--workers", type=int, default=None)
    ve.set_defaults(func=cmd_verify_envelopes)

    bl = sub.add_parser("baseline-liftup", help="unstratified lift-up peak against the stratified sup")
    bl.add_argument("--nu", type=float, nargs="+", default=[1e-2, 1e-3])
    bl.add_argument("--beta", type=float, default=1.0)
    bl.set_defaults(func=cmd_baseline_liftup)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
