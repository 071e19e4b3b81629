"""Command line entry point: ``wasse run|sweep|anomaly|parse``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from wasse.case import parse_case
from wasse.errors import WasseError
from wasse.harness import (
    BASELINE,
    PROPOSED,
    AnomalySpec,
    Scenario,
    anomaly_experiment,
    format_armse_table,
    load_scenario,
    param_sweep,
    run_monte_carlo,
    write_outputs,
    write_kernel_shape_csv,
    write_recovery_csv,
    write_sweep_csv,
)
from wasse.truth import write_truth_csv, simulate


def _scenario(args) -> Scenario:
    sc = load_scenario(args.config) if args.config else Scenario()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.steps is not None:
        changes["steps"] = args.steps
    return sc.replace(**changes) if changes else sc


def _dump_truth(sc: Scenario, out: Path) -> None:
    grid = sc.build_grid()
    with open(out / "truth.csv", "w", newline="") as fh:
        for run in range(sc.runs):
            write_truth_csv(grid, simulate(grid, sc.steps, sc.noise, sc.seed, run, sc.process_noise), fh, run=run, header=run == 0)


def cmd_run(args) -> int:
    sc = _scenario(args)
    res = run_monte_carlo(sc, jobs=args.jobs, diagnostics=args.diagnostics)
    out = write_outputs(res, args.out, diagnostics=args.diagnostics)
    if args.dump_truth:
        _dump_truth(sc, out)
    sys.stdout.write(format_armse_table(res))
    if args.assert_ and PROPOSED in sc.algorithms and BASELINE in sc.algorithms:
        a, b = res.armse(PROPOSED), res.armse(BASELINE)
        worse = int((a > b).sum())
        if worse > a.size // 5:
            print(f"assertion failed: proposed worse than baseline on {worse} of {a.size} entries", file=sys.stderr)
            return 3
    return 0


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    sw = param_sweep(sc, bus=args.bus, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        write_sweep_csv(sw, fh)
    with open(out / "kernel_shape.csv", "w", newline="") as fh:
        write_kernel_shape_csv(fh, sc.filter.kernel, sw.xis)
    print("phase ARMSE (deg), rows gamma, columns xi")
    print("gamma\\xi " + " ".join(f"{x:>10.2f}" for x in sw.xis))
    for g, row in zip(sw.gammas, sw.phase):
        print(f"{g:>8.1f} " + " ".join(f"{v:>10.6f}" for v in row))
    g, x = sw.argmin()
    print(f"minimum at gamma={g}, xi={x}")
    if args.assert_ and sw.row_argmin().get(12.0) != 1.9:
        print("assertion failed: xi=1.9 is not the row minimum at gamma=12", file=sys.stderr)
        return 3
    return 0


def cmd_anomaly(args) -> int:
    sc = _scenario(args)
    if sc.anomaly is None:
        sc = sc.replace(anomaly=AnomalySpec())
    an = anomaly_experiment(sc, jobs=args.jobs)
    out = write_outputs(an.result, args.out)
    with open(out / "recovery.csv", "w", newline="") as fh:
        write_recovery_csv(an, fh)
    status = 0
    for q in ("magnitude", "phase"):
        prop = an.for_algorithm(PROPOSED, q)
        line = [f"{q}:"]
        for b, s in prop.items():
            rec = "-" if s.recovery_step is None else s.recovery_step - sc.anomaly.step
            line.append(f"bus {b} ratio {s.ratio:.3g} recovery +{rec}")
        print(" ".join(line))
        if args.assert_ and BASELINE in sc.algorithms:
            base = an.for_algorithm(BASELINE, q)
            better = sum(prop[b].ratio <= base[b].ratio for b in prop)
            if better < 0.6 * len(prop):
                status = 3
    return status


def cmd_parse(args) -> int:
    case = parse_case(Path(args.case).read_text())
    print(f"{args.case}: {len(case.buses)} buses, {len(case.branches)} branches, base {case.base_mva} MVA")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wasse", description="Robust distributed power-system state estimation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", help="scenario JSON file (defaults built in)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--runs", type=int, help="override Monte-Carlo run count")
        sp.add_argument("--steps", type=int, help="override step count")
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--assert", dest="assert_", action="store_true", help="nonzero exit on threshold breach")

    r = sub.add_parser("run", help="Monte-Carlo comparison")
    common(r, "out")
    r.add_argument("--dump-truth", action="store_true", help="also write truth.csv")
    r.add_argument("--diagnostics", action="store_true", help="also write diagnostics.csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="kernel (xi, gamma) sweep")
    common(s, "out-sweep")
    s.add_argument("--bus", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("anomaly", help="measurement-scaling anomaly experiment")
    common(a, "out-anomaly")
    a.set_defaults(func=cmd_anomaly)

    c = sub.add_parser("parse", help="validate a MATPOWER-style case file")
    c.add_argument("--case", required=True)
    c.set_defaults(func=cmd_parse)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (WasseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
