"""Command-line entry point: ``lifeins <command> ...``.

Exit codes: 0 success, 2 usage, 3 parse error, 4 validation error,
5 infeasible scenario, 6 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import lifetable, loads, mortality, profiles, scenario, solver

log = logging.getLogger("lifeins")

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NONCONVERGENCE = 0, 3, 4, 5, 6


def fmt(v) -> str:
    """Six significant digits; integers and strings pass through."""
    if isinstance(v, (str, int, np.integer)) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if np.isnan(v):
        return ""
    out = f"{v:.6g}"
    return "0" if out == "-0" else out


def write_csv(rows: list[dict], dest) -> None:
    """Write dict rows with formatted numbers to a path, or stdout for None/'-'."""
    if not rows:
        return
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow([fmt(v) for v in row.values()])
    if dest is None or str(dest) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        Path(dest).write_text(buf.getvalue())


# ---- calibrate ----------------------------------------------------------------

def cmd_calibrate(args) -> int:
    text = Path(args.lifetable).read_text()
    table = lifetable.aggregate(lifetable.parse_life_tables(text), a=args.a)
    res = mortality.calibrate(table)
    print(f"least squares  b={fmt(res.lm_estimate[0])} m={fmt(res.lm_estimate[1])} "
          f"residual={fmt(res.lsq_residual_norm)}")
    print(f"max likelihood b={fmt(res.mle_estimate[0])} m={fmt(res.mle_estimate[1])} "
          f"alpha={fmt(res.alpha)} beta={fmt(res.beta_rate)}")
    print(f"blended        b={fmt(res.blended.b)} m={fmt(res.blended.m)}")
    if args.out:
        t = np.asarray(table.ages, float) - lifetable.FIRST_AGE
        fitted = res.blended
        rate = np.full(len(t), np.nan)
        ok = np.isfinite(table.exposure) & (table.exposure > 0)
        rate[ok] = table.deaths[ok] / table.exposure[ok]
        rows = [dict(age=int(a), observed_survival=table.survivors[k] / table.survivors[0],
                     fitted_survival=float(fitted.survival(t[k])), observed_rate=rate[k],
                     fitted_hazard=float(fitted.hazard(t[k])))
                for k, a in enumerate(table.ages)]
        write_csv(rows, Path(args.out) / "calibration.csv")
        (Path(args.out) / "aggregated.csv").write_text(table.to_csv())
    return EXIT_OK


# ---- loads --------------------------------------------------------------------

def cmd_loads(args) -> int:
    base = mortality.GompertzParams(m=args.m, b=args.b)
    if args.sweep is None:
        rows = loads.load_table(args.load, args.rate, args.age, base)
        write_csv(rows, args.out)
        return EXIT_OK
    # kappas fixed from the load at the calibration age, loads implied at other ages
    sched = loads.LoadSchedule.from_loads(args.sweep, args.sweep, args.rate, args.age, base)
    rows = []
    for age in range(args.from_age, args.to_age + 1):
        l_ins, l_ann = loads.implied_load_by_age(sched, age)
        rows.append(dict(age=age, load_ins=l_ins, load_ann=l_ann))
    write_csv(rows, args.out)
    return EXIT_OK


# ---- profiles -----------------------------------------------------------------

def cmd_profiles(args) -> int:
    fitted = profiles.fit_income()
    inc = profiles.published_income()
    dep = profiles.default_dependency(args.phi, inc)
    t_min, c_min = dep.minimum()
    print("income ln-quadratic (t^2, t, 1): " + ", ".join(fmt(c) for c in fitted.coefficients))
    print("published precision:            " + ", ".join(fmt(c) for c in inc.coefficients))
    print(f"dependency c_b(20)={fmt(float(dep(20.0)))} minimum {fmt(c_min)} at age {fmt(t_min + 25)}")
    t = np.arange(0.0, 85.0 + 1e-9, args.step)
    rows = [dict(age=25 + tk, income=float(inc(tk)), dependency=float(dep(tk))) for tk in t]
    write_csv(rows, args.out)
    return EXIT_OK


# ---- scenarios ----------------------------------------------------------------

def _scenario_from_args(args) -> scenario.ScenarioConfig:
    if args.preset:
        cfg = scenario.preset(args.preset)
    else:
        cfg = scenario.ScenarioConfig()
    if args.config:
        cfg = scenario.load_config(args.config, cfg)
    if args.set:
        sections: dict[str, list[str]] = {}
        for item in args.set:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise scenario.ConfigSyntaxError(f"--set expects section.key=value, got {item!r}")
            lhs, value = item.split("=", 1)
            section, key = lhs.split(".", 1)
            sections.setdefault(section, []).append(f"{key} = {value}")
        body = "".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
        cfg = scenario.parse_config(body, cfg)
    if args.out:
        cfg = cfg.replace(directory=args.out)
    if getattr(args, "cache_dir", None):
        cfg = cfg.replace(cache_dir=args.cache_dir)
    return cfg.validate()


def policy_rows(solution: solver.Solution, stride: float) -> list[dict]:
    every = max(1, int(round(stride / solution.config.dt)))
    x = solution.model.initial_age
    rows = []
    for i in range(0, len(solution.times) - 1, every):
        sl = solution.slices[i]
        for j in np.flatnonzero(sl.feasible):
            rows.append(dict(age=x + sl.time, wealth=sl.grid[j], value=sl.values[j],
                             consumption=sl.consumption[j], premium=sl.premium[j]))
    return rows


def run_scenario(cfg: scenario.ScenarioConfig, use_cache: bool = True):
    sol = scenario.solve(cfg, use_cache)
    traj = solver.forward_simulate(sol, cfg.initial_wealth)
    return sol, traj


def cmd_solve(args) -> int:
    cfg = _scenario_from_args(args)
    sol, traj = run_scenario(cfg, not args.no_cache)
    out = Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.ini").write_text(scenario.dump_config(cfg))
    write_csv(list(traj.to_rows()), out / "trajectory.csv")
    phases = solver.participation_report(traj, cfg.participation_tolerance)
    write_csv([dict(kind=p.kind, start_age=p.start_age, end_age=p.end_age) for p in phases],
              out / "participation.csv")
    if not args.no_policy:
        write_csv(policy_rows(sol, cfg.policy_stride), out / "policy.csv")
    print(f"scenario {cfg.name}: {len(sol.times) - 1} steps, outputs in {out}")
    for p in phases:
        print(f"  {p.kind:<9} {fmt(p.start_age):>6} - {fmt(p.end_age)}")
    return EXIT_OK


def _table3_row(cfg: scenario.ScenarioConfig, ages) -> list[float]:
    _, traj = run_scenario(cfg)
    return [solver.annuity_demand(traj, a) for a in ages]


def table3(base: scenario.ScenarioConfig, load_grid, ages, jobs: int = 1) -> list[dict]:
    cfgs = [base.replace(load_ins=L, load_ann=L) for L in load_grid]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            demands = list(pool.map(_table3_row, cfgs, [ages] * len(cfgs)))
    else:
        demands = [_table3_row(c, ages) for c in cfgs]
    rows = []
    for load, row in zip(load_grid, demands):
        for age, d in zip(ages, row):
            d = 0.0 if d < base.participation_tolerance else d
            rows.append(dict(load=load, age=age, demand=d, demand_hundreds=d / 100.0))
    return rows


def cmd_table3(args) -> int:
    args.preset = args.preset or "table3"
    cfg = _scenario_from_args(args)
    if args.wealth is not None:
        cfg = cfg.replace(initial_wealth=args.wealth).validate()
    load_grid = args.loads or scenario.TABLE3_LOADS
    ages = args.ages or scenario.TABLE3_AGES
    rows = table3(cfg, load_grid, ages, args.jobs)
    out = Path(cfg.directory)
    write_csv(rows, out / "table3.csv")
    print("load  " + "".join(f"{a:>9}" for a in ages) + "   ($100s/year)")
    for k, load in enumerate(load_grid):
        cells = rows[k * len(ages):(k + 1) * len(ages)]
        print(f"{load:5.0%} " + "".join(f"{c['demand_hundreds']:9.2f}" for c in cells))
    return EXIT_OK


def cmd_report(args) -> int:
    names = scenario.EXHIBITS[args.exhibit]
    out_root = Path(args.out or "out")
    for name in names:
        cfg = scenario.preset(name).replace(directory=str(out_root / name),
                                            cache_dir=args.cache_dir).validate()
        if name == "table3":
            rows = table3(cfg, scenario.TABLE3_LOADS, scenario.TABLE3_AGES)
            write_csv(rows, Path(cfg.directory) / "table3.csv")
            print(f"{name}: {Path(cfg.directory) / 'table3.csv'}")
            continue
        _, traj = run_scenario(cfg)
        write_csv(list(traj.to_rows()), Path(cfg.directory) / "trajectory.csv")
        phases = solver.participation_report(traj, cfg.participation_tolerance)
        summary = ", ".join(f"{p.kind} {fmt(p.start_age)}-{fmt(p.end_age)}" for p in phases)
        print(f"{name}: {summary}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lifeins", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit Gompertz (b, m) to a country,age,lx,dx life-table CSV")
    p.add_argument("lifetable")
    p.add_argument("--a", type=float, default=0.5, help="fraction of the year lived by decedents")
    p.add_argument("--out", help="directory for calibration.csv and aggregated.csv")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("loads", help="loading factors and modal ages, or implied loads by age")
    p.add_argument("--load", type=float, nargs="+", help="loads as fractions (default 0, 0.02, ..., 0.20)")
    p.add_argument("--rate", type=float, default=loads.DEFAULT_PRICING_RATE)
    p.add_argument("--age", type=float, default=loads.DEFAULT_CALIBRATION_AGE)
    p.add_argument("--m", type=float, default=88.23)
    p.add_argument("--b", type=float, default=9.38)
    p.add_argument("--sweep", type=float, help="fix kappas from this load and sweep the purchase age")
    p.add_argument("--from-age", type=int, default=25)
    p.add_argument("--to-age", type=int, default=95)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_loads)

    p = sub.add_parser("profiles", help="income and dependency profiles")
    p.add_argument("--phi", type=float, default=0.95)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_profiles)

    def scenario_args(p):
        p.add_argument("--preset", choices=sorted(scenario.PRESETS))
        p.add_argument("--config", help="INI scenario file layered over the preset")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one setting")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cache-dir", help="directory for cached solutions")

    p = sub.add_parser("solve", help="solve one scenario and write policy, trajectory and phases")
    scenario_args(p)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--no-policy", action="store_true", help="skip the policy grid CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table3", help="annuity demand by load and age after retirement")
    scenario_args(p)
    p.add_argument("--wealth", type=float)
    p.add_argument("--loads", type=float, nargs="+")
    p.add_argument("--ages", type=float, nargs="+")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_table3)

    p = sub.add_parser("report", help="run every preset behind one exhibit")
    p.add_argument("exhibit", choices=sorted(scenario.EXHIBITS))
    p.add_argument("--out")
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (lifetable.LifeTableError, scenario.ConfigSyntaxError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except solver.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except mortality.CalibrationError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
