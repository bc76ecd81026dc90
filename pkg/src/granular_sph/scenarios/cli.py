"""Command line: run, bench, fit, validate."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import presets
from .config import load_config
from .io import read_fit_points, write_reports
from .metrics import crater_abscissa, fit_cratering_slope
from .runner import bench_matrix, run_scenario


def _csv_list(text: str, conv):
    return [conv(t.strip()) for t in text.split(",") if t.strip()]


def _on_off(t: str) -> bool:
    if t not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on/off, got {t!r}")
    return t == "on"


def _say(args, msg: str):
    if not args.quiet:
        print(msg)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.output_dir or cfg.output_dir)
    report = run_scenario(cfg, out_dir=out, cache_dir=out / "cache")
    path = write_reports([report], out / "report.csv")
    _say(args, f"{report.name}: status={report.status} steps={report.steps} rtf={report.rtf:.3g} "
               f"metrics={report.metrics} -> {path}")
    return 0 if report.status == "ok" else 1


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = bench_matrix(cfg, _csv_list(args.ps, int), _csv_list(args.active, _on_off),
                           cache_dir=out / "cache")
    path = write_reports(reports, out / "bench.csv")
    for r in reports:
        _say(args, f"ps={r.ps_freq:<3d} active={'on ' if r.active else 'off'} rtf={r.rtf:.3g} "
                   f"speedup={r.speedup if r.speedup is None else round(r.speedup, 3)}")
    _say(args, f"-> {path}")
    return 0


def cmd_fit(args) -> int:
    fit = fit_cratering_slope(read_fit_points(args.csv))
    print(f"slope={fit.slope:.6g} intercept={fit.intercept:.6g} r2={fit.r2:.6g} "
          f"mse={fit.mse:.6g} mse_vs_empirical={fit.mse_empirical:.6g}")
    return 0


def cmd_validate(args) -> int:
    out = Path(args.output_dir or "output")
    out.mkdir(parents=True, exist_ok=True)
    if args.case == "cratering":
        reports, rows = [], []
        for cfg in presets.cratering_matrix(seed=args.seed or 0):
            r = run_scenario(cfg, cache_dir=out / "cache")
            reports.append(r)
            x = crater_abscissa(cfg.sphere_density, cfg.rho0, cfg.sphere_radius,
                                cfg.drop_height, cfg.mu_s)
            rows.append((x, r.metrics.get("penetration_depth", float("nan"))))
            _say(args, f"{cfg.name}: D={rows[-1][1]:.4g} m (empirical "
                       f"{r.metrics.get('empirical_depth', float('nan')):.4g} m)")
        write_reports(reports, out / "cratering_report.csv")
        with (out / "cratering_points.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "D"])
            w.writerows(rows)
        fit = fit_cratering_slope(rows)
        ok = 0.10 <= fit.slope <= 0.18 and fit.r2 >= 0.90
        _say(args, f"slope={fit.slope:.4f} r2={fit.r2:.4f} mse={fit.mse_empirical:.3g} m^2 "
                   f"-> {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    reports = []
    with (out / "cone_depth.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "t", "depth"])
        for frac in (0.0, 0.5, 1.0):
            cfg = presets.cone(frac, seed=args.seed or 0)
            r = run_scenario(cfg, cache_dir=out / "cache")
            reports.append(r)
            if r.series:
                surface = r.metrics["penetration_depth"] + r.series["pos"][-1, 2]
                for t, z in zip(r.series["t"], r.series["pos"][:, 2]):
                    w.writerow([cfg.name, t, surface - z])
            _say(args, f"{cfg.name}: final depth {r.metrics.get('penetration_depth', float('nan')):.4g} m")
    write_reports(reports, out / "cone_report.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="granular-sph", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one scenario config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    b = sub.add_parser("bench", parents=[common], help="RTF over ps_freq and active-domain toggles")
    b.add_argument("config")
    b.add_argument("--ps", default="1,10")
    b.add_argument("--active", default="off,on")
    b.set_defaults(func=cmd_bench)
    f = sub.add_parser("fit", parents=[common], help="cratering slope fit from a CSV of x,D")
    f.add_argument("csv")
    f.set_defaults(func=cmd_fit)
    v = sub.add_parser("validate", parents=[common], help="built-in validation suites")
    v.add_argument("case", choices=("cratering", "cone"))
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
