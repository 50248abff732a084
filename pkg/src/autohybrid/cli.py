"""Command-line entry point: ``autohybrid <verb> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import renewables as rn
from .bench import (
    EXIT_CONFIG,
    EXIT_OK,
    ExperimentConfig,
    emit_report,
    load_csv_dataset,
    load_results,
    resolve_jobs,
    run_benchmark,
)
from .errors import AutoHybridError, LengthMismatch, MisalignedSeries
from .evaluation import make_split
from .grid_search import grid_search_hybrid
from .spaces import GridDefinition, hybrid_tpe_space
from .synthetic import friedman, interp_extrap_task, to_csv
from .tpe import EarlyStop, TPESettings, tpe_search_hybrid, trace_rows

log = logging.getLogger("autohybrid")


def _write_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def cmd_bench(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    results, code = run_benchmark(cfg, args.jobs)
    print(f"{len(results.cells)} cells done, {len(results.failures)} failed; output in {cfg.output_dir}")
    return code


def cmd_tune(args) -> int:
    data = load_csv_dataset(args.data, args.target)
    split = make_split(data.n, args.seed)
    grids = GridDefinition.load(args.grid)
    jobs = resolve_jobs(args.jobs)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    if args.method == "grid":
        _, report = grid_search_hybrid(data, grids, split, seed=args.seed, jobs=jobs)
    else:
        settings = TPESettings(
            n_trials=args.trials,
            seed=args.seed,
            early_stop=EarlyStop() if args.early_stop else None,
        )
        _, report, trace = tpe_search_hybrid(data, split, settings, hybrid_tpe_space(grids), jobs=jobs)
        if out:
            rows = trace_rows(trace)
            with open(out / "trace.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
    _write_json(report, str(out / "report.json") if out else None)
    return EXIT_OK


def cmd_wp_calibrate(args) -> int:
    curve = rn.read_power_curve(args.curve)
    t_w, wind = rn.read_series(args.wind)
    t_p, power = rn.read_series(args.power)
    if t_w != t_p:
        raise LengthMismatch("wind and power series have different timestamps")
    alpha = rn.calibrate_alpha(curve, args.h1, args.h2, wind, power, args.alpha_grid)
    pred = rn.wp_forecast(curve, rn.WindSiteConfig(args.h1, args.h2, alpha), wind)
    _write_json({"alpha": alpha, "nmae": rn.wp_nmae(pred, power, curve)}, args.out)
    return EXIT_OK


def cmd_wp_forecast(args) -> int:
    curve = rn.read_power_curve(args.curve)
    times, wind = rn.read_series(args.wind)
    pred = rn.wp_forecast(curve, rn.WindSiteConfig(args.h1, args.h2, args.alpha), wind)
    rn.write_series(args.out, times, pred)
    return EXIT_OK


def _plant_specs(items):
    out = {}
    for item in items:
        pid, sep, path = item.partition("=")
        if not sep:
            raise ValueError(f"expected PLANT=PATH, got {item!r}")
        out[pid] = path
    return out


def cmd_pv_build(args) -> int:
    peaks, _ = rn.read_registry(args.registry)
    paths = _plant_specs(args.profiles)
    profiles, times = {}, None
    for pid, path in paths.items():
        t, v = rn.read_series(path)
        if times is not None and t != times:
            raise MisalignedSeries(f"{pid}: timestamps differ from the other profiles")
        times = t
        profiles[pid] = v
    template = rn.pv_build_template(profiles, {pid: peaks[pid] for pid in profiles})
    rn.save_template(template, args.out, times)
    return EXIT_OK


def cmd_pv_calibrate(args) -> int:
    template, times = rn.load_template(args.template)
    _, observed = rn.read_series(args.observed)
    _, predicted = rn.read_series(args.predicted)
    c = rn.pv_calibrate(template, args.plant, observed, predicted)
    rn.save_template(template.with_calibration(args.plant, c), args.out or args.template, times)
    print(json.dumps({"plant_id": args.plant, "calibration_factor": c}))
    return EXIT_OK


def cmd_pv_forecast(args) -> int:
    template, _ = rn.load_template(args.template)
    times, predicted = rn.read_series(args.predicted)
    rn.write_series(args.out, times, rn.pv_forecast(template, args.plant, predicted))
    return EXIT_OK


def cmd_anomaly_twins(args) -> int:
    times, a = rn.read_series(args.a)
    _, b = rn.read_series(args.b)
    flags = rn.twin_anomaly_flags(a, b, args.rated, args.threshold, args.min_run)
    rn.write_series(args.out, times, flags.astype(float))
    print(f"{int(flags.sum())} of {flags.size} steps flagged")
    return EXIT_OK


def cmd_report(args) -> int:
    results = load_results(args.results)
    emit_report(results, args.out or args.results)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.kind == "friedman":
        data = friedman(args.rows, args.features, seed=args.seed)
    else:
        data, _, _ = interp_extrap_task(n_train=args.rows, seed=args.seed)
    to_csv(data, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autohybrid", description="Automated hybrid-model design and renewable forecasting templates.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    b = sub.add_parser("bench", help="run the grid-vs-TPE benchmark from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="override the config's output directory")
    b.add_argument("--jobs", type=int, help="parallel cells (default: $AUTOHYBRID_JOBS or 1)")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("tune", help="design a hybrid model for one CSV dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--target", required=True)
    t.add_argument("--method", choices=("grid", "tpe"), default="grid")
    t.add_argument("--trials", type=int, default=500)
    t.add_argument("--early-stop", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--grid", default="default", help="grid JSON file (default grid if omitted)")
    t.add_argument("--jobs", type=int)
    t.add_argument("--out", help="directory for report.json (and trace.csv for tpe)")
    t.set_defaults(func=cmd_tune)

    wp = sub.add_parser("wp", help="wind power template").add_subparsers(dest="action", required=True)
    c = wp.add_parser("calibrate", help="grid-search the friction exponent")
    c.add_argument("--curve", required=True, help="power curve CSV")
    c.add_argument("--wind", required=True, help="wind speed series at the reference height")
    c.add_argument("--power", required=True, help="observed power series")
    c.add_argument("--h1", type=float, required=True, help="reference height (m)")
    c.add_argument("--h2", type=float, required=True, help="hub height (m)")
    c.add_argument("--alpha-grid", default=rn.DEFAULT_ALPHA_GRID, help="lo:hi:step")
    c.add_argument("--out")
    c.set_defaults(func=cmd_wp_calibrate)
    f = wp.add_parser("forecast", help="power forecast from a wind series")
    f.add_argument("--curve", required=True)
    f.add_argument("--wind", required=True)
    f.add_argument("--h1", type=float, required=True)
    f.add_argument("--h2", type=float, required=True)
    f.add_argument("--alpha", type=float, required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_wp_forecast)

    pv = sub.add_parser("pv", help="PV fleet template").add_subparsers(dest="action", required=True)
    pb = pv.add_parser("build", help="normalize and average plant profiles")
    pb.add_argument("--registry", required=True, help="plant registry JSON")
    pb.add_argument("--profiles", nargs="+", required=True, metavar="PLANT=CSV")
    pb.add_argument("--out", required=True, help="template JSON")
    pb.set_defaults(func=cmd_pv_build)
    pc = pv.add_parser("calibrate", help="fit one plant's calibration factor")
    pc.add_argument("--template", required=True)
    pc.add_argument("--plant", required=True)
    pc.add_argument("--observed", required=True)
    pc.add_argument("--predicted", required=True, help="normalized profile forecast")
    pc.add_argument("--out", help="updated template (default: overwrite)")
    pc.set_defaults(func=cmd_pv_calibrate)
    pf = pv.add_parser("forecast", help="plant power from a normalized forecast")
    pf.add_argument("--template", required=True)
    pf.add_argument("--plant", required=True)
    pf.add_argument("--predicted", required=True)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_pv_forecast)

    an = sub.add_parser("anomaly", help="operational checks").add_subparsers(dest="action", required=True)
    tw = an.add_parser("twins", help="flag diverging neighbouring turbines")
    tw.add_argument("--a", required=True)
    tw.add_argument("--b", required=True)
    tw.add_argument("--rated", type=float, required=True)
    tw.add_argument("--threshold", type=float, default=rn.ANOMALY_THRESHOLD)
    tw.add_argument("--min-run", type=int, default=rn.ANOMALY_MIN_RUN)
    tw.add_argument("--out", required=True)
    tw.set_defaults(func=cmd_anomaly_twins)

    r = sub.add_parser("report", help="rebuild convergence.csv and summary.csv")
    r.add_argument("--results", required=True, help="benchmark output directory")
    r.add_argument("--out", help="destination directory (default: the results directory)")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("synth", help="write a synthetic regression CSV")
    s.add_argument("--kind", choices=("friedman", "wiggle"), default="friedman")
    s.add_argument("--rows", type=int, default=500)
    s.add_argument("--features", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (AutoHybridError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
