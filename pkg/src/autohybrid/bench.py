"""Dataset ingestion, the grid-versus-TPE benchmark runner and its reports.

Output files of a benchmark directory:

``results.csv``
    one row per (dataset, seed, method) cell.
``traces.csv``
    per-trial records of every cell (a grid cell contributes one row).
``convergence.csv``
    best-so-far mean and 95 % half width per trial, over seeds.
``summary.csv``
    mean test MAE per dataset and method.
``errors.log``
    failed cells, only written when something failed.

Everything except the wall-time and duration columns is a pure function of
the configuration.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyFile, MissingTarget, NonNumericCell
from .evaluation import BENCHMARK_SEEDS, aggregate_traces, ConvergenceTrace, make_split, pad_trace, t_confidence_interval
from .grid_search import grid_search_hybrid
from .learners import Dataset
from .spaces import GridDefinition, hybrid_tpe_space
from .tpe import TPESettings, tpe_search_hybrid, trace_rows

log = logging.getLogger(__name__)

METHODS = ("grid", "tpe")
RESULT_COLUMNS = ("dataset", "seed", "method", "test_mae", "fits", "combinations_or_trials", "wall_time_s")
TRACE_COLUMNS = ("dataset", "seed", "method", "trial_index", "Q", "best_so_far", "duration_s", "config_json")
CONVERGENCE_COLUMNS = ("dataset", "method", "trial_index", "mean_best_so_far", "ci_half_width")
SUMMARY_COLUMNS = ("dataset", "method", "n_seeds", "mean_test_mae", "ci_half_width", "mean_fits", "mean_wall_time_s")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def load_csv_dataset(path, target_column: str, normalize_target: bool = True) -> Dataset:
    """All-numeric CSV with a header; every non-target column is a feature.

    The target is min-max scaled to [0, 1] so errors are comparable across
    datasets. Row numbers in errors count data rows from 1.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingTarget(f"{path} has no column {target_column!r}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {i} has {len(row)} cells, header has {len(header)}")
            values = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCell(i, name, cell) from None
                if not math.isfinite(v):
                    raise NonNumericCell(i, name, cell)
                values.append(v)
            rows.append(values)
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    M = np.asarray(rows, dtype=np.float64)
    t = header.index(target_column)
    y = M[:, t]
    if normalize_target:
        span = y.max() - y.min()
        y = (y - y.min()) / span if span > 0 else np.zeros_like(y)
    X = np.delete(M, t, axis=1)
    names = tuple(h for j, h in enumerate(header) if j != t)
    return Dataset(X, y, names, path.stem)


@dataclass(frozen=True)
class DatasetRef:
    path: str
    target: str
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or Path(self.path).stem


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple
    methods: tuple = METHODS
    seeds: tuple = BENCHMARK_SEEDS
    tpe: TPESettings = field(default_factory=TPESettings)
    grid: Any = "default"
    output_dir: str = "results"

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if not self.methods:
            raise ConfigError("config needs at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.seeds:
            raise ConfigError("config needs at least one seed")
        labels = [d.label for d in self.datasets]
        if len(set(labels)) != len(labels):
            raise ConfigError("dataset names must be unique")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Path | None = None) -> "ExperimentConfig":
        try:
            base = Path(base_dir or ".")
            datasets = []
            for entry in d["datasets"]:
                path = Path(entry["path"])
                if not path.is_absolute():
                    path = base / path
                datasets.append(DatasetRef(str(path), entry["target"], entry.get("name", "")))
            grid = d.get("grid", "default")
            if isinstance(grid, str) and grid != "default" and not Path(grid).is_absolute():
                grid = str(base / grid)
            out = Path(d.get("output_dir", "results"))
            return cls(
                datasets=tuple(datasets),
                methods=tuple(d.get("methods", METHODS)),
                seeds=tuple(int(s) for s in d.get("seeds", BENCHMARK_SEEDS)),
                tpe=TPESettings.from_dict(d.get("tpe", {})),
                grid=grid,
                output_dir=str(out if out.is_absolute() else base / out),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, path.parent)


@dataclass
class CellResult:
    dataset: str
    seed: int
    method: str
    test_mae: float
    fits: int
    combinations_or_trials: int
    wall_time_s: float
    trace: np.ndarray
    trace_rows: list
    report: dict

    def row(self) -> dict:
        return {c: getattr(self, c) for c in RESULT_COLUMNS}


@dataclass
class BenchmarkResults:
    cells: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    n_trials: int = 0  # trace length TPE runs are padded to
    datasets: tuple = ()
    methods: tuple = ()


def run_cell(data: Dataset, name: str, seed: int, method: str, grids: GridDefinition,
             tpe: TPESettings, jobs: int = 1) -> CellResult:
    split = make_split(data.n, seed)
    t0 = time.perf_counter()
    if method == "grid":
        _, report = grid_search_hybrid(data, grids, split, seed=seed, jobs=jobs)
        wall = time.perf_counter() - t0
        trace = np.array([report["best_cv_mae"]])
        rows = [{
            "trial_index": 1,
            "Q": report["best_cv_mae"],
            "best_so_far": report["best_cv_mae"],
            "duration_s": wall,
            "config_json": json.dumps(report["chosen_config"], sort_keys=True),
        }]
        fits = report["counters"]["fits_performed"]
        count = report["counters"]["combinations_evaluated"]
    else:
        settings = replace(tpe, seed=seed)
        _, report, tr = tpe_search_hybrid(data, split, settings, hybrid_tpe_space(grids), jobs=jobs)
        wall = time.perf_counter() - t0
        trace = tr.runs[0]
        rows = trace_rows(tr)
        fits = report["counters"]["fits_performed"]
        count = report["counters"]["trials"]
    return CellResult(name, seed, method, float(report["test_mae"]), int(fits), int(count), wall, trace, rows, report)


def resolve_jobs(jobs: int | None) -> int:
    """Explicit value, else the AUTOHYBRID_JOBS environment variable, else 1."""
    if jobs is None:
        env = os.environ.get("AUTOHYBRID_JOBS", "").strip()
        jobs = int(env) if env else 1
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return jobs


def run_benchmark(cfg: ExperimentConfig, jobs: int | None = None) -> tuple[BenchmarkResults, int]:
    """Run every (dataset, seed, method) cell and write the output files.

    Returns the results and the exit code: 0 when every cell succeeded, 2 when
    some failed (listed in errors.log). Unreadable datasets or grids count as
    configuration errors and raise ConfigError.
    """
    jobs = resolve_jobs(jobs)
    try:
        grids = GridDefinition.load(cfg.grid)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load grid {cfg.grid!r}: {exc}") from exc
    data = {}
    for ref in cfg.datasets:
        try:
            data[ref.label] = load_csv_dataset(ref.path, ref.target)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"dataset {ref.label}: {exc}") from exc

    cells = [(ref.label, seed, m) for ref in cfg.datasets for seed in cfg.seeds for m in cfg.methods]
    inner = jobs if len(cells) < jobs else 1

    def work(cell):
        name, seed, method = cell
        log.info("running %s seed=%d method=%s", name, seed, method)
        try:
            return run_cell(data[name], name, seed, method, grids, cfg.tpe, inner), None
        except Exception as exc:  # a failing cell must not take down the run
            log.exception("cell %s/%d/%s failed", name, seed, method)
            return None, {"dataset": name, "seed": seed, "method": method, "error": f"{type(exc).__name__}: {exc}"}

    if jobs > 1 and len(cells) > 1:
        with ThreadPoolExecutor(min(jobs, len(cells))) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(c) for c in cells]

    results = BenchmarkResults(
        cells=[r for r, _ in outcomes if r is not None],
        failures=[f for _, f in outcomes if f is not None],
        n_trials=cfg.tpe.n_trials,
        datasets=tuple(ref.label for ref in cfg.datasets),
        methods=tuple(cfg.methods),
    )
    out = Path(cfg.output_dir)
    write_results(results, out)
    if results.cells:
        emit_report(results, out)
    return results, EXIT_PARTIAL if results.failures else EXIT_OK


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Mapping]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_results(results: BenchmarkResults, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULT_COLUMNS, [c.row() for c in results.cells])
    trace_out = []
    for c in results.cells:
        for r in c.trace_rows:
            trace_out.append({"dataset": c.dataset, "seed": c.seed, "method": c.method, **r})
    _write_csv(out / "traces.csv", TRACE_COLUMNS, trace_out)
    err_path = out / "errors.log"
    if results.failures:
        err_path.write_text(
            "".join(f"{f['dataset']}\tseed={f['seed']}\t{f['method']}\t{f['error']}\n" for f in results.failures)
        )
    elif err_path.exists():
        err_path.unlink()


def emit_report(results: BenchmarkResults, out_dir) -> None:
    """convergence.csv and summary.csv from benchmark results.

    TPE traces that stopped early are padded with their final value to the
    trial budget; a grid cell has a single-point trace (one selection step).
    """
    if not results.cells:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    datasets = results.datasets or tuple(dict.fromkeys(c.dataset for c in results.cells))
    methods = results.methods or tuple(dict.fromkeys(c.method for c in results.cells))

    conv_rows, summary_rows = [], []
    for name in datasets:
        for method in methods:
            group = sorted((c for c in results.cells if c.dataset == name and c.method == method), key=lambda c: c.seed)
            if not group:
                continue
            length = max(len(c.trace) for c in group)
            if method == "tpe":
                length = max(length, results.n_trials)
            agg = aggregate_traces([ConvergenceTrace(runs=[pad_trace(c.trace, length)]) for c in group])
            for i in range(length):
                conv_rows.append({
                    "dataset": name,
                    "method": method,
                    "trial_index": i + 1,
                    "mean_best_so_far": float(agg.mean[i]),
                    "ci_half_width": float(agg.half_width[i]),
                })
            maes = [c.test_mae for c in group]
            half = t_confidence_interval(maes)[1] if len(maes) > 1 else math.nan
            summary_rows.append({
                "dataset": name,
                "method": method,
                "n_seeds": len(group),
                "mean_test_mae": float(np.mean(maes)),
                "ci_half_width": float(half),
                "mean_fits": float(np.mean([c.fits for c in group])),
                "mean_wall_time_s": float(np.mean([c.wall_time_s for c in group])),
            })
    _write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, conv_rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)


def load_results(out_dir) -> BenchmarkResults:
    """Rebuild benchmark results from results.csv and traces.csv."""
    out = Path(out_dir)
    with open(out / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(out / "traces.csv", newline="") as fh:
        traces = list(csv.DictReader(fh))
    by_cell: dict = {}
    for t in traces:
        by_cell.setdefault((t["dataset"], int(t["seed"]), t["method"]), []).append(t)
    cells = []
    for r in rows:
        key = (r["dataset"], int(r["seed"]), r["method"])
        tr = sorted(by_cell.get(key, []), key=lambda t: int(t["trial_index"]))
        cells.append(CellResult(
            dataset=key[0],
            seed=key[1],
            method=key[2],
            test_mae=float(r["test_mae"]),
            fits=int(r["fits"]),
            combinations_or_trials=int(r["combinations_or_trials"]),
            wall_time_s=float(r["wall_time_s"]),
            trace=np.array([float(t["best_so_far"]) for t in tr]),
            trace_rows=tr,
            report={},
        ))
    n_trials = max((len(c.trace) for c in cells if c.method == "tpe"), default=0)
    return BenchmarkResults(
        cells=cells,
        n_trials=n_trials,
        datasets=tuple(dict.fromkeys(c.dataset for c in cells)),
        methods=tuple(dict.fromkeys(c.method for c in cells)),
    )
