import csv
import json
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from autohybrid import cli
from autohybrid.bench import (
    CONVERGENCE_COLUMNS,
    EXIT_OK,
    EXIT_PARTIAL,
    RESULT_COLUMNS,
    ExperimentConfig,
    emit_report,
    load_csv_dataset,
    load_results,
    resolve_jobs,
    run_benchmark,
)
from autohybrid.errors import ConfigError, EmptyFile, MissingTarget, NonNumericCell
from autohybrid.renewables import load_template, write_power_curve, write_series
from autohybrid.synthetic import friedman, to_csv
from support import micro_grid, wind_site


def write(path, text):
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestLoadCsv:
    def test_features_and_target(self, tmp_path):
        body = "".join(f"{i},{(i % 3) / 2},{-i}\n" for i in range(12))
        data = load_csv_dataset(write(tmp_path / "d.csv", "a,y,b\n" + body), "y")
        assert data.features.shape == (12, 2)
        assert data.feature_names == ("a", "b")
        assert data.target.tolist() == [(i % 3) / 2 for i in range(12)]

    def test_target_scaled(self, tmp_path):
        p = write(tmp_path / "d.csv", "x,y\n" + "".join(f"{i},{10 + 2 * i}\n" for i in range(11)))
        assert load_csv_dataset(p, "y").target.tolist() == [i / 10 for i in range(11)]

    def test_too_few_rows(self, tmp_path):
        with pytest.raises(ValueError):
            load_csv_dataset(write(tmp_path / "d.csv", "x,y\n1,2\n3,4\n"), "y")

    def test_non_numeric_location(self, tmp_path):
        rows = "".join(f"{i},{i}\n" for i in range(1, 7)) + "abc,7\n"
        p = write(tmp_path / "d.csv", "x,y\n" + rows)
        with pytest.raises(NonNumericCell) as info:
            load_csv_dataset(p, "y")
        assert (info.value.row, info.value.column) == (7, "x")

    def test_missing_target(self, tmp_path):
        with pytest.raises(MissingTarget):
            load_csv_dataset(write(tmp_path / "d.csv", "x,z\n1,2\n"), "y")

    def test_empty(self, tmp_path):
        with pytest.raises(EmptyFile):
            load_csv_dataset(write(tmp_path / "d.csv", ""), "y")
        with pytest.raises(EmptyFile):
            load_csv_dataset(write(tmp_path / "e.csv", "x,y\n"), "y")

    def test_row_order_kept(self, tmp_path):
        data = friedman(30, 5, seed=0)
        to_csv(data, tmp_path / "f.csv")
        back = load_csv_dataset(tmp_path / "f.csv", "y", normalize_target=False)
        assert np.array_equal(back.features, data.features) and np.array_equal(back.target, data.target)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(datasets=())
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"datasets": [{"path": "a.csv", "target": "y"}], "methods": []})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"datasets": [{"path": "a.csv", "target": "y"}], "seeds": []})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"datasets": [{"path": "a.csv", "target": "y"}], "methods": ["sa"]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"datasets": [{"target": "y"}]})

    def test_paths_relative_to_config(self, tmp_path):
        p = write(tmp_path / "c.json", json.dumps({"datasets": [{"path": "d.csv", "target": "y"}], "output_dir": "out"}))
        cfg = ExperimentConfig.load(p)
        assert cfg.datasets[0].path == str(tmp_path / "d.csv")
        assert cfg.output_dir == str(tmp_path / "out")
        assert cfg.seeds == (0, 1, 2, 3, 4)

    def test_jobs_from_environment(self, monkeypatch):
        monkeypatch.setenv("AUTOHYBRID_JOBS", "3")
        assert resolve_jobs(None) == 3
        assert resolve_jobs(2) == 2
        monkeypatch.delenv("AUTOHYBRID_JOBS")
        assert resolve_jobs(None) == 1


def small_config(tmp_path, seeds=(0, 1, 2, 3, 4), methods=("grid", "tpe"), out="out"):
    to_csv(friedman(60, 5, seed=7, name="fr"), tmp_path / "fr.csv")
    grid = micro_grid(mlp=(2, 3), ocsvm=(0.5, 1.0)).to_json()
    return ExperimentConfig.from_dict(
        {
            "datasets": [{"path": "fr.csv", "target": "y", "name": "fr"}],
            "methods": list(methods),
            "seeds": list(seeds),
            "tpe": {"n_trials": 24, "n_startup": 20},
            "grid": grid,
            "output_dir": out,
        },
        tmp_path,
    )


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    cfg = small_config(tmp)
    results, code = run_benchmark(cfg)
    return tmp, cfg, results, code


class TestBenchmark:
    def test_row_accounting(self, bench_run):
        tmp, cfg, results, code = bench_run
        assert code == EXIT_OK
        rows = read_rows(tmp / "out" / "results.csv")
        assert len(rows) == 10
        assert list(rows[0]) == list(RESULT_COLUMNS)
        assert {(r["seed"], r["method"]) for r in rows} == {(str(s), m) for s in range(5) for m in ("grid", "tpe")}

    def test_counts(self, bench_run):
        tmp, *_ = bench_run
        for r in read_rows(tmp / "out" / "results.csv"):
            if r["method"] == "grid":
                assert int(r["combinations_or_trials"]) == 3 * 3 * 2
                assert int(r["fits"]) == 4 * (3 + 2)
            else:
                assert int(r["combinations_or_trials"]) == 24

    def test_report_files(self, bench_run):
        tmp, *_ = bench_run
        conv = read_rows(tmp / "out" / "convergence.csv")
        assert set(CONVERGENCE_COLUMNS) <= set(conv[0])
        tpe = [float(r["mean_best_so_far"]) for r in conv if r["method"] == "tpe"]
        assert len(tpe) == 24 and all(b <= a for a, b in zip(tpe, tpe[1:]))
        summary = read_rows(tmp / "out" / "summary.csv")
        assert len(summary) == 1 * 2
        assert not (tmp / "out" / "errors.log").exists()

    def test_rerun_byte_identical(self, bench_run):
        tmp, cfg, _, _ = bench_run
        run_benchmark(replace(cfg, output_dir=str(tmp / "again")))

        def strip(path, drop):
            rows = read_rows(path)
            return [{k: v for k, v in r.items() if k not in drop} for r in rows]

        assert strip(tmp / "out" / "results.csv", {"wall_time_s"}) == strip(tmp / "again" / "results.csv", {"wall_time_s"})
        assert (tmp / "out" / "convergence.csv").read_bytes() == (tmp / "again" / "convergence.csv").read_bytes()

    def test_report_rebuild(self, bench_run, tmp_path):
        tmp, *_ = bench_run
        emit_report(load_results(tmp / "out"), tmp_path)
        assert (tmp_path / "convergence.csv").read_bytes() == (tmp / "out" / "convergence.csv").read_bytes()

    def test_identical_seeds_zero_width(self, tmp_path):
        cfg = small_config(tmp_path, seeds=(3, 3, 3, 3, 3), methods=("tpe",))
        run_benchmark(cfg)
        conv = read_rows(tmp_path / "out" / "convergence.csv")
        assert all(float(r["ci_half_width"]) == 0 for r in conv)

    def test_partial_failure(self, tmp_path, monkeypatch):
        import autohybrid.bench as bench

        real = bench.run_cell

        def flaky(data, name, seed, method, *a, **k):
            if seed == 1 and method == "grid":
                raise RuntimeError("injected")
            return real(data, name, seed, method, *a, **k)

        monkeypatch.setattr(bench, "run_cell", flaky)
        cfg = small_config(tmp_path, seeds=(0, 1), methods=("grid",))
        results, code = run_benchmark(cfg)
        assert code == EXIT_PARTIAL
        assert len(read_rows(tmp_path / "out" / "results.csv")) == 1
        assert "injected" in (tmp_path / "out" / "errors.log").read_text()

    def test_unreadable_dataset_is_config_error(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"datasets": [{"path": "missing.csv", "target": "y"}]}, tmp_path)
        with pytest.raises(ConfigError):
            run_benchmark(cfg)


class TestCli:
    def test_bench_exit_codes(self, tmp_path, capsys):
        to_csv(friedman(60, 5, seed=7, name="fr"), tmp_path / "fr.csv")
        doc = {
            "datasets": [{"path": "fr.csv", "target": "y", "name": "fr"}],
            "methods": ["grid"],
            "seeds": [0],
            "grid": micro_grid(mlp=(2,), ocsvm=(1.0,)).to_json(),
        }
        write(tmp_path / "c.json", json.dumps(doc))
        assert cli.main(["bench", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "results.csv").exists()
        write(tmp_path / "bad.json", json.dumps({"datasets": []}))
        assert cli.main(["bench", "--config", str(tmp_path / "bad.json")]) == 1
        assert cli.main(["bench", "--config", str(tmp_path / "nope.json")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_tune(self, tmp_path):
        to_csv(friedman(60, 5, seed=1), tmp_path / "d.csv")
        write(tmp_path / "g.json", json.dumps(micro_grid(mlp=(2,), ocsvm=(1.0,)).to_json()))
        args = ["tune", "--data", str(tmp_path / "d.csv"), "--target", "y", "--grid", str(tmp_path / "g.json")]
        assert cli.main(args + ["--out", str(tmp_path / "g")]) == 0
        report = json.loads((tmp_path / "g" / "report.json").read_text())
        assert report["method"] == "grid" and report["counters"]["combinations_evaluated"] == 4
        assert cli.main(args + ["--method", "tpe", "--trials", "22", "--out", str(tmp_path / "t")]) == 0
        assert len(read_rows(tmp_path / "t" / "trace.csv")) == 22

    def test_wp_verbs(self, tmp_path):
        curve, wind, power = wind_site(0.2, n=300)
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        times = [t0 + timedelta(hours=i) for i in range(300)]
        write_power_curve(curve, tmp_path / "pc.csv")
        write_series(tmp_path / "w.csv", times, wind)
        write_series(tmp_path / "p.csv", times, power)
        common = ["--curve", str(tmp_path / "pc.csv"), "--wind", str(tmp_path / "w.csv"), "--h1", "10", "--h2", "100"]
        assert cli.main(["wp", "calibrate", *common, "--power", str(tmp_path / "p.csv"), "--out", str(tmp_path / "a.json")]) == 0
        assert json.loads((tmp_path / "a.json").read_text())["alpha"] == pytest.approx(0.2)
        assert cli.main(["wp", "forecast", *common, "--alpha", "0.2", "--out", str(tmp_path / "f.csv")]) == 0
        got = np.array([float(r["value"]) for r in read_rows(tmp_path / "f.csv")])
        assert np.array_equal(got, power)

    def test_pv_verbs(self, tmp_path):
        t0 = datetime(2024, 6, 1, tzinfo=timezone.utc)
        times = [t0 + timedelta(hours=i) for i in range(24)]
        shape = np.clip(np.sin(np.linspace(-0.5, np.pi + 0.5, 24)), 0, None)
        write(tmp_path / "reg.json", json.dumps([{"plant_id": "a", "peak_kw": 10.0}, {"plant_id": "b", "peak_kw": 10.0}]))
        write_series(tmp_path / "a.csv", times, 10 * shape)
        write_series(tmp_path / "b.csv", times, 10 * shape)
        assert cli.main([
            "pv", "build", "--registry", str(tmp_path / "reg.json"),
            "--profiles", f"a={tmp_path / 'a.csv'}", f"b={tmp_path / 'b.csv'}", "--out", str(tmp_path / "t.json"),
        ]) == 0
        write_series(tmp_path / "pred.csv", times, shape)
        write_series(tmp_path / "obs.csv", times, 0.8 * 10 * shape)
        assert cli.main([
            "pv", "calibrate", "--template", str(tmp_path / "t.json"), "--plant", "b",
            "--observed", str(tmp_path / "obs.csv"), "--predicted", str(tmp_path / "pred.csv"),
        ]) == 0
        template, _ = load_template(tmp_path / "t.json")
        assert template.calibration == {"a": 1.0, "b": 0.8}
        assert cli.main([
            "pv", "forecast", "--template", str(tmp_path / "t.json"), "--plant", "a",
            "--predicted", str(tmp_path / "pred.csv"), "--out", str(tmp_path / "fa.csv"),
        ]) == 0
        got = np.array([float(r["value"]) for r in read_rows(tmp_path / "fa.csv")])
        assert np.array_equal(got, 10 * shape)
        assert cli.main([
            "pv", "forecast", "--template", str(tmp_path / "t.json"), "--plant", "zz",
            "--predicted", str(tmp_path / "pred.csv"), "--out", str(tmp_path / "fz.csv"),
        ]) == 1

    def test_anomaly(self, tmp_path, capsys):
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
        times = [t0 + timedelta(minutes=10 * i) for i in range(30)]
        a = np.full(30, 2000.0)
        b = a.copy()
        b[5:15] = 0
        write_series(tmp_path / "a.csv", times, a)
        write_series(tmp_path / "b.csv", times, b)
        assert cli.main(["anomaly", "twins", "--a", str(tmp_path / "a.csv"), "--b", str(tmp_path / "b.csv"),
                         "--rated", "2000", "--out", str(tmp_path / "f.csv")]) == 0
        flags = [float(r["value"]) for r in read_rows(tmp_path / "f.csv")]
        assert [i for i, f in enumerate(flags) if f] == list(range(5, 15))
        assert "10 of 30" in capsys.readouterr().out

    def test_synth_and_report(self, tmp_path, bench_run):
        assert cli.main(["synth", "--rows", "40", "--features", "6", "--out", str(tmp_path / "s.csv")]) == 0
        assert load_csv_dataset(tmp_path / "s.csv", "y").features.shape == (40, 6)
        src, *_ = bench_run
        assert cli.main(["report", "--results", str(src / "out"), "--out", str(tmp_path / "rep")]) == 0
        assert (tmp_path / "rep" / "summary.csv").exists()

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate"])
        assert info.value.code == 2
