"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line
that the terminal summary prints (see conftest.py).

Run alone with ``pytest tests/test_acceptance.py -v``; criterion 3 takes
roughly twenty minutes on one core.
"""

import csv
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import integrate, optimize

import support
from autohybrid.bench import ExperimentConfig, run_benchmark
from autohybrid.evaluation import ConvergenceTrace, aggregate_traces, make_split, t_multiplier
from autohybrid.grid_search import combine_cached, fit_submodel_pool, grid_search_hybrid
from autohybrid.hybrid_model import assemble
from autohybrid.learners import LearnerSpec, fit, fit_arrays
from autohybrid.one_class_svm import fit_ocsvm, training_alpha
from autohybrid.renewables import (
    PVFleetTemplate,
    WindSiteConfig,
    calibrate_alpha,
    height_correct,
    pv_build_template,
    pv_calibrate,
    pv_forecast,
)
from autohybrid.spaces import GridDefinition, decider_params, predictor_spec
from autohybrid.synthetic import friedman, interp_extrap_task, to_csv
from autohybrid.tpe import TPESettings, run_random, run_tpe, tpe_search_hybrid
from support import bowl, bowl_space, micro_grid, naive_ranking, random_hybrid, wind_site


def verdict(n, ok, detail):
    support.ACCEPTANCE[n] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def specs_of(grid, seed=0):
    p = [predictor_spec(c, seed) for c in grid.predictor_configs()]
    d = [decider_params(c) for c in grid.decider_configs()]
    return p, d


def test_criterion_01_cached_grid_matches_oracle():
    t0 = time.perf_counter()
    data = friedman(200, 5, seed=11)
    split = make_split(data.n, 0)
    p, d = specs_of(micro_grid(mlp=(3, 8), svr=(0.5, 1.5), ocsvm=(0.5, 2.0)))
    truth = [data.target[split.fold(k)[1]] for k in range(split.n_folds)]
    ranking = combine_cached(fit_submodel_pool(p, d, split, data), truth)
    oracle = naive_ranking(p, d, split, data)
    elapsed = time.perf_counter() - t0
    same_order = [(r.interp, r.extrap, r.decider) for r in ranking] == [t for t, _ in oracle]
    worst = max(abs(r.mean_mae - s) for r, (_, s) in zip(ranking, oracle))
    verdict(
        1,
        same_order and len(ranking) == 5 * 5 * 2 and worst <= 1e-9 and elapsed < 60,
        f"{len(ranking)} triples, identical order={same_order}, max |dMAE|={worst:.1e}, {elapsed:.1f}s",
    )


def test_criterion_02_fit_counts():
    data = friedman(120, 5, seed=3)
    _, report = grid_search_hybrid(data, GridDefinition.default(), make_split(data.n, 0))
    c = report["counters"]
    ok = (
        c["predictor_configs"] == 64
        and c["decider_configs"] == 15
        and c["fits_per_fold"] == 79
        and c["fits_performed"] == 316
        and c["combinations_evaluated"] == 61_440
    )
    verdict(2, ok, f"{c['fits_per_fold']} fits per fold, {c['fits_performed']} fits, {c['combinations_evaluated']} combinations")


def test_criterion_03_grid_tpe_parity_and_speed():
    t_start = time.perf_counter()
    rows, ok = [], True
    for seed in (101, 202, 303):
        data = friedman(500, 5, seed=seed)
        split = make_split(data.n, 0)
        t0 = time.perf_counter()
        _, grid_report = grid_search_hybrid(data, GridDefinition.default(), split, seed=0)
        t_grid = time.perf_counter() - t0
        t0 = time.perf_counter()
        _, tpe_report, trace = tpe_search_hybrid(data, split, TPESettings(n_trials=500, seed=0))
        t_tpe = time.perf_counter() - t0
        gap = abs(grid_report["test_mae"] - tpe_report["test_mae"]) / grid_report["test_mae"]
        ok &= gap <= 0.15 and t_grid < t_tpe and len(trace.trials) == 500
        rows.append(f"seed {seed}: gap {gap:.3f}, grid {t_grid:.0f}s vs tpe {t_tpe:.0f}s")
    total = time.perf_counter() - t_start
    ok &= total < 30 * 60
    verdict(3, ok, "; ".join(rows) + f"; total {total / 60:.1f} min")


def test_criterion_04_blending():
    violations = 0
    for seed in range(20):
        h, d = random_hybrid(seed)
        Q = np.random.default_rng(seed + 7).normal(scale=2.0, size=(1000, d))
        _, yi, ye = h.components(Q)
        y = h.predict(Q)
        violations += int(np.sum((y < np.minimum(yi, ye)) | (y > np.maximum(yi, ye))))

    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(120, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1]
    mlp = fit_arrays(LearnerSpec("MLP", {"n_neurons": 6}, seed=1), X, y)
    lr = fit_arrays(LearnerSpec("LR"), X, y)
    dec = fit_ocsvm(X, 0.5, 0.05, standardize=True)
    Z = dec.standardizer.transform(X)
    offset = np.abs(Z).max() + 10 * dec.sigma + 0.5
    Zq = np.column_stack([np.full(50, offset), np.linspace(-3, 3, 50)])
    Zq = np.vstack([Zq, -Zq[:, ::-1]])
    Q = Zq * dec.standardizer.scale + dec.standardizer.mean
    dist = np.sqrt(((dec.standardizer.transform(Q)[:, None] - Z[None]) ** 2).sum(-1)).min(axis=1)
    far_ok = bool(np.all(dist > 10 * dec.sigma)) and np.array_equal(assemble(mlp, lr, dec).predict(Q), lr.predict(Q))
    verdict(4, violations == 0 and far_ok, f"{violations} bound violations in 20x1000 queries; far field exact={far_ok}")


def test_criterion_05_nu_property():
    worst_excess, feasible = -np.inf, True
    for n in (200, 500):
        for nu in (0.01, 0.05, 0.1):
            for seed in range(5):
                X = np.random.default_rng(seed).normal(size=(n, 2))
                model = fit_ocsvm(X, 1.0, nu)
                frac = np.mean(model.decision(X) < 0)
                worst_excess = max(worst_excess, frac - (nu + 2 / np.sqrt(n)))
                a = training_alpha(model)
                feasible &= bool(np.all(a >= 0) and np.all(a <= 1 / (nu * n) + 1e-12) and abs(a.sum() - 1) <= 1e-6)
    verdict(5, worst_excess <= 0 and feasible, f"worst outlier-fraction margin {worst_excess:+.3f}, feasible={feasible}")


def test_criterion_06_tpe_beats_random():
    space = bowl_space()
    tpe, rnd, monotone = [], [], True
    for seed in range(20):
        best, trace = run_tpe(bowl, space, TPESettings(seed=seed, n_trials=100))
        tpe.append(best.Q)
        monotone &= bool(np.all(np.diff(trace.runs[0]) <= 0))
        best, trace = run_random(bowl, space, 100, seed=seed)
        rnd.append(best.Q)
        monotone &= bool(np.all(np.diff(trace.runs[0]) <= 0))
    mt, mr = float(np.median(tpe)), float(np.median(rnd))
    verdict(6, mt < mr and monotone, f"median best Q: TPE {mt:.4f} vs random {mr:.4f}; monotone={monotone}")


def decimal_power_law(v, h1, h2, alpha):
    getcontext().prec = 40
    ratio = Decimal(repr(h2)) / Decimal(repr(h1))
    return float(Decimal(repr(v)) * (Decimal(repr(alpha)) * ratio.ln()).exp())


def test_criterion_07_power_law():
    rng = np.random.default_rng(7)
    v = rng.uniform(0, 40, 2000)
    trivial = all(
        height_correct(x, WindSiteConfig(h, h, a)) == x and height_correct(x, WindSiteConfig(10, h, 0.0)) == x
        for x, h, a in zip(v[:200], rng.uniform(1, 200, 200), rng.uniform(0, 1, 200))
    )
    h1, h2, a = rng.uniform(1, 200, 2000), rng.uniform(1, 200, 2000), rng.uniform(0, 1, 2000)
    worst = 0.0
    for x, p, q, e in zip(v, h1, h2, a):
        ref = decimal_power_law(float(x), float(p), float(q), float(e))
        got = height_correct(float(x), WindSiteConfig(float(p), float(q), float(e)))
        worst = max(worst, abs(got - ref) / ref if ref else abs(got))
    verdict(7, trivial and worst <= 1e-12, f"identity cases exact={trivial}; max rel error {worst:.1e} over 2000 fuzzed inputs")


def test_criterion_08_alpha_recovery():
    t0 = time.perf_counter()
    curve, wind, power = wind_site(0.20)
    clean = calibrate_alpha(curve, 10, 100, wind, power)
    curve, wind, power = wind_site(0.20, noise=0.05, seed=1)
    noisy = calibrate_alpha(curve, 10, 100, wind, power)
    elapsed = time.perf_counter() - t0
    ok = abs(clean - 0.2) <= 0.01 and abs(noisy - 0.2) <= 0.03 and elapsed < 10
    verdict(8, ok, f"noise-free {clean:.2f}, 5% noise {noisy:.2f}, {elapsed:.2f}s")


def t_quantile_by_quadrature(p, dof):
    from math import gamma, pi, sqrt

    c = gamma((dof + 1) / 2) / (sqrt(dof * pi) * gamma(dof / 2))

    def cdf(t):
        return 0.5 + integrate.quad(lambda s: c * (1 + s * s / dof) ** (-(dof + 1) / 2), 0, t, epsabs=1e-14)[0]

    return optimize.brentq(lambda t: cdf(t) - p, 0, 50, xtol=1e-14)


def test_criterion_09_statistics():
    m = t_multiplier(5)
    oracle = t_quantile_by_quadrature(0.975, 4)
    trace = ConvergenceTrace.from_scores(np.random.default_rng(9).uniform(size=40))
    agg = aggregate_traces([trace] * 5)
    ok = abs(m - 2.776) <= 0.005 and abs(m - oracle) <= 1e-9 and bool(np.all(agg.half_width == 0))
    verdict(9, ok, f"t(0.975, 4) = {m:.6f} (quadrature oracle {oracle:.6f}); max half width {agg.half_width.max()}")


def test_criterion_10_extrapolation_benefit():
    wins, detail = 0, []
    for seed in range(5):
        train, X_test, y_test = interp_extrap_task(seed=seed)
        mlp = fit(LearnerSpec("MLP", {"n_neurons": 10}, seed=seed), train)
        lr = fit(LearnerSpec("LR"), train)
        h = assemble(mlp, lr, fit_ocsvm(train.features, 0.25, 0.001, standardize=True))
        e_h = float(np.mean(np.abs(h.predict(X_test) - y_test)))
        e_m = float(np.mean(np.abs(mlp.predict(X_test) - y_test)))
        wins += e_h < e_m
        detail.append(f"{e_h:.3f}/{e_m:.3f}")
    verdict(10, wins >= 4, f"hybrid wins {wins}/5 (hybrid/MLP MAE: {', '.join(detail)})")


def test_criterion_11_pv_round_trip():
    rng = np.random.default_rng(11)
    exact = True
    for peak in (1.0, 9.3, 47.0, 250.0):
        profile = peak * np.clip(np.sin(np.linspace(-0.3, np.pi + 0.3, 96)), 0, None) * rng.uniform(0.7, 1.0, 96)
        ids = ["a", "b", "c", "d", "e"]
        t = pv_build_template({i: profile for i in ids}, {i: peak for i in ids})
        exact &= all(np.array_equal(pv_forecast(t, i, t.profile), profile) for i in ids)
    pred = rng.uniform(0, 1, 200)
    template = PVFleetTemplate({"x": 35.0}, pred)
    c = pv_calibrate(template, "x", 0.8 * 35.0 * pred, pred)
    verdict(11, exact and c == 0.8, f"identical-fleet round trip exact={exact}; recovered c={c!r}")


def _strip_columns(path, drop):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, h in enumerate(rows[0]) if h not in drop]
    return "\n".join(",".join(r[i] for i in keep) for r in rows).encode()


def test_criterion_12_bench_determinism(tmp_path):
    to_csv(friedman(80, 5, seed=5, name="fr"), tmp_path / "fr.csv")
    doc = {
        "datasets": [{"path": "fr.csv", "target": "y", "name": "fr"}],
        "methods": ["grid", "tpe"],
        "seeds": [0, 1, 2],
        "tpe": {"n_trials": 40, "n_startup": 20},
        "grid": micro_grid(mlp=(2, 4), svr=(0.5,), rf=(20,), ocsvm=(0.5, 1.0)).to_json(),
    }
    outputs = []
    for run in ("first", "second"):
        cfg = ExperimentConfig.from_dict({**doc, "output_dir": run}, tmp_path)
        _, code = run_benchmark(cfg)
        assert code == 0
        outputs.append(tmp_path / run)
    a, b = outputs
    same_results = _strip_columns(a / "results.csv", {"wall_time_s"}) == _strip_columns(b / "results.csv", {"wall_time_s"})
    same_conv = (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()
    same_traces = _strip_columns(a / "traces.csv", {"duration_s"}) == _strip_columns(b / "traces.csv", {"duration_s"})
    verdict(12, same_results and same_conv and same_traces,
            f"results.csv identical={same_results}, convergence.csv identical={same_conv}, traces.csv identical={same_traces}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
