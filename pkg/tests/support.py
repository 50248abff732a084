"""Shared builders for the test modules."""

import itertools

import numpy as np

from autohybrid.config_space import (
    Categorical,
    Condition,
    ConfigurationSpace,
    ContinuousRange,
    GridValues,
    ParameterSpec,
)
from autohybrid.evaluation import mae
from autohybrid.hybrid_model import assemble
from autohybrid.learners import LearnerSpec, fit_arrays
from autohybrid.one_class_svm import fit_ocsvm
from autohybrid.spaces import GridDefinition

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict = {}


def micro_grid(mlp=(), svr=(), gbm=(), rf=(), lr=True, ocsvm=(1.0,), nu=0.001) -> GridDefinition:
    algorithms = [a for a, vals in (("MLP", mlp), ("SVR", svr), ("GBM", gbm), ("RF", rf)) if vals]
    if lr:
        algorithms.append("LR")
    params = [ParameterSpec("algorithm", Categorical(tuple(algorithms)))]
    if mlp:
        params.append(ParameterSpec("mlp_n_neurons", GridValues(tuple(mlp)), Condition("algorithm", "MLP")))
    if svr:
        params.append(ParameterSpec("svr_sigma", GridValues(tuple(svr)), Condition("algorithm", "SVR")))
        params.append(ParameterSpec("svr_C", GridValues((100.0,)), Condition("algorithm", "SVR")))
        params.append(ParameterSpec("svr_epsilon", GridValues((0.001,)), Condition("algorithm", "SVR")))
    if gbm:
        params.append(ParameterSpec("gbm_n_estimators", GridValues(tuple(gbm)), Condition("algorithm", "GBM")))
    if rf:
        params.append(ParameterSpec("rf_n_estimators", GridValues(tuple(rf)), Condition("algorithm", "RF")))
    deciders = ConfigurationSpace(
        (
            ParameterSpec("decider", Categorical(("OCSVM",))),
            ParameterSpec("ocsvm_sigma", GridValues(tuple(ocsvm)), Condition("decider", "OCSVM")),
            ParameterSpec("ocsvm_nu", GridValues((nu,)), Condition("decider", "OCSVM")),
        )
    )
    return GridDefinition(ConfigurationSpace(tuple(params)), deciders)


def bowl_space():
    """Two continuous coordinates plus a categorical branch whose child does
    not affect the score."""
    return ConfigurationSpace(
        (
            ParameterSpec("x", ContinuousRange(-5.0, 5.0)),
            ParameterSpec("y", ContinuousRange(-5.0, 5.0)),
            ParameterSpec("branch", Categorical(("a", "b"))),
            ParameterSpec("dummy", ContinuousRange(0.0, 1.0), Condition("branch", "b")),
        )
    )


def bowl(cfg) -> float:
    return (cfg["x"] - 1.0) ** 2 + (cfg["y"] + 2.0) ** 2


def wind_site(alpha, n=2000, noise=0.0, seed=0, ref_height=10.0, hub_height=100.0):
    """Weibull wind at the reference height and the power a turbine with the
    generic reference curve would produce at hub height."""
    from autohybrid.renewables import WindSiteConfig, reference_power_curve, wp_forecast

    rng = np.random.default_rng(seed)
    wind = 5.0 * rng.weibull(2.0, size=n)
    curve = reference_power_curve()
    power = wp_forecast(curve, WindSiteConfig(ref_height, hub_height, alpha), wind)
    if noise:
        power = power * (1 + noise * rng.standard_normal(n))
    return curve, wind, power


def naive_ranking(p_specs, d_params, split, data):
    """Refit and assemble every triple from scratch, fold by fold."""
    rows = []
    for i, e, k in itertools.product(range(len(p_specs)), range(len(p_specs)), range(len(d_params))):
        fold_mae = []
        for f in range(split.n_folds):
            tr, va = split.fold(f)
            X, y = data.features[tr], data.target[tr]
            h = assemble(
                fit_arrays(p_specs[i], X, y),
                fit_arrays(p_specs[e], X, y),
                fit_ocsvm(X, *d_params[k], standardize=True),
            )
            fold_mae.append(mae(h.predict(data.features[va]), data.target[va]))
        rows.append(((i, e, k), float(np.mean(fold_mae))))
    # stable sort on the score keeps enumeration order for ties
    return sorted(rows, key=lambda r: r[1])


def random_hybrid(seed):
    r = np.random.default_rng(seed)
    d = int(r.integers(1, 4))
    X = r.normal(size=(60, d))
    y = X @ r.normal(size=d) + np.sin(X[:, 0])
    algos = [
        LearnerSpec("LR"),
        LearnerSpec("MLP", {"n_neurons": int(r.integers(1, 6))}, seed=seed),
        LearnerSpec("RF", {"n_estimators": 10}, seed=seed),
        LearnerSpec("GBM", {"n_estimators": 10}),
        LearnerSpec("SVR", {"sigma": float(r.uniform(0.3, 2))}),
    ]
    i, e = r.choice(len(algos), 2)
    return assemble(
        fit_arrays(algos[i], X, y),
        fit_arrays(algos[e], X, y),
        fit_ocsvm(X, float(r.uniform(0.2, 2)), float(r.uniform(0.01, 0.3)), standardize=True),
    ), d
