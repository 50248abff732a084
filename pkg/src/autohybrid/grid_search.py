"""Exhaustive hybrid-model design over a cached sub-model pool.

Every predictor and every decider is fitted once per fold and only its
validation output is kept. All (interpolator, extrapolator, decider) triples
are then scored by blending cached vectors, so the number of fits grows with
the sum of the grid sizes while the number of scored triples is their
product.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AllFitsFailed, EmptyRanking, FitFailure
from .evaluation import SplitPlan, mae
from .hybrid_model import HybridModel, assemble, blend
from .learners import Dataset, LearnerSpec, fit_arrays
from .one_class_svm import fit_ocsvm
from .spaces import GridDefinition, decider_params, hybrid_config, predictor_spec

log = logging.getLogger(__name__)

RANKING_HEAD = 20
# cap on the blended (interp, extrap, rows) block held in memory at once
_BLOCK_ELEMENTS = 4_000_000


@dataclass
class PredictionCache:
    predictor_labels: list
    decider_labels: list
    predictions: list  # per fold: (n_predictors, n_val), NaN rows for failures
    memberships: list  # per fold: (n_deciders, n_val)
    predictor_ok: np.ndarray  # (n_folds, n_predictors)
    decider_ok: np.ndarray  # (n_folds, n_deciders)
    predictor_seconds: np.ndarray
    decider_seconds: np.ndarray
    fits_performed: int = 0
    combinations_evaluated: int = 0
    failures: list = field(default_factory=list)

    @property
    def n_folds(self) -> int:
        return len(self.predictions)


class RankedTriple(NamedTuple):
    interp: int
    extrap: int
    decider: int
    mean_mae: float


def _fit_predictor(spec: LearnerSpec, data: Dataset, train, val):
    t0 = time.perf_counter()
    try:
        model = fit_arrays(spec, data.features[train], data.target[train])
        out = model.predict(data.features[val])
        if not np.all(np.isfinite(out)):
            raise FitFailure(f"{spec.label} produced non-finite predictions")
        err = None
    except FitFailure as exc:
        out, err = None, str(exc)
    return out, err, time.perf_counter() - t0


def _fit_decider(sigma: float, nu: float, data: Dataset, train, val):
    t0 = time.perf_counter()
    try:
        out = fit_ocsvm(data.features[train], sigma, nu, standardize=True).membership(data.features[val])
        err = None
    except FitFailure as exc:
        out, err = None, str(exc)
    return out, err, time.perf_counter() - t0


def fit_submodel_pool(
    predictor_grid: Sequence[LearnerSpec],
    decider_grid: Sequence[tuple[float, float]],
    folds: SplitPlan,
    data: Dataset,
    jobs: int = 1,
) -> PredictionCache:
    if not predictor_grid or not decider_grid:
        raise ValueError("predictor and decider grids must be non-empty")
    n_f, n_p, n_d = folds.n_folds, len(predictor_grid), len(decider_grid)

    tasks = []
    for k in range(n_f):
        train, val = folds.fold(k)
        for i, spec in enumerate(predictor_grid):
            tasks.append(("p", k, i, lambda spec=spec, tr=train, va=val: _fit_predictor(spec, data, tr, va)))
        for j, (sigma, nu) in enumerate(decider_grid):
            tasks.append(("d", k, j, lambda s=sigma, v=nu, tr=train, va=val: _fit_decider(s, v, data, tr, va)))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda t: t[3](), tasks))
    else:
        results = [t[3]() for t in tasks]

    n_val = [folds.fold(k)[1].size for k in range(n_f)]
    cache = PredictionCache(
        predictor_labels=[s.label for s in predictor_grid],
        decider_labels=[f"OCSVM(nu={nu!r},sigma={sigma!r})" for sigma, nu in decider_grid],
        predictions=[np.full((n_p, n_val[k]), np.nan) for k in range(n_f)],
        memberships=[np.full((n_d, n_val[k]), np.nan) for k in range(n_f)],
        predictor_ok=np.zeros((n_f, n_p), bool),
        decider_ok=np.zeros((n_f, n_d), bool),
        predictor_seconds=np.zeros((n_f, n_p)),
        decider_seconds=np.zeros((n_f, n_d)),
    )
    for (kind, k, idx, _), (out, err, seconds) in zip(tasks, results):
        cache.fits_performed += 1
        if kind == "p":
            cache.predictor_seconds[k, idx] = seconds
            label = cache.predictor_labels[idx]
            target, ok = cache.predictions[k], cache.predictor_ok
        else:
            cache.decider_seconds[k, idx] = seconds
            label = cache.decider_labels[idx]
            target, ok = cache.memberships[k], cache.decider_ok
        if err is not None:
            log.warning("fold %d: %s failed: %s", k, label, err)
            cache.failures.append({"fold": k, "model": label, "error": err})
            continue
        target[idx] = out
        ok[k, idx] = True

    for k in range(n_f):
        if not cache.predictor_ok[k].any():
            raise AllFitsFailed(f"fold {k}: no usable predictor")
        if not cache.decider_ok[k].any():
            raise AllFitsFailed(f"fold {k}: no usable decider")
    return cache


def _fold_scores(P: np.ndarray, M: np.ndarray, truth: np.ndarray, jobs: int = 1) -> np.ndarray:
    """MAE of every blended (interp, extrap, decider) triple on one fold."""
    n_p, n_val = P.shape
    rows = max(1, _BLOCK_ELEMENTS // max(1, n_p * n_val))

    def per_decider(k: int) -> np.ndarray:
        out = np.empty((n_p, n_p))
        mu = M[k]
        for a in range(0, n_p, rows):
            H = blend(mu, P[a : a + rows, None, :], P[None, :, :])
            out[a : a + rows] = np.mean(np.abs(H - truth), axis=-1)
        return out

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(per_decider, range(M.shape[0])))
    else:
        parts = [per_decider(k) for k in range(M.shape[0])]
    return np.stack(parts, axis=-1)


def score_table(cache: PredictionCache, truth_per_fold: Sequence[np.ndarray], jobs: int = 1) -> np.ndarray:
    """Mean validation MAE over folds, shape (n_predictors, n_predictors, n_deciders);
    +inf where any component failed in some fold."""
    if len(truth_per_fold) != cache.n_folds:
        raise ValueError(f"{len(truth_per_fold)} truth vectors for {cache.n_folds} folds")
    n_p = len(cache.predictor_labels)
    n_d = len(cache.decider_labels)
    total = np.zeros((n_p, n_p, n_d))
    for k in range(cache.n_folds):
        truth = np.asarray(truth_per_fold[k], dtype=np.float64)
        if truth.shape[0] != cache.predictions[k].shape[1]:
            raise ValueError(f"fold {k}: truth length does not match cached predictions")
        total += _fold_scores(cache.predictions[k], cache.memberships[k], truth, jobs)
    scores = total / cache.n_folds
    p_ok = cache.predictor_ok.all(axis=0)
    d_ok = cache.decider_ok.all(axis=0)
    usable = p_ok[:, None, None] & p_ok[None, :, None] & d_ok[None, None, :]
    scores[~usable] = np.inf
    cache.combinations_evaluated = n_p * n_p * n_d
    return scores


def combine_cached(cache: PredictionCache, truth_per_fold: Sequence[np.ndarray], jobs: int = 1) -> list[RankedTriple]:
    """All usable triples ranked by mean CV MAE, ties in enumeration order."""
    scores = score_table(cache, truth_per_fold, jobs)
    flat = scores.ravel()
    order = np.argsort(flat, kind="stable")
    order = order[np.isfinite(flat[order])]
    if order.size == 0:
        raise EmptyRanking("no triple is usable in every fold")
    i, j, k = np.unravel_index(order, scores.shape)
    return [RankedTriple(int(a), int(b), int(c), float(s)) for a, b, c, s in zip(i, j, k, flat[order])]


def grid_search_hybrid(
    data: Dataset,
    grids: GridDefinition | None,
    split: SplitPlan,
    seed: int | None = None,
    jobs: int = 1,
) -> tuple[HybridModel, dict]:
    """Design a hybrid model by cached grid search on the tuning folds, refit
    the winning triple on the whole tuning partition and score the test rows."""
    t_start = time.perf_counter()
    grids = grids or GridDefinition.default()
    seed = split.seed if seed is None else seed
    p_cfgs = grids.predictor_configs()
    d_cfgs = grids.decider_configs()
    p_specs = [predictor_spec(c, seed) for c in p_cfgs]
    d_params = [decider_params(c) for c in d_cfgs]

    t0 = time.perf_counter()
    cache = fit_submodel_pool(p_specs, d_params, split, data, jobs)
    t_pool = time.perf_counter() - t0

    t0 = time.perf_counter()
    truth = [data.target[split.fold(k)[1]] for k in range(split.n_folds)]
    ranking = combine_cached(cache, truth, jobs)
    t_combine = time.perf_counter() - t0

    t0 = time.perf_counter()
    best = ranking[0]
    X_tune, y_tune = data.features[split.tuning], data.target[split.tuning]
    interp = fit_arrays(p_specs[best.interp], X_tune, y_tune)
    extrap = fit_arrays(p_specs[best.extrap], X_tune, y_tune)
    sigma, nu = d_params[best.decider]
    decider = fit_ocsvm(X_tune, sigma, nu, standardize=True)
    cfg = hybrid_config(p_cfgs[best.interp], p_cfgs[best.extrap], d_cfgs[best.decider])
    hybrid = assemble(interp, extrap, decider, cfg)
    test_mae = mae(hybrid.predict(data.features[split.test]), data.target[split.test])
    t_refit = time.perf_counter() - t0

    def describe(r: RankedTriple) -> dict:
        return {
            "interp": cache.predictor_labels[r.interp],
            "extrap": cache.predictor_labels[r.extrap],
            "decider": cache.decider_labels[r.decider],
            "mean_mae": r.mean_mae,
        }

    report = {
        "method": "grid",
        "chosen": {k: v for k, v in describe(best).items() if k != "mean_mae"},
        "chosen_config": cfg,
        "best_cv_mae": best.mean_mae,
        "ranking_head": [describe(r) for r in ranking[:RANKING_HEAD]],
        "counters": {
            "folds": split.n_folds,
            "predictor_configs": len(p_specs),
            "decider_configs": len(d_params),
            "fits_performed": cache.fits_performed,
            "fits_per_fold": cache.fits_performed // split.n_folds,
            "combinations_evaluated": cache.combinations_evaluated,
            "usable_combinations": len(ranking),
            "failed_fits": len(cache.failures),
        },
        "timings_s": {
            "pool_fit": t_pool,
            "combine": t_combine,
            "refit": t_refit,
            "total": time.perf_counter() - t_start,
        },
        "test_mae": test_mae,
        "failures": cache.failures,
    }
    return hybrid, report
