"""Tree Parzen Estimator over tree-structured configuration spaces, plus the
TPE-driven designer for hybrid models.

Suggestions walk the space in declaration order (parents before children).
For each active parameter, candidates are drawn from the density of the good
trials and the one with the largest good/bad density ratio is kept; children
then condition on the chosen parent value.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from .config_space import (
    ConfigurationSpace,
    ContinuousRange,
    ParameterSpec,
    _is_active,
    _plain,
    sample_random,
    validate,
)
from .errors import FitFailure, InvalidConfig
from .evaluation import ConvergenceTrace, SplitPlan, mae, mean_cv_score
from .hybrid_model import HybridModel, assemble, blend
from .learners import Dataset, fit_arrays
from .one_class_svm import fit_ocsvm
from .spaces import GridDefinition, hybrid_parts, hybrid_tpe_space

log = logging.getLogger(__name__)

MIN_BANDWIDTH = 0.01
MAX_BANDWIDTH = 1.0


@dataclass(frozen=True)
class Trial:
    config: Mapping[str, Any]
    Q: float
    status: str = "ok"
    duration: float = 0.0

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"unknown trial status {self.status!r}")
        if self.status == "failed":
            object.__setattr__(self, "Q", math.inf)
        elif not math.isfinite(self.Q):
            raise ValueError("ok trials need a finite score")


@dataclass(frozen=True)
class EarlyStop:
    patience: int = 50
    min_rel_improvement: float = 1e-3

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass(frozen=True)
class TPESettings:
    gamma: float = 0.25
    n_startup: int = 20
    n_candidates: int = 24
    n_trials: int = 500
    seed: int = 0
    early_stop: EarlyStop | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.n_startup < self.n_trials:
            raise ValueError("n_startup must be smaller than n_trials")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TPESettings":
        d = dict(d)
        es = d.pop("early_stop", None)
        if es is True:
            es = EarlyStop()
        elif isinstance(es, Mapping):
            es = EarlyStop(**es)
        elif not es:
            es = None
        return cls(early_stop=es, **d)


def startup_seed(seed: int, n_observed: int) -> int:
    """Seed for the random suggestion made after ``n_observed`` trials."""
    return int(np.random.SeedSequence([seed, n_observed]).generate_state(1)[0])


def split_good_bad(history: Sequence[Trial], gamma: float) -> tuple[list[Trial], list[Trial]]:
    """Best ceil(gamma * n) successful trials versus the rest (ties by age)."""
    n_good = math.ceil(gamma * len(history))
    ranked = sorted(
        (i for i, t in enumerate(history) if t.status == "ok"),
        key=lambda i: (history[i].Q, i),
    )
    good_idx = set(ranked[:n_good])
    good = [t for i, t in enumerate(history) if i in good_idx]
    bad = [t for i, t in enumerate(history) if i not in good_idx]
    return good, bad


class _Parzen1D:
    """Truncated Gaussian mixture on [low, high] with a broad prior component."""

    def __init__(self, obs: np.ndarray, low: float, high: float):
        width = high - low
        obs = np.sort(np.asarray(obs, dtype=np.float64))
        if obs.size:
            padded = np.concatenate([[low], obs, [high]])
            bw = np.maximum(np.diff(padded)[:-1], np.diff(padded)[1:])
        else:
            bw = np.zeros(0)
        # the floor shrinks with the number of observations so a tight early
        # cluster cannot freeze the search; it reaches 1% of the width at 99
        floor = max(MIN_BANDWIDTH, 1.0 / (1 + obs.size)) * width
        bw = np.clip(bw, floor, MAX_BANDWIDTH * width)
        self.mu = np.concatenate([obs, [0.5 * (low + high)]])
        self.sigma = np.concatenate([bw, [width]])
        self.weights = np.full(self.mu.size, 1.0 / self.mu.size)
        self.low, self.high = low, high
        self.a = (low - self.mu) / self.sigma
        self.b = (high - self.mu) / self.sigma
        self.mass = np.maximum(ndtr(self.b) - ndtr(self.a), 1e-300)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(self.mu.size, size=size, p=self.weights)
        u = rng.uniform(size=size)
        lo = ndtr(self.a[comp])
        p = lo + u * (ndtr(self.b[comp]) - lo)
        p = np.clip(p, 1e-300, 1 - 1e-16)
        x = self.mu[comp] + self.sigma[comp] * ndtri(p)
        return np.clip(x, self.low, self.high)

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[:, None]
        z = (x - self.mu) / self.sigma
        log_comp = (
            -0.5 * z * z
            - np.log(self.sigma * math.sqrt(2 * math.pi))
            - np.log(self.mass)
            + np.log(self.weights)
        )
        return logsumexp(log_comp, axis=1)


def _to_internal(p: ParameterSpec, v: float) -> float:
    return math.log(v) if p.domain.log_scale else float(v)


def _suggest_param(
    p: ParameterSpec,
    good: list,
    bad: list,
    rng: np.random.Generator,
    n_candidates: int,
) -> Any:
    dom = p.domain
    if isinstance(dom, ContinuousRange):
        lo, hi = (math.log(dom.low), math.log(dom.high)) if dom.log_scale else (dom.low, dom.high)
        l_model = _Parzen1D(np.array([_to_internal(p, v) for v in good]), lo, hi)
        g_model = _Parzen1D(np.array([_to_internal(p, v) for v in bad]), lo, hi)
        cand = l_model.sample(rng, n_candidates)
        score = l_model.log_pdf(cand) - g_model.log_pdf(cand)
        x = float(cand[int(np.argmax(score))])
        x = math.exp(x) if dom.log_scale else x
        return min(max(x, dom.low), dom.high)
    values = dom.values
    index = {v: i for i, v in enumerate(values)}
    counts_good = np.ones(len(values))
    counts_bad = np.ones(len(values))
    for v in good:
        counts_good[index[v]] += 1
    for v in bad:
        counts_bad[index[v]] += 1
    pl = counts_good / counts_good.sum()
    pg = counts_bad / counts_bad.sum()
    cand = rng.choice(len(values), size=n_candidates, p=pl)
    score = np.log(pl[cand]) - np.log(pg[cand])
    return _plain(values[int(cand[int(np.argmax(score))])])


def suggest_next(space: ConfigurationSpace, history: Sequence[Trial], settings: TPESettings) -> dict:
    n = len(history)
    if n < settings.n_startup:
        return sample_random(space, startup_seed(settings.seed, n))
    rng = np.random.default_rng([settings.seed, n, 1])
    good, bad = split_good_bad(history, settings.gamma)
    cfg: dict = {}
    for p in space:
        if not _is_active(p, cfg):
            continue
        g_obs = [t.config[p.name] for t in good if p.name in t.config]
        b_obs = [t.config[p.name] for t in bad if p.name in t.config]
        cfg[p.name] = _suggest_param(p, g_obs, b_obs, rng, settings.n_candidates)
    return cfg


def observe(history: Sequence[Trial], trial: Trial, space: ConfigurationSpace | None = None) -> tuple:
    """Return a new history with ``trial`` appended."""
    if space is not None:
        report = validate(space, trial.config)
        if not report:
            raise InvalidConfig(report.message)
    return tuple(history) + (trial,)


def _evaluate(objective: Callable[[dict], float], cfg: dict) -> Trial:
    t0 = time.perf_counter()
    try:
        q = float(objective(cfg))
        status = "ok" if math.isfinite(q) else "failed"
    except FitFailure as exc:
        log.warning("trial failed: %s", exc)
        q, status = math.inf, "failed"
    return Trial(cfg, q, status, time.perf_counter() - t0)


def _run(objective, space, n_trials, propose, early_stop, n_startup):
    history: tuple = ()
    best_q = math.inf
    last_improvement = 0
    for t in range(1, n_trials + 1):
        cfg = propose(history)
        trial = _evaluate(objective, cfg)
        history = observe(history, trial, space)
        if trial.Q < best_q:
            significant = not math.isfinite(best_q) or (
                early_stop is None or best_q - trial.Q > early_stop.min_rel_improvement * abs(best_q)
            )
            best_q = trial.Q
            if significant:
                last_improvement = t
        if early_stop is not None and t - max(last_improvement, n_startup) >= early_stop.patience:
            break
    scores = [tr.Q for tr in history]
    best = min(enumerate(history), key=lambda it: (it[1].Q, it[0]))[1]
    return best, ConvergenceTrace.from_scores(scores, list(history))


def run_tpe(objective: Callable[[dict], float], space: ConfigurationSpace, settings: TPESettings):
    """Sequential suggest / evaluate / observe loop.

    Returns the incumbent trial and the best-so-far trace (whose ``trials``
    holds the full history). Objective failures become failed trials.
    """
    return _run(
        objective,
        space,
        settings.n_trials,
        lambda history: suggest_next(space, history, settings),
        settings.early_stop,
        settings.n_startup,
    )


def run_random(objective: Callable[[dict], float], space: ConfigurationSpace, n_trials: int, seed: int = 0):
    """Random-search baseline with the same outputs as :func:`run_tpe`."""
    return _run(
        objective,
        space,
        n_trials,
        lambda history: sample_random(space, startup_seed(seed, len(history))),
        None,
        0,
    )


def trace_rows(trace: ConvergenceTrace) -> list[dict]:
    """Rows of the per-trial trace CSV."""
    best = trace.runs[0]
    return [
        {
            "trial_index": i + 1,
            "Q": t.Q,
            "best_so_far": float(best[i]),
            "duration_s": t.duration,
            "config_json": json.dumps(dict(t.config), sort_keys=True),
        }
        for i, t in enumerate(trace.trials)
    ]


# hybrid-model designer -------------------------------------------------------

@dataclass
class _FitCounter:
    fits: int = 0


def _hybrid_cv_objective(data: Dataset, split: SplitPlan, seed: int, counter: _FitCounter, jobs: int):
    folds = [split.fold(k) for k in range(split.n_folds)]

    def one_fold(cfg, k):
        train, val = folds[k]
        X, y = data.features[train], data.target[train]
        interp_spec, extrap_spec, (sigma, nu) = hybrid_parts(cfg, seed)
        interp = fit_arrays(interp_spec, X, y)
        extrap = interp if extrap_spec == interp_spec else fit_arrays(extrap_spec, X, y)
        decider = fit_ocsvm(X, sigma, nu, standardize=True)
        Xv = data.features[val]
        pred = blend(decider.membership(Xv), interp.predict(Xv), extrap.predict(Xv))
        return mae(pred, data.target[val]), 3 if extrap is not interp else 2

    def objective(cfg):
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as pool:
                results = list(pool.map(lambda k: one_fold(cfg, k), range(len(folds))))
        else:
            results = []
            for k in range(len(folds)):
                results.append(one_fold(cfg, k))
        counter.fits += sum(r[1] for r in results)
        return mean_cv_score([r[0] for r in results])

    return objective


def tpe_search_hybrid(
    data: Dataset,
    split: SplitPlan,
    settings: TPESettings | None = None,
    space: ConfigurationSpace | None = None,
    jobs: int = 1,
) -> tuple[HybridModel, dict, ConvergenceTrace]:
    """Design a hybrid model with TPE on the tuning folds, refit the incumbent
    on the tuning partition and score the test rows.

    ``jobs > 1`` parallelizes the folds inside each trial; trials themselves
    stay sequential.
    """
    t_start = time.perf_counter()
    settings = settings or TPESettings(seed=split.seed)
    space = space or hybrid_tpe_space(GridDefinition.default())
    counter = _FitCounter()
    objective = _hybrid_cv_objective(data, split, settings.seed, counter, jobs)
    best, trace = run_tpe(objective, space, settings)
    t_search = time.perf_counter() - t_start
    if best.status != "ok":
        raise FitFailure("every TPE trial failed")

    t0 = time.perf_counter()
    X_tune, y_tune = data.features[split.tuning], data.target[split.tuning]
    interp_spec, extrap_spec, (sigma, nu) = hybrid_parts(best.config, settings.seed)
    interp = fit_arrays(interp_spec, X_tune, y_tune)
    extrap = fit_arrays(extrap_spec, X_tune, y_tune)
    decider = fit_ocsvm(X_tune, sigma, nu, standardize=True)
    hybrid = assemble(interp, extrap, decider, best.config)
    test_mae = mae(hybrid.predict(data.features[split.test]), data.target[split.test])
    t_refit = time.perf_counter() - t0

    n_trials = len(trace.trials)
    report = {
        "method": "tpe",
        "chosen": {
            "interp": interp_spec.label,
            "extrap": extrap_spec.label,
            "decider": decider.label,
        },
        "chosen_config": dict(best.config),
        "best_cv_mae": best.Q,
        "counters": {
            "folds": split.n_folds,
            "trials": n_trials,
            "failed_trials": sum(t.status == "failed" for t in trace.trials),
            "fits_performed": counter.fits,
            "early_stopped": n_trials < settings.n_trials,
        },
        "timings_s": {"search": t_search, "refit": t_refit, "total": time.perf_counter() - t_start},
        "test_mae": test_mae,
    }
    return hybrid, report, trace
