"""Splitting, metrics and statistical aggregation for the benchmark protocol.

Protocol: 20 % of the rows are held out for testing; the remaining 80 % (the
tuning partition) are dealt round-robin into four folds, so each fold
validates on 20 % of the data and trains on 60 %.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc

from .errors import EmptyInput, LengthMismatch, NonPositiveNormalizer, TooFewRows, TooFewValues

N_FOLDS = 4
TEST_FRACTION = 0.2
MIN_SPLIT_ROWS = 20
BENCHMARK_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    n: int
    test: np.ndarray
    tuning: np.ndarray
    folds: tuple  # validation row indices per fold

    def fold(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(train rows, validation rows) of fold ``k``."""
        val = self.folds[k]
        train = np.concatenate([f for i, f in enumerate(self.folds) if i != k])
        return train, val

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def make_split(n: int, seed: int) -> SplitPlan:
    if n < MIN_SPLIT_ROWS:
        raise TooFewRows(f"need at least {MIN_SPLIT_ROWS} rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(math.floor(TEST_FRACTION * n))
    test = np.sort(perm[:n_test])
    rest = perm[n_test:]
    folds = tuple(np.sort(rest[k::N_FOLDS]) for k in range(N_FOLDS))
    return SplitPlan(seed=seed, n=n, test=test, tuning=np.sort(rest), folds=folds)


def mae(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {truth.size} targets")
    if pred.size == 0:
        raise EmptyInput("mae of empty vectors")
    return float(np.mean(np.abs(pred - truth)))


def nmae(pred, truth, normalizer: float) -> float:
    if not normalizer > 0:
        raise NonPositiveNormalizer(f"normalizer must be > 0, got {normalizer}")
    return mae(pred, truth) / normalizer


def mean_cv_score(per_fold_mae: Sequence[float]) -> float:
    if len(per_fold_mae) == 0:
        raise EmptyInput("no fold scores")
    return float(np.mean(np.asarray(per_fold_mae, dtype=np.float64)))


def student_t_cdf(t: float, dof: int) -> float:
    x = dof / (dof + t * t)
    tail = 0.5 * betainc(dof / 2.0, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def student_t_quantile(p: float, dof: int) -> float:
    """Inverse of :func:`student_t_cdf` by bracketing root search."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, dof)
    hi = 1.0
    while student_t_cdf(hi, dof) < p:
        hi *= 2.0
    return brentq(lambda t: student_t_cdf(t, dof) - p, 0.0, hi, xtol=1e-12, rtol=1e-14)


def t_multiplier(n: int, level: float = 0.95) -> float:
    return student_t_quantile(1.0 - (1.0 - level) / 2.0, n - 1)


def _shifted_mean_std(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and sample std computed around the first row, so identical
    rows give their own value and exactly zero spread."""
    ref = M[0]
    dev = M - ref
    return ref + dev.mean(axis=0), dev.std(axis=0, ddof=1)


def t_confidence_interval(values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """(mean, half width) of the two-sided Student-t interval."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise TooFewValues("need at least two values")
    m, s = _shifted_mean_std(v[:, None])
    return float(m[0]), t_multiplier(v.size, level) * float(s[0]) / math.sqrt(v.size)


def best_so_far(scores: Sequence[float]) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(scores, dtype=np.float64))


@dataclass
class ConvergenceTrace:
    """Best-so-far validation score per trial.

    A single run holds one row in ``runs``; an aggregated trace also carries the
    per-trial mean and confidence half width. ``trials`` optionally keeps the
    raw trial records of a single run.
    """

    runs: list = field(default_factory=list)
    mean: np.ndarray | None = None
    half_width: np.ndarray | None = None
    trials: list = field(default_factory=list)

    def __post_init__(self):
        runs = [np.asarray(r, dtype=np.float64) for r in self.runs]
        for r in runs:
            if not np.all(r[1:] <= r[:-1]):
                raise ValueError("best-so-far traces must be non-increasing")
        self.runs = runs

    @classmethod
    def from_scores(cls, scores: Sequence[float], trials: list | None = None) -> "ConvergenceTrace":
        return cls(runs=[best_so_far(scores)], trials=list(trials or []))

    @property
    def length(self) -> int:
        return len(self.runs[0]) if self.runs else 0


def aggregate_traces(runs: Sequence[ConvergenceTrace], level: float = 0.95) -> ConvergenceTrace:
    """Per-trial mean and Student-t half width over all runs.

    With a single run the half width is undefined and reported as NaN.
    """
    all_runs = [r for trace in runs for r in trace.runs]
    if not all_runs:
        raise EmptyInput("no runs to aggregate")
    lengths = {len(r) for r in all_runs}
    if len(lengths) != 1:
        raise LengthMismatch(f"runs have different trial counts: {sorted(lengths)}")
    M = np.vstack(all_runs)
    if M.shape[0] < 2:
        mean, half = M[0].copy(), np.full(M.shape[1], np.nan)
    else:
        mean, std = _shifted_mean_std(M)
        half = t_multiplier(M.shape[0], level) * std / math.sqrt(M.shape[0])
    return ConvergenceTrace(runs=all_runs, mean=mean, half_width=half)


def pad_trace(trace: np.ndarray, length: int) -> np.ndarray:
    """Extend an early-stopped best-so-far trace by holding its final value."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size >= length:
        return trace[:length]
    return np.concatenate([trace, np.full(length - trace.size, trace[-1])])
