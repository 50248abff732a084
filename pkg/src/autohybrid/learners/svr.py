"""Epsilon-insensitive RBF support vector regression."""

from __future__ import annotations

import numpy as np

from .._smo import gram_or_empty, iteration_cap, kernel_expansion, rbf_gamma, smo_solve
from ..errors import FitFailure

KKT_TOL = 1e-3


def fit_svr(Xs: np.ndarray, y: np.ndarray, hp, seed) -> dict:
    sigma = float(hp["sigma"])
    C = float(hp["C"])
    eps = float(hp["epsilon"])
    n = Xs.shape[0]
    K, full = gram_or_empty(Xs, sigma)
    # variables 0..n-1 are alpha (y=+1), n..2n-1 are alpha* (y=-1)
    ysign = np.concatenate([np.ones(n, np.int64), -np.ones(n, np.int64)])
    p = np.concatenate([eps - y, eps + y])
    Cvec = np.full(2 * n, C)
    cap = iteration_cap(2 * n)
    alpha, rho, _, _, converged = smo_solve(
        K, Xs, rbf_gamma(sigma), full, ysign, p, Cvec, np.zeros(2 * n), KKT_TOL, cap
    )
    if not converged:
        raise FitFailure(f"SVR did not converge within {cap} iterations")
    coef = alpha[:n] - alpha[n:]
    sv = np.flatnonzero(coef != 0.0)
    return {
        "support": np.ascontiguousarray(Xs[sv]),
        "coef": coef[sv],
        "offset": -float(rho),
        "sigma": sigma,
    }


def predict_svr(params, Xs: np.ndarray) -> np.ndarray:
    if params["coef"].size == 0:
        return np.full(Xs.shape[0], params["offset"])
    return kernel_expansion(Xs, params["support"], params["coef"], params["sigma"]) + params["offset"]
