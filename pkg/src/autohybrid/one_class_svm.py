"""nu one-class SVM with RBF kernel and a fuzzified membership function.

The dual is solved in the normalized form

    min_a 0.5 a' K a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1

and the decision score is ``f(x) = sum_i a_i k(x_i, x) - rho``. Membership
rescales the score linearly so the hull boundary maps to 0 and the deepest
training point to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._smo import gram_or_empty, iteration_cap, kernel_expansion, rbf_gamma, rbf_kernel, smo_solve
from .errors import DimensionMismatch, FitFailure
from .learners.base import Standardizer, as_matrix

KKT_TOL = 1e-3
DEFAULT_NU = 0.001


@dataclass(frozen=True)
class OneClassSVMModel:
    support_vectors: np.ndarray
    alpha: np.ndarray
    rho: float
    sigma: float
    nu: float
    f_max: float
    standardizer: Standardizer
    n_train: int

    @property
    def d(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def label(self) -> str:
        return f"OCSVM(nu={self.nu!r},sigma={self.sigma!r})"

    def decision(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"decider expects {self.d} features, got {X.shape[1]}")
        Xs = self.standardizer.transform(X)
        return kernel_expansion(Xs, self.support_vectors, self.alpha, self.sigma) - self.rho

    def membership(self, X) -> np.ndarray:
        return fuzzify(self.decision(X), self.f_max)


def fuzzify(scores: np.ndarray, f_max: float) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if f_max > 0:
        return np.clip(scores / f_max, 0.0, 1.0)
    return (scores >= 0).astype(np.float64)


def fit_ocsvm(X, sigma: float, nu: float = DEFAULT_NU, standardize: bool = False) -> OneClassSVMModel:
    """Fit the one-class SVM on ``X``.

    ``X`` is expected to be standardized already; pass ``standardize=True`` to
    have the model capture and apply training statistics itself.
    """
    X = np.ascontiguousarray(as_matrix(X), dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("one-class SVM needs at least 2 rows")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    std = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
    Xs = std.transform(X)

    # Solved with bounds [0, 1] and mass nu*n (the libsvm scaling, where the
    # KKT tolerance is meant to apply), then rescaled to unit mass.
    mass = nu * n
    alpha0 = np.zeros(n)
    k = min(int(np.floor(mass)), n)
    alpha0[:k] = 1.0
    if k < n:
        alpha0[k] = mass - k
    K, full = gram_or_empty(Xs, sigma)
    alpha, rho, G, _, converged = smo_solve(
        K,
        Xs,
        rbf_gamma(sigma),
        full,
        np.ones(n, np.int64),
        np.zeros(n),
        np.ones(n),
        alpha0,
        KKT_TOL,
        iteration_cap(n),
    )
    if not converged:
        raise FitFailure(f"one-class SVM did not converge within {iteration_cap(n)} iterations")
    # Any offset between max G over a>0 and min G over a<1 satisfies the KKT
    # conditions up to the tolerance. Taking the upper end of that interval
    # leaves only bounded variables outside the hull, so at most nu*n
    # training points score below zero.
    below_upper = alpha < 1.0
    if np.any(below_upper):
        rho = float(np.min(G[below_upper]))
    alpha = alpha / mass
    rho = rho / mass
    sv = np.flatnonzero(alpha > 0)
    model = OneClassSVMModel(
        support_vectors=np.ascontiguousarray(Xs[sv]),
        alpha=alpha[sv],
        rho=float(rho),
        sigma=float(sigma),
        nu=float(nu),
        f_max=0.0,
        standardizer=std,
        n_train=n,
    )
    # scored through the same path as queries so the deepest point maps to 1
    f_max = max(float(np.max(model.decision(X))), 0.0)
    return replace(model, f_max=f_max)


def decision_score(model: OneClassSVMModel, x) -> float | np.ndarray:
    """f(x) for one point (returns a float) or for every row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(model.decision(x[None, :])[0])
    return model.decision(x)


def membership(model: OneClassSVMModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(model.membership(x[None, :])[0])
    return model.membership(x)


def dual_objective(model: OneClassSVMModel) -> float:
    """0.5 a' K a over the support vectors (zero-weight rows contribute nothing)."""
    K = rbf_kernel(model.support_vectors, model.support_vectors, model.sigma)
    return 0.5 * float(model.alpha @ K @ model.alpha)


def training_alpha(model: OneClassSVMModel) -> np.ndarray:
    """Dual coefficients; only support vectors are stored, the rest are 0."""
    return model.alpha
