"""SMO solver for RBF-kernel SVM duals, shared by SVR and the one-class SVM.

Solves

    min_a  0.5 a' Q a + p' a   s.t.  y' a = const,  0 <= a_i <= C_i

with ``Q_ij = y_i y_j k(x_{i mod n}, x_{j mod n})`` using second-order working
set selection. Variables may map onto the same base point (the SVR dual has
two variables per sample), hence the ``mod n`` indexing.
"""

from __future__ import annotations

import numpy as np
from numba import njit

TAU = 1e-12
FULL_GRAM_LIMIT = 4000


def iteration_cap(n_vars: int) -> int:
    """Same budget as libsvm: effectively unbounded for desk-scale problems."""
    return max(10_000_000, 100 * n_vars)


def rbf_gamma(sigma: float) -> float:
    return 1.0 / (2.0 * sigma * sigma)


@njit(cache=True, nogil=True)
def _sq_dist(A, i, B, j):
    s = 0.0
    for f in range(A.shape[1]):
        t = A[i, f] - B[j, f]
        s += t * t
    return s


@njit(cache=True, nogil=True)
def _rbf_matrix(A, B, gamma):
    K = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            K[i, j] = np.exp(-gamma * _sq_dist(A, i, B, j))
    return K


@njit(cache=True, nogil=True)
def _expansion(Q, S, coef, gamma):
    out = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        acc = 0.0
        for j in range(S.shape[0]):
            acc += coef[j] * np.exp(-gamma * _sq_dist(Q, i, S, j))
        out[i] = acc
    return out


def rbf_kernel(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """k(u, v) = exp(-|u - v|^2 / (2 sigma^2)) for all row pairs."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    return _rbf_matrix(A, B, rbf_gamma(sigma))


def kernel_expansion(Q: np.ndarray, S: np.ndarray, coef: np.ndarray, sigma: float) -> np.ndarray:
    """sum_j coef_j k(S_j, q) for every row q of Q.

    Each row is computed on its own in a fixed order, so a point scores the
    same whether it is queried alone or inside a batch.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    return _expansion(Q, np.ascontiguousarray(S), np.ascontiguousarray(coef, dtype=np.float64), rbf_gamma(sigma))


@njit(cache=True, nogil=True)
def _kernel_row(K, X, gamma, full, i, out):
    if full:
        return K[i]
    n, d = X.shape
    for j in range(n):
        s = 0.0
        for f in range(d):
            t = X[i, f] - X[j, f]
            s += t * t
        out[j] = np.exp(-gamma * s)
    return out


@njit(cache=True, nogil=True)
def smo_solve(K, X, gamma, full, y, p, C, alpha0, eps, max_iter):
    """Return (alpha, rho, gradient, iterations, converged)."""
    n = X.shape[0]
    l = p.shape[0]
    alpha = alpha0.copy()
    G = p.copy()
    bufi = np.empty(n)
    bufj = np.empty(n)
    base = np.empty(l, np.int64)
    for t in range(l):
        base[t] = t % n
    for i in range(l):
        if alpha[i] != 0.0:
            Ki = _kernel_row(K, X, gamma, full, base[i], bufi)
            a = alpha[i] * y[i]
            for t in range(l):
                G[t] += a * y[t] * Ki[base[t]]
    QD = np.ones(l)

    it = 0
    converged = False
    while it < max_iter:
        # first index: maximal violating -y G over I_up
        Gmax = -np.inf
        i = -1
        for t in range(l):
            if y[t] == 1:
                if alpha[t] < C[t] and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0.0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        if i == -1:
            converged = True
            break
        Ki = _kernel_row(K, X, gamma, full, base[i], bufi)
        Gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(l):
            if y[t] == 1:
                if alpha[t] > 0.0:
                    diff = Gmax + G[t]
                    if G[t] >= Gmax2:
                        Gmax2 = G[t]
                    if diff > 0.0:
                        quad = QD[i] + QD[t] - 2.0 * Ki[base[t]]
                        if quad <= 0.0:
                            quad = TAU
                        obj = -(diff * diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
            else:
                if alpha[t] < C[t]:
                    diff = Gmax - G[t]
                    if -G[t] >= Gmax2:
                        Gmax2 = -G[t]
                    if diff > 0.0:
                        quad = QD[i] + QD[t] - 2.0 * Ki[base[t]]
                        if quad <= 0.0:
                            quad = TAU
                        obj = -(diff * diff) / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
        if Gmax + Gmax2 < eps or j == -1:
            converged = True
            break
        it += 1
        Kj = _kernel_row(K, X, gamma, full, base[j], bufj)
        Qij = y[i] * y[j] * Ki[base[j]]
        Ci = C[i]
        Cj = C[j]
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = Ci - diff
            else:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > Ci:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = total - Ci
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > Cj:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = total - Cj
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = total
        di = (alpha[i] - old_i) * y[i]
        dj = (alpha[j] - old_j) * y[j]
        for t in range(l):
            G[t] += y[t] * (di * Ki[base[t]] + dj * Kj[base[t]])

    # offset from free variables, midpoint of the feasible interval otherwise
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(l):
        yG = y[t] * G[t]
        if alpha[t] >= C[t]:
            if y[t] == -1:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0.0:
            if y[t] == 1:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nfree += 1
            sfree += yG
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    return alpha, rho, G, it, converged


def gram_or_empty(X: np.ndarray, sigma: float) -> tuple[np.ndarray, bool]:
    """Full Gram matrix up to :data:`FULL_GRAM_LIMIT` rows, else a placeholder."""
    if X.shape[0] <= FULL_GRAM_LIMIT:
        return rbf_kernel(X, X, sigma), True
    return np.empty((0, 0)), False
