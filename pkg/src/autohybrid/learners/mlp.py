"""Single-hidden-layer tanh network trained with full-batch Adam.

Parameters live in one flat vector: input weights (d x h, row-major), hidden
biases, output weights, output bias.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..errors import FitFailure

LEARNING_RATE = 1e-3
EPOCHS = 500
BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


def _unpack(theta: np.ndarray, d: int, h: int):
    W1 = theta[: d * h].reshape(d, h)
    b1 = theta[d * h : d * h + h]
    w2 = theta[d * h + h : d * h + 2 * h]
    return W1, b1, w2, theta[-1]


def _forward(theta, X, h):
    W1, b1, w2, b2 = _unpack(theta, X.shape[1], h)
    return np.tanh(X @ W1 + b1) @ w2 + b2


class _Buffers:
    """Work arrays plus the input with a ones column, in both layouts.

    Input weights and hidden biases are adjacent in the flat vector, so with
    the ones column they form one (d+1, h) block: a single matmul each way.
    """

    def __init__(self, X: np.ndarray, h: int):
        n = X.shape[0]
        self.Xa = np.hstack([X, np.ones((n, 1))])
        self.XaT = np.ascontiguousarray(self.Xa.T)
        self.XaT_res = np.empty_like(self.XaT)
        self.H = np.empty((n, h))
        self.dZ = np.empty((n, h))
        self.res = np.empty(n)


def _loss_grad_into(theta, X, y, h, grad, buf=None):
    n, d = X.shape
    buf = buf or _Buffers(X, h)
    W = theta[: (d + 1) * h].reshape(d + 1, h)
    w2 = theta[(d + 1) * h : (d + 2) * h]
    b2 = theta[-1]
    H, dZ, res = buf.H, buf.dZ, buf.res
    np.matmul(buf.Xa, W, out=H)
    np.tanh(H, out=H)
    np.matmul(H, w2, out=res)
    res += b2 - y
    loss = 0.5 * float(res @ res) / n
    res *= 1.0 / n
    # input-layer gradient Xa' (res * (1 - H^2) * w2), with the row and column
    # scalings moved onto the small factors
    np.multiply(H, H, out=dZ)
    np.subtract(1.0, dZ, out=dZ)
    np.multiply(buf.XaT, res, out=buf.XaT_res)
    gW = grad[: (d + 1) * h].reshape(d + 1, h)
    np.matmul(buf.XaT_res, dZ, out=gW)
    gW *= w2
    np.matmul(res, H, out=grad[(d + 1) * h : (d + 2) * h])
    grad[-1] = res.sum()
    return loss


def loss_and_grad(theta, X, y, h):
    """Half mean squared error and its gradient w.r.t. the flat parameters."""
    grad = np.empty_like(theta)
    loss = _loss_grad_into(np.asarray(theta, dtype=np.float64), np.asarray(X, dtype=np.float64), y, h, grad)
    return loss, grad


@njit(cache=True, nogil=True)
def _adam_step(theta, g, m, v, step_size, bias2, beta1, beta2, eps):
    for i in range(theta.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        theta[i] -= step_size * m[i] / (math.sqrt(v[i] / bias2) + eps)


def _adam(theta, X, y, h, epochs, lr, beta1, beta2, eps):
    theta = theta.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    g = np.empty_like(theta)
    buf = _Buffers(X, h)
    b1t = b2t = 1.0
    for _ in range(epochs):
        _loss_grad_into(theta, X, y, h, g, buf)
        b1t *= beta1
        b2t *= beta2
        _adam_step(theta, g, m, v, lr / (1.0 - b1t), 1.0 - b2t, beta1, beta2, eps)
    return theta


def init_params(d: int, h: int, rng: np.random.Generator, y_mean: float = 0.0) -> np.ndarray:
    """Hidden layer uniform in +-1/sqrt(fan-in); the output layer starts as the constant y_mean."""
    a1 = 1.0 / math.sqrt(d)
    return np.concatenate(
        [
            rng.uniform(-a1, a1, size=d * h),
            rng.uniform(-a1, a1, size=h),
            np.zeros(h),
            [y_mean],
        ]
    )


def fit_mlp(Xs: np.ndarray, y: np.ndarray, hp, seed: int) -> dict:
    h = int(hp["n_neurons"])
    d = Xs.shape[1]
    rng = np.random.default_rng(seed)
    theta = init_params(d, h, rng, float(np.mean(y)))
    with np.errstate(over="ignore", invalid="ignore"):
        theta = _adam(theta, np.ascontiguousarray(Xs), np.asarray(y, dtype=np.float64), h,
                      EPOCHS, LEARNING_RATE, BETA1, BETA2, ADAM_EPS)
    if not np.all(np.isfinite(theta)):
        raise FitFailure("MLP training diverged")
    return {"theta": theta, "n_hidden": h}


def predict_mlp(params, Xs: np.ndarray) -> np.ndarray:
    return _forward(params["theta"], np.ascontiguousarray(Xs), params["n_hidden"])
