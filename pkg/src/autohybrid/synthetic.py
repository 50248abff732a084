"""Small synthetic regression tasks for tests and offline benchmarks."""

from __future__ import annotations

import numpy as np

from .learners import Dataset


def _minmax(y: np.ndarray) -> np.ndarray:
    span = y.max() - y.min()
    return (y - y.min()) / span if span > 0 else np.zeros_like(y)


def friedman(n: int = 500, d: int = 5, noise: float = 1.0, seed: int = 0, name: str | None = None) -> Dataset:
    """Friedman #1 surface on the first five of ``d`` uniform features; the
    target is min-max normalized to [0, 1]."""
    if d < 5:
        raise ValueError("friedman needs at least 5 features")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = (
        10 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20 * (X[:, 2] - 0.5) ** 2
        + 10 * X[:, 3]
        + 5 * X[:, 4]
        + noise * rng.standard_normal(n)
    )
    return Dataset(X, _minmax(y), tuple(f"x{i}" for i in range(d)), name or f"friedman_s{seed}")


def linear_noise(n: int = 200, d: int = 3, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Linear target plus Gaussian noise, where ordinary least squares is hard to beat."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, d))
    w = rng.uniform(0.5, 1.5, size=d)
    y = X @ w + noise * rng.standard_normal(n)
    return Dataset(X, y, tuple(f"x{i}" for i in range(d)), f"linear_s{seed}")


def wiggle_function(x: np.ndarray, amplitude: float = 0.3, freq: float = 3.0) -> np.ndarray:
    """Linear trend with a sinusoidal wiggle on [0, 1] and a pure line outside."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= 0) & (x <= 1)
    return 2.0 * x + np.where(inside, amplitude * np.sin(2 * np.pi * freq * x), 0.0)


def interp_extrap_task(
    n_train: int = 200,
    n_test: int = 200,
    noise: float = 0.02,
    seed: int = 0,
) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Training data on x in [0, 1]; extrapolation queries on x in [1.2, 2].

    Returns (train dataset, test X, noise-free test targets).
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n_train)
    y = wiggle_function(x) + noise * rng.standard_normal(n_train)
    x_test = np.sort(rng.uniform(1.2, 2.0, n_test))
    return (
        Dataset(x[:, None], y, ("x",), f"wiggle_s{seed}"),
        x_test[:, None],
        wiggle_function(x_test),
    )


def to_csv(data: Dataset, path, target_name: str = "y") -> None:
    header = ",".join(list(data.feature_names) + [target_name])
    np.savetxt(path, np.column_stack([data.features, data.target]), delimiter=",", header=header, comments="", fmt="%.17g")
