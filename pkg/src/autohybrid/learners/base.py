from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..errors import DimensionMismatch

ALGORITHMS = ("LR", "MLP", "SVR", "RF", "GBM")

# hyperparameters each algorithm needs, with the defaults used when absent
REQUIRED = {
    "LR": {},
    "MLP": {"n_neurons": None},
    "SVR": {"sigma": None, "C": 100.0, "epsilon": 0.001},
    "RF": {"n_estimators": None},
    "GBM": {"n_estimators": None},
}

MIN_ROWS = 10


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: tuple = ()
    id: str = "dataset"

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.target, dtype=np.float64).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if X.shape[0] < MIN_ROWS:
            raise ValueError(f"need at least {MIN_ROWS} rows, got {X.shape[0]}")
        if X.shape[1] < 1:
            raise ValueError("need at least one feature")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("features and target must be finite")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length does not match feature count")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.target[idx], self.feature_names, self.id)


@dataclass(frozen=True)
class LearnerSpec:
    algorithm: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        hp = dict(self.hyperparameters)
        for key, default in REQUIRED[self.algorithm].items():
            if key not in hp:
                if default is None:
                    raise ValueError(f"{self.algorithm} needs hyperparameter {key!r}")
                hp[key] = default
        extra = set(hp) - set(REQUIRED[self.algorithm])
        if extra:
            raise ValueError(f"{self.algorithm} does not take {sorted(extra)}")
        for key in ("n_neurons", "n_estimators"):
            if key in hp:
                if int(hp[key]) != hp[key] or hp[key] < 1:
                    raise ValueError(f"{key} must be a positive integer, got {hp[key]}")
                hp[key] = int(hp[key])
        if "sigma" in hp and not hp["sigma"] > 0:
            raise ValueError("sigma must be > 0")
        if "C" in hp and not hp["C"] > 0:
            raise ValueError("C must be > 0")
        if "epsilon" in hp and not hp["epsilon"] >= 0:
            raise ValueError("epsilon must be >= 0")
        object.__setattr__(self, "hyperparameters", hp)

    @property
    def label(self) -> str:
        if not self.hyperparameters:
            return self.algorithm
        args = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.hyperparameters.items()))
        return f"{self.algorithm}({args})"


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature mean / standard deviation captured from training data."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[~(scale > 1e-12)] = 1.0
        return cls(mean, scale)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} columns, got {X.shape[1]}")
        return np.ascontiguousarray((X - self.mean) / self.scale)


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :] if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-D matrix")
    return X


@dataclass(frozen=True)
class TrainedModel:
    """A fitted regressor: algorithm tag, opaque parameters, standardization."""

    algorithm: str
    spec: LearnerSpec
    standardizer: Standardizer
    params: Mapping[str, Any]

    @property
    def d(self) -> int:
        return self.standardizer.d

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"model expects {self.d} features, got {X.shape[1]}")
        from . import _PREDICTORS

        return _PREDICTORS[self.algorithm](self.params, self.standardizer.transform(X))
