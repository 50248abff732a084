"""The five regression learners behind one fit/predict contract.

Every learner standardizes features with training statistics; targets are used
as given.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import FitFailure
from .base import ALGORITHMS, Dataset, LearnerSpec, Standardizer, TrainedModel
from .linear import fit_linear, original_units, predict_linear
from .mlp import fit_mlp, predict_mlp
from .svr import fit_svr, predict_svr
from .trees import fit_forest, fit_gbm, predict_trees

__all__ = [
    "ALGORITHMS",
    "Dataset",
    "LearnerSpec",
    "Standardizer",
    "TrainedModel",
    "fit",
    "fit_arrays",
    "predict",
    "original_units",
    "model_to_json",
    "model_from_json",
]

_FITTERS = {
    "LR": fit_linear,
    "MLP": fit_mlp,
    "SVR": fit_svr,
    "RF": fit_forest,
    "GBM": fit_gbm,
}

_PREDICTORS = {
    "LR": predict_linear,
    "MLP": predict_mlp,
    "SVR": predict_svr,
    "RF": predict_trees,
    "GBM": predict_trees,
}

SCHEMA = "autohybrid.model/1"


def fit_arrays(spec: LearnerSpec, X: np.ndarray, y: np.ndarray) -> TrainedModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    std = Standardizer.fit(X)
    Xs = std.transform(X)
    try:
        params = _FITTERS[spec.algorithm](Xs, y, spec.hyperparameters, spec.seed)
    except FitFailure:
        raise
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise FitFailure(f"{spec.label}: {exc}") from exc
    return TrainedModel(spec.algorithm, spec, std, params)


def fit(spec: LearnerSpec, train: Dataset) -> TrainedModel:
    return fit_arrays(spec, train.features, train.target)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


def model_to_json(model: TrainedModel) -> str:
    def enc(v):
        if isinstance(v, np.ndarray):
            return {"__array__": v.tolist(), "dtype": str(v.dtype)}
        return v

    return json.dumps(
        {
            "schema": SCHEMA,
            "algorithm": model.algorithm,
            "spec": {
                "algorithm": model.spec.algorithm,
                "hyperparameters": dict(model.spec.hyperparameters),
                "seed": model.spec.seed,
            },
            "mean": model.standardizer.mean.tolist(),
            "scale": model.standardizer.scale.tolist(),
            "params": {k: enc(v) for k, v in model.params.items()},
        }
    )


def model_from_json(blob: str) -> TrainedModel:
    data = json.loads(blob)
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported model schema {data.get('schema')!r}")

    def dec(v):
        if isinstance(v, dict) and "__array__" in v:
            return np.asarray(v["__array__"], dtype=v["dtype"])
        return v

    spec = LearnerSpec(**data["spec"])
    std = Standardizer(np.asarray(data["mean"]), np.asarray(data["scale"]))
    params = {k: dec(v) for k, v in data["params"].items()}
    return TrainedModel(data["algorithm"], spec, std, params)
