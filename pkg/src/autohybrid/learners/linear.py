"""Ordinary least squares with intercept."""

from __future__ import annotations

import numpy as np

from ..errors import FitFailure


def fit_linear(Xs: np.ndarray, y: np.ndarray, hp, seed) -> dict:
    A = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    try:
        sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise FitFailure(f"least squares failed: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise FitFailure("least squares produced non-finite coefficients")
    return {"coef": sol[:-1], "intercept": float(sol[-1])}


def predict_linear(params, Xs: np.ndarray) -> np.ndarray:
    return Xs @ params["coef"] + params["intercept"]


def original_units(model) -> tuple[np.ndarray, float]:
    """Coefficients and intercept of a fitted LR model in raw feature units."""
    std = model.standardizer
    coef = model.params["coef"] / std.scale
    intercept = model.params["intercept"] - float(coef @ std.mean)
    return coef, intercept
