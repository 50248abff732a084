"""Membership-weighted blend of an interpolation and an extrapolation model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DimensionMismatch, SchemaMismatch
from .learners import TrainedModel
from .learners.base import as_matrix
from .one_class_svm import OneClassSVMModel


def blend(mu, interp, extrap):
    """Row-wise ``mu * interp + (1 - mu) * extrap``, clipped to the pair's range.

    The clip only removes rounding excursions, so the result is always a true
    convex combination (and exactly ``interp`` when both inputs agree).
    Broadcasts, which lets the grid search blend whole prediction tables.
    """
    mu = np.asarray(mu, dtype=np.float64)
    interp = np.asarray(interp, dtype=np.float64)
    extrap = np.asarray(extrap, dtype=np.float64)
    out = mu * interp + (1.0 - mu) * extrap
    return np.clip(out, np.minimum(interp, extrap), np.maximum(interp, extrap))


@dataclass(frozen=True)
class HybridModel:
    interpolation: TrainedModel
    extrapolation: TrainedModel
    decider: OneClassSVMModel
    chosen_config: Mapping[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.interpolation.d

    def components(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(membership, interpolation output, extrapolation output) per row."""
        X = as_matrix(X)
        if X.shape[0] == 0:
            return np.zeros(0), np.zeros(0), np.zeros(0)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"hybrid expects {self.d} features, got {X.shape[1]}")
        return (
            self.decider.membership(X),
            self.interpolation.predict(X),
            self.extrapolation.predict(X),
        )

    def predict(self, X) -> np.ndarray:
        mu, y_int, y_ext = self.components(X)
        return blend(mu, y_int, y_ext)


def assemble(
    interp: TrainedModel,
    extrap: TrainedModel,
    decider: OneClassSVMModel,
    cfg: Mapping[str, Any] | None = None,
) -> HybridModel:
    if not (interp.d == extrap.d == decider.d):
        raise SchemaMismatch(
            f"feature counts differ: interpolation {interp.d}, "
            f"extrapolation {extrap.d}, decider {decider.d}"
        )
    return HybridModel(interp, extrap, decider, dict(cfg or {}))


def predict_hybrid(h: HybridModel, X) -> np.ndarray:
    return h.predict(X)
