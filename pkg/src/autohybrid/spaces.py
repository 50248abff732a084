"""Default search spaces for hybrid-model design and conversions from
configurations to learner and decider settings.

Predictor configurations use names ``<algorithm>_<hyperparameter>`` under a
root ``algorithm`` choice, e.g. ``{"algorithm": "SVR", "svr_sigma": 0.5, ...}``.
Hybrid configurations prefix them with ``interp_`` / ``extrap_`` under the
roots ``interpolator`` / ``extrapolator``, plus ``decider`` and
``ocsvm_sigma`` / ``ocsvm_nu``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .config_space import (
    Categorical,
    Condition,
    ConfigurationSpace,
    ContinuousRange,
    GridValues,
    ParameterSpec,
    enumerate_grid,
    space_from_json,
    space_to_json,
)
from .learners import LearnerSpec

PREDICTOR_ORDER = ("MLP", "SVR", "GBM", "RF", "LR")
INTEGER_HYPERPARAMETERS = {"n_neurons", "n_estimators"}
LOG_SCALE_RATIO = 100.0

MLP_NEURONS = tuple(range(2, 18)) + (30, 50)
SVR_SIGMAS = tuple(round(0.1 * k, 1) for k in range(1, 11)) + (1.2, 1.5, 2.0)
N_ESTIMATORS = (90, 100, 110, 120, 130, 140, 150) + tuple(range(200, 1001, 100))
OCSVM_SIGMAS = (0.01, 0.025, 0.05) + tuple(round(0.1 * k, 1) for k in range(1, 11)) + (1.5, 10.0)
SVR_C = 100.0
SVR_EPSILON = 0.001
OCSVM_NU = 0.001


def _cond(parent: str, value: str) -> Condition:
    return Condition(parent, value)


def default_predictor_space() -> ConfigurationSpace:
    """Five learners with the candidate values of the reference grid (no MARS)."""
    return ConfigurationSpace(
        (
            ParameterSpec("algorithm", Categorical(PREDICTOR_ORDER)),
            ParameterSpec("mlp_n_neurons", GridValues(MLP_NEURONS), _cond("algorithm", "MLP")),
            ParameterSpec("svr_sigma", GridValues(SVR_SIGMAS), _cond("algorithm", "SVR")),
            ParameterSpec("svr_C", GridValues((SVR_C,)), _cond("algorithm", "SVR")),
            ParameterSpec("svr_epsilon", GridValues((SVR_EPSILON,)), _cond("algorithm", "SVR")),
            ParameterSpec("gbm_n_estimators", GridValues(N_ESTIMATORS), _cond("algorithm", "GBM")),
            ParameterSpec("rf_n_estimators", GridValues(N_ESTIMATORS), _cond("algorithm", "RF")),
        )
    )


def default_decider_space() -> ConfigurationSpace:
    return ConfigurationSpace(
        (
            ParameterSpec("decider", Categorical(("OCSVM",))),
            ParameterSpec("ocsvm_sigma", GridValues(OCSVM_SIGMAS), _cond("decider", "OCSVM")),
            ParameterSpec("ocsvm_nu", GridValues((OCSVM_NU,)), _cond("decider", "OCSVM")),
        )
    )


@dataclass(frozen=True)
class GridDefinition:
    predictor_space: ConfigurationSpace
    decider_space: ConfigurationSpace

    @classmethod
    def default(cls) -> "GridDefinition":
        return cls(default_predictor_space(), default_decider_space())

    def predictor_configs(self) -> list[dict]:
        return enumerate_grid(self.predictor_space)

    def decider_configs(self) -> list[dict]:
        return enumerate_grid(self.decider_space)

    def to_json(self) -> dict:
        return {
            "predictor_space": space_to_json(self.predictor_space),
            "decider_space": space_to_json(self.decider_space),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "GridDefinition":
        return cls(space_from_json(data["predictor_space"]), space_from_json(data["decider_space"]))

    @classmethod
    def load(cls, ref: str | Path | Mapping | None) -> "GridDefinition":
        """Resolve ``"default"``/``None``, an inline mapping, or a JSON file path."""
        if ref is None or ref == "default":
            return cls.default()
        if isinstance(ref, Mapping):
            return cls.from_json(ref)
        return cls.from_json(json.loads(Path(ref).read_text()))


def _hp_value(name: str, value: Any) -> Any:
    if name in INTEGER_HYPERPARAMETERS:
        return int(round(float(value)))
    return float(value)


def predictor_spec(cfg: Mapping[str, Any], seed: int = 0, prefix: str = "") -> LearnerSpec:
    """LearnerSpec from a predictor configuration (optionally prefixed)."""
    root = {"": "algorithm", "interp_": "interpolator", "extrap_": "extrapolator"}[prefix]
    algorithm = cfg[root]
    head = f"{prefix}{algorithm.lower()}_"
    hp = {
        key[len(head):]: _hp_value(key[len(head):], value)
        for key, value in cfg.items()
        if key.startswith(head)
    }
    return LearnerSpec(algorithm, hp, seed)


def decider_params(cfg: Mapping[str, Any]) -> tuple[float, float]:
    """(sigma, nu) of a decider configuration."""
    if cfg.get("decider", "OCSVM") != "OCSVM":
        raise ValueError(f"unsupported decider {cfg['decider']!r}")
    return float(cfg["ocsvm_sigma"]), float(cfg.get("ocsvm_nu", OCSVM_NU))


def hybrid_parts(cfg: Mapping[str, Any], seed: int = 0) -> tuple[LearnerSpec, LearnerSpec, tuple[float, float]]:
    return (
        predictor_spec(cfg, seed, "interp_"),
        predictor_spec(cfg, seed, "extrap_"),
        decider_params(cfg),
    )


def hybrid_config(interp_cfg: Mapping, extrap_cfg: Mapping, decider_cfg: Mapping) -> dict:
    """Merge predictor/decider grid configurations into one hybrid configuration."""
    out: dict[str, Any] = {}
    for prefix, root, cfg in (("interp_", "interpolator", interp_cfg), ("extrap_", "extrapolator", extrap_cfg)):
        for key, value in cfg.items():
            out[root if key == "algorithm" else prefix + key] = value
    out.update(decider_cfg)
    return out


def _continuous_from_grid(p: ParameterSpec) -> ParameterSpec | None:
    values = [float(v) for v in p.domain.values]
    lo, hi = min(values), max(values)
    if lo == hi:
        return None
    log = lo > 0 and hi / lo > LOG_SCALE_RATIO
    return ContinuousRange(lo, hi, log_scale=log)


def hybrid_tpe_space(grid: GridDefinition | None = None) -> ConfigurationSpace:
    """Three categorical roots with continuous children spanning each grid's
    minimum to maximum; single-valued grids stay fixed."""
    grid = grid or GridDefinition.default()
    pspace = grid.predictor_space
    algorithms = pspace["algorithm"].domain.values
    params: list[ParameterSpec] = []
    for prefix, root in (("interp_", "interpolator"), ("extrap_", "extrapolator")):
        params.append(ParameterSpec(root, Categorical(algorithms)))
        for child in pspace.children("algorithm"):
            domain = child.domain
            if isinstance(domain, GridValues):
                domain = _continuous_from_grid(child) or domain
            params.append(
                ParameterSpec(prefix + child.name, domain, Condition(root, child.condition.equals))
            )
    dspace = grid.decider_space
    params.append(dspace["decider"])
    for child in dspace.children("decider"):
        domain = child.domain
        if isinstance(domain, GridValues):
            domain = _continuous_from_grid(child) or domain
        params.append(ParameterSpec(child.name, domain, child.condition))
    return ConfigurationSpace(tuple(params))
