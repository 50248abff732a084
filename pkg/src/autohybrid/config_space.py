"""Hyperparameter configuration spaces with grid, continuous, categorical and
conditional parameters.

A space is an ordered, immutable tuple of :class:`ParameterSpec`. Conditions
are equality tests on a single categorical parent declared earlier in the
space, so the condition graph is always a forest. Configurations are plain
``dict`` objects mapping parameter names to values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import NonEnumerable, SpaceError, UnresolvedParent

Configuration = dict


@dataclass(frozen=True)
class GridValues:
    """Finite ordered list of numbers or labels."""

    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise SpaceError("grid values must be non-empty")
        if len(set(values)) != len(values):
            raise SpaceError(f"grid values contain duplicates: {values}")
        if all(_is_number(v) for v in values):
            if any(b <= a for a, b in zip(values, values[1:])):
                raise SpaceError(f"numeric grid must be strictly increasing: {values}")

    def __len__(self) -> int:
        return len(self.values)

    def contains(self, value: Any) -> bool:
        return any(_same_value(value, v) for v in self.values)


@dataclass(frozen=True)
class Categorical:
    """Finite unordered list of labels."""

    choices: tuple

    def __post_init__(self):
        choices = tuple(self.choices)
        object.__setattr__(self, "choices", choices)
        if not choices:
            raise SpaceError("categorical choices must be non-empty")
        if len(set(choices)) != len(choices):
            raise SpaceError(f"categorical choices contain duplicates: {choices}")

    @property
    def values(self) -> tuple:
        return self.choices

    def __len__(self) -> int:
        return len(self.choices)

    def contains(self, value: Any) -> bool:
        return any(_same_value(value, v) for v in self.choices)


@dataclass(frozen=True)
class ContinuousRange:
    low: float
    high: float
    log_scale: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise SpaceError("continuous bounds must be finite")
        if not self.low < self.high:
            raise SpaceError(f"need low < high, got [{self.low}, {self.high}]")
        if self.log_scale and self.low <= 0:
            raise SpaceError("log-scale range needs low > 0")

    def contains(self, value: Any) -> bool:
        return _is_number(value) and self.low <= float(value) <= self.high


Domain = Union[GridValues, Categorical, ContinuousRange]


@dataclass(frozen=True)
class Condition:
    parent: str
    equals: Any


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    domain: Domain
    condition: Condition | None = None

    @property
    def finite(self) -> bool:
        return not isinstance(self.domain, ContinuousRange)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`; truthy when the configuration is valid."""

    ok: bool
    rule: str | None = None
    parameter: str | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ConfigurationSpace:
    parameters: tuple = field(default_factory=tuple)

    def __post_init__(self):
        params = tuple(self.parameters)
        object.__setattr__(self, "parameters", params)
        seen: dict[str, ParameterSpec] = {}
        for p in params:
            if not isinstance(p, ParameterSpec):
                raise SpaceError(f"expected ParameterSpec, got {type(p).__name__}")
            if p.name in seen:
                raise SpaceError(f"duplicate parameter name {p.name!r}")
            if p.condition is not None:
                parent = seen.get(p.condition.parent)
                if parent is None:
                    # also catches cycles: a parent must be declared first
                    raise SpaceError(
                        f"{p.name!r}: condition parent {p.condition.parent!r} "
                        "must be declared before its children"
                    )
                if not isinstance(parent.domain, Categorical):
                    raise SpaceError(f"{p.name!r}: condition parent must be categorical")
                if not parent.domain.contains(p.condition.equals):
                    raise SpaceError(
                        f"{p.name!r}: {p.condition.equals!r} is not a choice of "
                        f"{parent.name!r}"
                    )
            seen[p.name] = p

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.parameters)

    def __len__(self) -> int:
        return len(self.parameters)

    def __getitem__(self, name: str) -> ParameterSpec:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    def children(self, name: str) -> list[ParameterSpec]:
        return [p for p in self.parameters if p.condition and p.condition.parent == name]

    def to_json(self) -> list[dict]:
        return space_to_json(self)

    @classmethod
    def from_json(cls, data) -> "ConfigurationSpace":
        return space_from_json(data)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _same_value(a: Any, b: Any) -> bool:
    if _is_number(a) and _is_number(b):
        return float(a) == float(b)
    return type(a) is type(b) and a == b


def _is_active(p: ParameterSpec, cfg: Mapping[str, Any]) -> bool:
    # parents precede children, so a parent's own activity is already settled
    if p.condition is None:
        return True
    return p.condition.parent in cfg and _same_value(cfg[p.condition.parent], p.condition.equals)


def validate(space: ConfigurationSpace, cfg: Mapping[str, Any]) -> ValidationReport:
    """Check ``cfg`` against ``space``; the report names the first broken rule."""
    known = set(space.names)
    for name in cfg:
        if name not in known:
            return ValidationReport(False, "unknown parameter", name, f"{name} unknown")
    for p in space:
        active = _is_active(p, cfg)
        if p.name in cfg and not active:
            return ValidationReport(False, "inactive parameter", p.name, f"{p.name} inactive")
        if active and p.name not in cfg:
            return ValidationReport(False, "missing parameter", p.name, f"{p.name} missing")
        if active and not p.domain.contains(cfg[p.name]):
            return ValidationReport(
                False,
                "value outside domain",
                p.name,
                f"{p.name}={cfg[p.name]!r}: value outside domain",
            )
    return ValidationReport(True)


def active_parameters(space: ConfigurationSpace, partial: Mapping[str, Any]) -> set[str]:
    """Names of the parameters whose condition chain holds under ``partial``.

    Children of unassigned parents are left out, but assigning a child whose
    parent is unassigned raises :class:`UnresolvedParent`.
    """
    for name in partial:
        try:
            p = space[name]
        except KeyError:
            raise SpaceError(f"unknown parameter {name!r}") from None
        if p.condition is not None and p.condition.parent not in partial:
            raise UnresolvedParent(f"{name!r} needs {p.condition.parent!r} assigned")
    active: set[str] = set()
    for p in space:
        if p.condition is None:
            active.add(p.name)
        elif p.condition.parent in active and _is_active(p, partial):
            active.add(p.name)
    return active


def enumerate_grid(space: ConfigurationSpace) -> list[Configuration]:
    """Cartesian product over active branches in declaration-then-domain order."""
    params = space.parameters
    out: list[Configuration] = []

    def walk(k: int, cfg: dict) -> None:
        if k == len(params):
            out.append(dict(cfg))
            return
        p = params[k]
        if not _is_active(p, cfg):
            walk(k + 1, cfg)
            return
        if not p.finite:
            raise NonEnumerable(f"parameter {p.name!r} has a continuous domain")
        for v in p.domain.values:
            cfg[p.name] = v
            walk(k + 1, cfg)
        del cfg[p.name]

    walk(0, {})
    return out


def grid_size(space: ConfigurationSpace) -> int:
    """Number of configurations :func:`enumerate_grid` would emit."""

    def count(k: int, cfg: dict) -> int:
        if k == len(space.parameters):
            return 1
        p = space.parameters[k]
        if not _is_active(p, cfg):
            return count(k + 1, cfg)
        if not p.finite:
            raise NonEnumerable(f"parameter {p.name!r} has a continuous domain")
        if not space.children(p.name):
            return len(p.domain) * count(k + 1, cfg)
        total = 0
        for v in p.domain.values:
            cfg[p.name] = v
            total += count(k + 1, cfg)
        del cfg[p.name]
        return total

    return count(0, {})


def sample_value(domain: Domain, rng: np.random.Generator) -> Any:
    if isinstance(domain, ContinuousRange):
        if domain.log_scale:
            v = math.exp(rng.uniform(math.log(domain.low), math.log(domain.high)))
        else:
            v = rng.uniform(domain.low, domain.high)
        return float(min(max(v, domain.low), domain.high))
    values = domain.values
    return _plain(values[int(rng.integers(len(values)))])


def sample_random(space: ConfigurationSpace, seed: int | np.random.Generator) -> Configuration:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cfg: Configuration = {}
    for p in space:
        if _is_active(p, cfg):
            cfg[p.name] = sample_value(p.domain, rng)
    return cfg


def _plain(v: Any) -> Any:
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


# JSON round trip --------------------------------------------------------------

def space_to_json(space: ConfigurationSpace) -> list[dict]:
    out = []
    for p in space:
        d = p.domain
        entry: dict[str, Any] = {"name": p.name}
        if isinstance(d, GridValues):
            entry.update(type="grid", values=list(d.values))
        elif isinstance(d, Categorical):
            entry.update(type="categorical", values=list(d.choices))
        else:
            entry.update(type="loguniform" if d.log_scale else "uniform", low=d.low, high=d.high)
        if p.condition is not None:
            entry["condition"] = {"parent": p.condition.parent, "equals": p.condition.equals}
        out.append(entry)
    return out


def space_from_json(data: str | Sequence[Mapping]) -> ConfigurationSpace:
    if isinstance(data, str):
        data = json.loads(data)
    params = []
    for entry in data:
        kind = entry.get("type")
        if kind == "grid":
            domain: Domain = GridValues(tuple(entry["values"]))
        elif kind == "categorical":
            domain = Categorical(tuple(entry["values"]))
        elif kind in ("uniform", "loguniform"):
            domain = ContinuousRange(
                float(entry["low"]), float(entry["high"]), log_scale=kind == "loguniform"
            )
        else:
            raise SpaceError(f"unknown parameter type {kind!r} for {entry.get('name')!r}")
        cond = entry.get("condition")
        condition = Condition(cond["parent"], cond["equals"]) if cond else None
        params.append(ParameterSpec(entry["name"], domain, condition))
    return ConfigurationSpace(tuple(params))


def make_space(params: Iterable[ParameterSpec]) -> ConfigurationSpace:
    return ConfigurationSpace(tuple(params))
