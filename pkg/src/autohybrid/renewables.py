"""Physical forecasting templates for wind and photovoltaic plants.

Wind: measured wind speed is lifted to hub height with the wind-profile power
law and mapped through the turbine's power curve; the friction exponent is
calibrated on history by grid search. PV: plant profiles are normalized by
peak power, averaged into one fleet profile, and mapped back per plant with a
scalar calibration factor.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DegeneratePrediction, LengthMismatch, MisalignedSeries, UnknownPlant
from .evaluation import mae

DEFAULT_ALPHA_GRID = "0.05:0.60:0.01"
ANOMALY_THRESHOLD = 0.5
ANOMALY_MIN_RUN = 3


@dataclass(frozen=True)
class PowerCurve:
    """Manufacturer power curve.

    Table rows at or above the cut-out speed are kept for reference but never
    used: the turbine produces nothing there.
    """

    speeds: np.ndarray
    powers: np.ndarray
    cut_in: float
    cut_out: float
    rated: float

    def __post_init__(self):
        v = np.asarray(self.speeds, dtype=np.float64)
        p = np.asarray(self.powers, dtype=np.float64)
        if v.ndim != 1 or v.shape != p.shape or v.size < 2:
            raise ValueError("power curve needs at least two (speed, power) rows")
        if np.any(np.diff(v) <= 0):
            raise ValueError("power curve speeds must be strictly increasing")
        if not self.rated > 0:
            raise ValueError("rated power must be positive")
        if np.any(p < 0) or np.any(p > self.rated):
            raise ValueError("power curve values must lie in [0, rated]")
        if not 0 <= self.cut_in < self.cut_out:
            raise ValueError("need 0 <= cut_in < cut_out")
        if np.any(p[v < self.cut_in] != 0):
            raise ValueError("power below cut-in speed must be 0")
        object.__setattr__(self, "speeds", v)
        object.__setattr__(self, "powers", p)
        object.__setattr__(self, "cut_in", float(self.cut_in))
        object.__setattr__(self, "cut_out", float(self.cut_out))
        object.__setattr__(self, "rated", float(self.rated))

    @classmethod
    def from_table(cls, speeds, powers, cut_in=None, cut_out=None, rated=None) -> "PowerCurve":
        """Infer missing limits: cut-in is the last speed of the leading
        zero-power run, cut-out the last tabulated speed, rated the peak."""
        v = np.asarray(speeds, dtype=np.float64)
        p = np.asarray(powers, dtype=np.float64)
        if cut_in is None:
            positive = np.flatnonzero(p > 0)
            if positive.size == 0:
                raise ValueError("power curve never produces power")
            cut_in = v[positive[0] - 1] if positive[0] > 0 else v[0]
        return cls(
            v,
            p,
            cut_in,
            v[-1] if cut_out is None else cut_out,
            float(p.max()) if rated is None else rated,
        )


@dataclass(frozen=True)
class WindSiteConfig:
    ref_height: float
    hub_height: float
    alpha: float

    def __post_init__(self):
        if not (self.ref_height > 0 and self.hub_height > 0):
            raise ValueError("heights must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class PVFleetTemplate:
    """Fleet-average normalized profile plus per-plant peak and calibration.

    The profile is held in extended precision so that normalizing by a peak
    and multiplying back returns the original float64 values bit for bit.
    """

    peaks: Mapping[str, float]
    profile: np.ndarray
    calibration: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if any(not p > 0 for p in self.peaks.values()):
            raise ValueError("peak powers must be positive")
        cal = {pid: 1.0 for pid in self.peaks}
        cal.update(self.calibration)
        if any(not c > 0 for c in cal.values()):
            raise ValueError("calibration factors must be positive")
        object.__setattr__(self, "peaks", dict(self.peaks))
        object.__setattr__(self, "calibration", cal)
        object.__setattr__(self, "profile", np.asarray(self.profile, dtype=np.longdouble))

    def plant(self, plant_id: str) -> tuple[float, float]:
        """(peak kW, calibration factor) of a registered plant."""
        if plant_id not in self.peaks:
            raise UnknownPlant(plant_id)
        return self.peaks[plant_id], self.calibration[plant_id]

    def with_calibration(self, plant_id: str, c: float) -> "PVFleetTemplate":
        self.plant(plant_id)
        return replace(self, calibration={**self.calibration, plant_id: float(c)})


# wind ------------------------------------------------------------------------

def height_correct(v_ref, cfg: WindSiteConfig):
    """Wind speed at hub height from speed at the reference height."""
    v = np.asarray(v_ref, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("wind speeds must be non-negative")
    if cfg.hub_height == cfg.ref_height or cfg.alpha == 0:
        out = v.copy()
    else:
        out = v * (cfg.hub_height / cfg.ref_height) ** cfg.alpha
    return float(out) if out.ndim == 0 else out


def power_curve_eval(curve: PowerCurve, v_hub):
    v = np.asarray(v_hub, dtype=np.float64)
    p = np.interp(v, curve.speeds, curve.powers)
    p = np.where((v < curve.cut_in) | (v >= curve.cut_out), 0.0, np.clip(p, 0.0, curve.rated))
    return float(p) if p.ndim == 0 else p


def wp_forecast(curve: PowerCurve, cfg: WindSiteConfig, wind_series) -> np.ndarray:
    w = np.asarray(wind_series, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("wind series must be finite")
    return np.atleast_1d(power_curve_eval(curve, height_correct(w, cfg)))


def parse_grid(spec: str) -> np.ndarray:
    """``"lo:hi:step"`` to an inclusive, rounding-safe grid."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError as exc:
        raise ValueError(f"grid must look like lo:hi:step, got {spec!r}") from exc
    if not step > 0 or hi < lo:
        raise ValueError(f"invalid grid {spec!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def calibrate_alpha(
    curve: PowerCurve,
    ref_height: float,
    hub_height: float,
    wind_series,
    observed_power,
    alpha_grid=DEFAULT_ALPHA_GRID,
) -> float:
    """Friction exponent minimizing forecast MAE; the smallest one on ties."""
    w = np.asarray(wind_series, dtype=np.float64)
    obs = np.asarray(observed_power, dtype=np.float64)
    if w.shape != obs.shape:
        raise LengthMismatch(f"{w.size} wind values vs {obs.size} power values")
    grid = parse_grid(alpha_grid) if isinstance(alpha_grid, str) else np.asarray(alpha_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("alpha grid is empty")
    grid = np.sort(grid)
    errors = [mae(wp_forecast(curve, WindSiteConfig(ref_height, hub_height, a), w), obs) for a in grid]
    return float(grid[int(np.argmin(errors))])


def reference_power_curve(rated: float = 2000.0, cut_in: float = 3.0, rated_speed: float = 12.0,
                          cut_out: float = 25.0, step: float = 0.5) -> PowerCurve:
    """Generic pitch-regulated turbine: cubic rise from cut-in to rated speed,
    flat at rated power up to cut-out."""
    v = np.round(np.arange(0.0, cut_out + step / 2, step), 10)
    rise = (v**3 - cut_in**3) / (rated_speed**3 - cut_in**3)
    p = rated * np.clip(rise, 0.0, 1.0)
    p[v < cut_in] = 0.0
    return PowerCurve(v, p, cut_in, cut_out, rated)


def twin_anomaly_flags(series_a, series_b, rated: float, threshold: float = ANOMALY_THRESHOLD,
                       min_run: int = ANOMALY_MIN_RUN) -> np.ndarray:
    """Flag steps where two neighbouring turbines disagree by more than
    ``threshold`` of rated power for at least ``min_run`` consecutive steps."""
    a = np.asarray(series_a, dtype=np.float64)
    b = np.asarray(series_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} vs {b.size} steps")
    if not rated > 0:
        raise ValueError("rated power must be positive")
    deviating = np.abs(a - b) / rated > threshold
    flags = np.zeros(a.shape, dtype=bool)
    run_start = None
    for t, dev in enumerate(np.append(deviating, False)):
        if dev and run_start is None:
            run_start = t
        elif not dev and run_start is not None:
            if t - run_start >= min_run:
                flags[run_start:t] = True
            run_start = None
    return flags


def wp_nmae(pred, truth, curve: PowerCurve) -> float:
    return mae(pred, truth) / curve.rated


# photovoltaics -----------------------------------------------------------------

def pv_build_template(profiles: Mapping[str, Sequence[float]], peaks: Mapping[str, float]) -> PVFleetTemplate:
    if not profiles:
        raise ValueError("no plant profiles")
    if set(profiles) != set(peaks):
        raise MisalignedSeries("profiles and peaks name different plants")
    arrays = {pid: np.asarray(s, dtype=np.float64) for pid, s in profiles.items()}
    lengths = {a.shape for a in arrays.values()}
    if len(lengths) != 1:
        raise MisalignedSeries(f"profiles have different lengths: {sorted(s[0] for s in lengths)}")
    if any(not peaks[pid] > 0 for pid in arrays):
        raise ValueError("peak powers must be positive")
    normalized = np.vstack([arrays[pid].astype(np.longdouble) / peaks[pid] for pid in arrays])
    # shifted mean: identical rows average to themselves without rounding
    first = normalized[0]
    profile = first + (normalized - first).mean(axis=0)
    return PVFleetTemplate({pid: float(peaks[pid]) for pid in arrays}, profile)


def pv_calibrate(template: PVFleetTemplate, plant_id: str, observed, predicted_normalized) -> float:
    """Scalar c minimizing MAE(c * peak * predicted, observed).

    The objective is convex and piecewise linear in c with kinks at
    observed / (peak * predicted); its minimum sits at the weighted median of
    those kinks (weights |peak * predicted|).
    """
    peak, _ = template.plant(plant_id)
    obs = np.asarray(observed, dtype=np.float64)
    pred = np.asarray(predicted_normalized).astype(np.float64)
    if obs.shape != pred.shape:
        raise LengthMismatch(f"{obs.size} observed vs {pred.size} predicted values")
    scaled = peak * pred
    used = scaled != 0
    if not used.any():
        raise DegeneratePrediction("all predicted values are zero")
    kinks = obs[used] / scaled[used]
    weights = np.abs(scaled[used])
    order = np.argsort(kinks, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    c = float(kinks[order][k])
    if not c > 0:
        raise DegeneratePrediction(f"calibration factor {c} is not positive")
    return c


def pv_forecast(template: PVFleetTemplate, plant_id: str, predicted_normalized) -> np.ndarray:
    peak, c = template.plant(plant_id)
    pred = np.asarray(predicted_normalized)
    if pred.dtype != np.longdouble:
        pred = pred.astype(np.float64)
    return np.maximum(c * (peak * pred), 0.0).astype(np.float64)


def pv_nmae(pred, truth, peak: float) -> float:
    return mae(pred, truth) / peak


# file formats --------------------------------------------------------------------

def read_power_curve(path, cut_in=None, cut_out=None, rated=None) -> PowerCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"wind_speed_ms", "power_kw"}:
        raise ValueError(f"{path}: expected header wind_speed_ms,power_kw")
    return PowerCurve.from_table(
        [float(r["wind_speed_ms"]) for r in rows],
        [float(r["power_kw"]) for r in rows],
        cut_in,
        cut_out,
        rated,
    )


def write_power_curve(curve: PowerCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wind_speed_ms", "power_kw"])
        for v, p in zip(curve.speeds, curve.powers):
            w.writerow([repr(float(v)), repr(float(p))])


def _parse_time(text: str) -> datetime:
    t = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_series(path) -> tuple[list[datetime], np.ndarray]:
    """``timestamp,value`` CSV with ISO-8601 timestamps (read as UTC)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "value"]:
            raise ValueError(f"{path}: expected header timestamp,value")
        times, values = [], []
        for row in reader:
            if not row:
                continue
            times.append(_parse_time(row[0]))
            values.append(float(row[1]))
    return times, np.asarray(values, dtype=np.float64)


def write_series(path, times: Sequence[datetime], values) -> None:
    values = np.asarray(values, dtype=np.float64)
    if len(times) != values.size:
        raise LengthMismatch(f"{len(times)} timestamps vs {values.size} values")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "value"])
        for t, v in zip(times, values):
            w.writerow([format_time(t), repr(float(v))])


def read_registry(path) -> tuple[dict, dict]:
    """Plant registry JSON (a list of {plant_id, peak_kw, calibration_factor})
    to (peaks, calibration factors)."""
    entries = json.loads(Path(path).read_text())
    if isinstance(entries, Mapping):
        entries = entries.get("plants", [])
    return read_registry_entries(entries)


def registry_entries(template: PVFleetTemplate) -> list[dict]:
    return [
        {"plant_id": pid, "peak_kw": template.peaks[pid], "calibration_factor": template.calibration[pid]}
        for pid in template.peaks
    ]


def save_template(template: PVFleetTemplate, path, times: Sequence[datetime] | None = None) -> None:
    """Template JSON: the plant registry plus the fleet-average profile."""
    doc = {"plants": registry_entries(template), "profile": "@PROFILE@"}
    if times is not None:
        doc["timestamps"] = [format_time(t) for t in times]
    # profile digits go in as raw JSON numbers with every extended-precision digit
    digits = ", ".join(np.format_float_scientific(x, unique=True, trim="0") for x in template.profile)
    Path(path).write_text(json.dumps(doc, indent=2).replace('"@PROFILE@"', f"[{digits}]"))


def load_template(path) -> tuple[PVFleetTemplate, list[datetime] | None]:
    doc = json.loads(Path(path).read_text(), parse_float=np.longdouble)
    peaks, cal = read_registry_entries(doc["plants"])
    times = [_parse_time(t) for t in doc["timestamps"]] if "timestamps" in doc else None
    return PVFleetTemplate(peaks, np.asarray(doc["profile"], dtype=np.float64), cal), times


def read_registry_entries(entries) -> tuple[dict, dict]:
    peaks = {str(e["plant_id"]): float(e["peak_kw"]) for e in entries}
    cal = {str(e["plant_id"]): float(e.get("calibration_factor", 1.0)) for e in entries}
    return peaks, cal
