"""Ground-truth generation for scenario runs.

Traces are generated ahead of a run on a regular grid and held constant
between grid points, so every run over the same seed sees bit-identical
truth. Coupled quantities (pollution following traffic with a lag, fire
risk derived from weather) are computed from the driving series.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .overlay import NetworkCategory, POLLUTION, TRAFFIC
from .reasoning import OperationLevel


@dataclass(frozen=True)
class PiecewiseSchedule:
    """Step function given as (start_s, value) breakpoints.

    The value holds from its breakpoint until the next one; times before
    the first breakpoint take the first value.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("schedule needs at least one point")
        starts = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule breakpoints must strictly increase")

    def value(self, t: float) -> float:
        current = self.points[0][1]
        for start, value in self.points:
            if t < start:
                break
            current = value
        return current


@dataclass(frozen=True)
class CouplingSpec:
    """Linear lagged response: target = max(0, beta + alpha*source(t - tau) + noise)."""

    alpha: float
    tau_s: float
    beta: float
    noise_stddev: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tau_s < 0:
            raise ValueError("tau_s must be non-negative")
        if self.noise_stddev < 0:
            raise ValueError("noise_stddev must be non-negative")


@dataclass(frozen=True)
class CriticalityBands:
    """Two thresholds splitting a true value into Low / Moderate / High.

    direction 'rising' means larger values are more critical; 'falling'
    inverts that (low humidity is the dangerous regime).
    """

    thresholds: tuple[float, float]
    direction: str = "rising"

    def __post_init__(self) -> None:
        a, b = self.thresholds
        if self.direction == "rising":
            if not a < b:
                raise ValueError("rising thresholds must increase")
        elif self.direction == "falling":
            if not a > b:
                raise ValueError("falling thresholds must decrease")
        else:
            raise ValueError(f"direction must be 'rising' or 'falling', got {self.direction!r}")

    def level_for(self, value: float) -> OperationLevel:
        a, b = self.thresholds
        if self.direction == "rising":
            if value <= a:
                return OperationLevel.LOW
            if value <= b:
                return OperationLevel.MODERATE
            return OperationLevel.HIGH
        if value >= a:
            return OperationLevel.LOW
        if value >= b:
            return OperationLevel.MODERATE
        return OperationLevel.HIGH


@dataclass
class EnvironmentTrace:
    """Per-category true-value series over the whole simulation horizon."""

    horizon_s: float
    dt_s: float
    series: dict[NetworkCategory, list[float]] = field(default_factory=dict)
    criticality: dict[NetworkCategory, CriticalityBands] = field(default_factory=dict)

    def value(self, category: NetworkCategory, t: float) -> float:
        values = self.series[category]
        index = min(int(t / self.dt_s), len(values) - 1)
        return values[index]

    def categories(self) -> list[NetworkCategory]:
        return list(self.series)


def sample_schedule(schedule: PiecewiseSchedule, horizon_s: float, dt_s: float) -> list[float]:
    n = int(horizon_s / dt_s) + 1
    return [schedule.value(i * dt_s) for i in range(n)]


def derive_lagged_linear(
    source: PiecewiseSchedule,
    spec: CouplingSpec,
    horizon_s: float,
    dt_s: float,
    rng: random.Random,
) -> list[float]:
    n = int(horizon_s / dt_s) + 1
    out = []
    for i in range(n):
        t = i * dt_s
        noise = rng.gauss(0.0, spec.noise_stddev) if spec.noise_stddev > 0 else 0.0
        out.append(max(0.0, spec.beta + spec.alpha * source.value(t - spec.tau_s) + noise))
    return out


def gen_traffic_pollution(
    spec: CouplingSpec,
    schedule: PiecewiseSchedule,
    horizon_s: float,
    seed: int | str,
    dt_s: float = 1.0,
) -> EnvironmentTrace:
    """Coupled traffic/pollution truth: pollution follows traffic after a lag."""
    if horizon_s <= spec.tau_s:
        raise ValueError("horizon must exceed the coupling lag")
    trace = EnvironmentTrace(horizon_s, dt_s)
    trace.series[TRAFFIC] = sample_schedule(schedule, horizon_s, dt_s)
    rng = random.Random(f"{seed}/env/{POLLUTION.key}")
    trace.series[POLLUTION] = derive_lagged_linear(schedule, spec, horizon_s, dt_s, rng)
    return trace


# Piecewise-linear risk factors, anchored so that benign weather scores
# well below 0.2 and hot-dry-windy extremes well above 0.9. Every segment
# has nonzero slope, keeping the index strictly monotone in each input.
_TEMP_FACTOR = ((0.0, 0.05), (25.0, 0.45), (40.0, 0.92), (50.0, 0.99))
_HUMIDITY_FACTOR = ((0.0, 1.0), (10.0, 0.97), (30.0, 0.55), (60.0, 0.25), (100.0, 0.05))
_WIND_FACTOR = ((0.0, 0.30), (20.0, 0.50), (60.0, 0.85), (90.0, 0.98), (120.0, 0.99))
_TAIL_SLOPE = 1e-4


def _piecewise(points: tuple[tuple[float, float], ...], x: float, tail_slope: float) -> float:
    if x <= points[0][0]:
        return points[0][1]
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x <= x1:
            return y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    x_last, y_last = points[-1]
    return y_last + (x - x_last) * tail_slope


def fire_risk_index(temp_c: float, humidity_pct: float, wind_kmh: float) -> float:
    """Normalized fire danger in [0, 1] from temperature, humidity and wind.

    Strictly increasing in temperature and wind, strictly decreasing in
    humidity, over the physical input ranges.
    """
    if not 0.0 <= humidity_pct <= 100.0:
        raise ValueError(f"humidity {humidity_pct!r} outside [0, 100]")
    if temp_c < 0.0 or wind_kmh < 0.0:
        raise ValueError("temperature and wind speed must be non-negative")
    risk = (
        _piecewise(_TEMP_FACTOR, temp_c, _TAIL_SLOPE)
        * _piecewise(_HUMIDITY_FACTOR, humidity_pct, 0.0)
        * _piecewise(_WIND_FACTOR, wind_kmh, _TAIL_SLOPE)
    )
    return min(1.0, max(0.0, risk))


def derive_fire_risk(
    temp: list[float], humidity: list[float], wind: list[float]
) -> list[float]:
    if not len(temp) == len(humidity) == len(wind):
        raise ValueError("weather series lengths must match")
    return [fire_risk_index(t, h, w) for t, h, w in zip(temp, humidity, wind)]


def true_criticality(
    trace: EnvironmentTrace, category: NetworkCategory, t: float
) -> OperationLevel:
    """The environment's actual regime, which sets the quality targets."""
    bands = trace.criticality.get(category)
    if bands is None:
        raise KeyError(f"no criticality bands configured for {category}")
    return bands.level_for(trace.value(category, t))
