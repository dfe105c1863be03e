"""Simulated sensor network internals.

Sensors sample the environment with gaussian noise, the sink averages the
active readings, and queries reconfigure the report interval and the
active subset. Energy is a three-constant abstraction: a charge per
sensor report, a charge per sensor for each query broadcast, and an idle
drain per sensor-second.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .geo import GeoCoordinate
from .overlay import NetworkCategory


@dataclass(frozen=True)
class NetworkConfig:
    """The controllable pair a query installs: report interval and active count."""

    t_alpha_s: float
    n_active: int

    def __post_init__(self) -> None:
        if self.t_alpha_s <= 0:
            raise ValueError("t_alpha_s must be positive")
        if self.n_active < 1:
            raise ValueError("n_active must be at least 1")


@dataclass(frozen=True)
class Query:
    issued_at: float
    new_config: NetworkConfig


@dataclass(frozen=True)
class Report:
    sensor_id: int
    value: float
    sent_at: float


@dataclass(frozen=True)
class EnergyModel:
    e_report: float
    e_query: float
    e_idle_per_s: float

    def __post_init__(self) -> None:
        if min(self.e_report, self.e_query, self.e_idle_per_s) < 0:
            raise ValueError("energy constants must be non-negative")
        if self.e_report <= self.e_idle_per_s:
            raise ValueError("e_report must exceed e_idle_per_s")


@dataclass(frozen=True)
class QualityTarget:
    """Ideal report frequency and active count for one criticality level."""

    lambda_star_hz: float
    n_active_star: int

    def __post_init__(self) -> None:
        if self.lambda_star_hz <= 0:
            raise ValueError("lambda_star_hz must be positive")
        if self.n_active_star < 1:
            raise ValueError("n_active_star must be at least 1")


@dataclass
class SensorNode:
    sensor_id: int
    noise_stddev: float
    active: bool = False
    energy_used: float = 0.0


class SensorNetwork:
    """One WSN: its sensors, installed configuration, and energy account."""

    def __init__(
        self,
        network_id: str,
        category: NetworkCategory,
        center: GeoCoordinate,
        n_sensors: int,
        noise_stddev: float,
        energy_model: EnergyModel,
        config: NetworkConfig,
    ):
        if n_sensors < 1:
            raise ValueError("a network needs at least one sensor")
        if config.n_active > n_sensors:
            raise ValueError("n_active exceeds the sensor count")
        self.network_id = network_id
        self.category = category
        self.center = center
        self.noise_stddev = noise_stddev
        self.energy_model = energy_model
        self.sensors = [SensorNode(i, noise_stddev) for i in range(n_sensors)]
        self.config = config
        self.energy_cum = 0.0
        self._last_idle_t = 0.0
        self._select_active(config.n_active)

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def active_sensors(self) -> list[SensorNode]:
        return [s for s in self.sensors if s.active]

    def _select_active(self, n_active: int) -> None:
        # rotate by cumulative energy so depletion balances across sensors
        ranked = sorted(self.sensors, key=lambda s: (s.energy_used, s.sensor_id))
        chosen = {s.sensor_id for s in ranked[:n_active]}
        for sensor in self.sensors:
            sensor.active = sensor.sensor_id in chosen


def collect_reports(
    net: SensorNetwork, env_value: float, rng: random.Random, now: float
) -> list[Report]:
    """One report round: every active sensor reads truth plus its own noise."""
    reports = []
    for sensor in net.sensors:
        if not sensor.active:
            continue
        reading = env_value + rng.gauss(0.0, sensor.noise_stddev)
        reports.append(Report(sensor.sensor_id, reading, now))
        sensor.energy_used += net.energy_model.e_report
    return reports


def sample_and_report(
    net: SensorNetwork, env_value: float, rng: random.Random, now: float = 0.0
) -> float:
    """Run a report round and return the sink aggregate (arithmetic mean)."""
    reports = collect_reports(net, env_value, rng, now)
    if not reports:
        raise ValueError("no active sensors to report")
    net.energy_cum += len(reports) * net.energy_model.e_report
    return sum(r.value for r in reports) / len(reports)


def apply_query(net: SensorNetwork, query: Query) -> None:
    """Install a new configuration; the query broadcast charges every sensor."""
    config = query.new_config
    if config.n_active > net.n_sensors:
        raise ValueError(
            f"n_active {config.n_active} exceeds {net.n_sensors} sensors"
        )
    for sensor in net.sensors:
        sensor.energy_used += net.energy_model.e_query
    net.energy_cum += net.n_sensors * net.energy_model.e_query
    net.config = config
    net._select_active(config.n_active)


def accrue_idle(net: SensorNetwork, now: float) -> None:
    """Charge idle drain for every sensor since the last accrual point."""
    dt = now - net._last_idle_t
    if dt < 0:
        raise ValueError("idle accrual must move forward in time")
    net.energy_cum += net.n_sensors * net.energy_model.e_idle_per_s * dt
    net._last_idle_t = now


def sensing_quality(config: NetworkConfig, target: QualityTarget) -> float:
    """Quality of the installed configuration against the current ideal.

    Q = min(1, (lambda / lambda*) * (n_active / n*)), with
    lambda = 1 / t_alpha. Exceeding the ideal does not raise quality.
    """
    lam = 1.0 / config.t_alpha_s
    return min(1.0, (lam / target.lambda_star_hz) * (config.n_active / target.n_active_star))
