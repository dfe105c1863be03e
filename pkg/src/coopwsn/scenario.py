"""Scenario files: schema, validation, and the shipped presets.

A scenario is a JSON document describing the networks, the environment
truth, the overlay join order, and timing constants. Loading validates
the whole document and reports every problem found, not just the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .cooperation import CooperationPolicy, parse_sign
from .environment import CouplingSpec, CriticalityBands, PiecewiseSchedule
from .geo import GeoCoordinate, parse_dms, DmsParseError
from .overlay import NetworkCategory
from .reasoning import (
    BUILTIN_RULESETS,
    LevelMap,
    LevelSetting,
    OperationLevel,
    Rule,
    RuleSet,
    ValueRange,
)
from .wsn import EnergyModel, QualityTarget

PRESET_NAMES = ("traffic-pollution-v1", "forest-fire-v1")


class ScenarioError(ValueError):
    """Scenario rejected; `errors` lists every validation failure."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class LinkDelays:
    sink_to_eg_s: float = 1.0
    eg_to_eg_s: float = 0.2

    def __post_init__(self) -> None:
        if self.sink_to_eg_s < 0 or self.eg_to_eg_s < 0:
            raise ValueError("link delays must be non-negative")

    def message_delay(self, link: str) -> float:
        """Constant per-link-class delay in seconds."""
        if link == "sink-to-eg":
            return self.sink_to_eg_s
        if link == "eg-to-eg":
            return self.eg_to_eg_s
        raise ValueError(f"unknown link class {link!r}")


@dataclass
class LinearLagCoupling:
    source: NetworkCategory
    target: NetworkCategory
    spec: CouplingSpec


@dataclass
class FireRiskCoupling:
    temperature: NetworkCategory
    humidity: NetworkCategory
    wind: NetworkCategory
    target: NetworkCategory


@dataclass
class EnvironmentSpec:
    sample_dt_s: float = 1.0
    schedules: dict[NetworkCategory, PiecewiseSchedule] = field(default_factory=dict)
    couplings: list[LinearLagCoupling | FireRiskCoupling] = field(default_factory=list)
    criticality: dict[NetworkCategory, CriticalityBands] = field(default_factory=dict)


@dataclass
class OverlaySpec:
    bootstrap: str | None = None
    join_order: list[str] = field(default_factory=list)


@dataclass
class NetworkSpec:
    network_id: str
    category: NetworkCategory
    center: GeoCoordinate
    n_sensors: int
    noise_stddev: float
    initial_level: OperationLevel
    energy: EnergyModel
    level_map: LevelMap
    quality_targets: dict[OperationLevel, QualityTarget]
    policy: CooperationPolicy
    ruleset: RuleSet
    trust_min: float = 1.0
    t_stale_s: float = 900.0
    eg_update_interval_s: float = 300.0
    address: str | None = None


@dataclass
class ScenarioSpec:
    name: str
    horizon_s: float
    networks: list[NetworkSpec]
    environment: EnvironmentSpec
    overlay: OverlaySpec
    delays: LinkDelays = field(default_factory=LinkDelays)
    metrics_interval_s: float = 60.0


class _Collector:
    """Accumulates validation errors so a load reports them all at once."""

    def __init__(self) -> None:
        self.errors: list[str] = []

    def add(self, where: str, message: str) -> None:
        self.errors.append(f"{where}: {message}")

    def guard(self, where: str, builder):
        """Run a constructor, converting its ValueError into a located error."""
        try:
            return builder()
        except (ValueError, KeyError, TypeError) as exc:
            self.add(where, str(exc))
            return None


def _parse_center(raw, where: str, errors: _Collector) -> GeoCoordinate | None:
    if isinstance(raw, dict) and "dms" in raw:
        try:
            return parse_dms(raw["dms"])
        except DmsParseError as exc:
            errors.add(where, str(exc))
            return None
    if isinstance(raw, dict) and "lat" in raw and "lon" in raw:
        return errors.guard(where, lambda: GeoCoordinate(float(raw["lat"]), float(raw["lon"])))
    errors.add(where, "center must provide either 'dms' or 'lat'/'lon'")
    return None


def _parse_range(raw: dict, where: str, errors: _Collector) -> ValueRange | None:
    def build() -> ValueRange:
        return ValueRange(
            lo=float(raw["min"]) if "min" in raw else None,
            hi=float(raw["max"]) if "max" in raw else None,
            lo_inclusive=bool(raw.get("min_inclusive", False)),
            hi_inclusive=bool(raw.get("max_inclusive", True)),
        )

    if "min" not in raw and "max" not in raw:
        errors.add(where, "condition needs at least one of 'min'/'max'")
        return None
    return errors.guard(where, build)


def _parse_ruleset(raw, where: str, errors: _Collector) -> RuleSet | None:
    if isinstance(raw, dict) and "preset" in raw:
        factory = BUILTIN_RULESETS.get(raw["preset"])
        if factory is None:
            errors.add(where, f"unknown ruleset preset {raw['preset']!r}")
            return None
        return factory()
    if not isinstance(raw, dict) or "rules" not in raw:
        errors.add(where, "rules must provide 'preset' or a 'rules' list")
        return None
    default_raw = raw.get("default_level", "High")
    default_level = errors.guard(where, lambda: OperationLevel.parse(default_raw))
    rules: list[Rule] = []
    for i, row in enumerate(raw["rules"]):
        row_where = f"{where}.rules[{i}]"
        level = errors.guard(row_where, lambda: OperationLevel.parse(row["level"]))
        conditions = []
        for j, cond in enumerate(row.get("conditions", [])):
            cond_where = f"{row_where}.conditions[{j}]"
            if "category" not in cond:
                errors.add(cond_where, "missing category")
                continue
            interval = _parse_range(cond, cond_where, errors)
            if interval is not None:
                conditions.append((NetworkCategory(cond["category"]), interval))
        if not conditions:
            errors.add(row_where, "rule has no usable conditions")
            continue
        if level is not None:
            rule = errors.guard(row_where, lambda: Rule(tuple(conditions), level, i))
            if rule is not None:
                rules.append(rule)
    if default_level is None or not rules:
        return None
    return errors.guard(where, lambda: RuleSet(tuple(rules), default_level))


def _parse_level_keyed(raw: dict, where: str, errors: _Collector, builder):
    out = {}
    for key, value in raw.items():
        level = errors.guard(where, lambda: OperationLevel.parse(key))
        if level is None:
            continue
        built = errors.guard(f"{where}.{key}", lambda: builder(value))
        if built is not None:
            out[level] = built
    return out


def _parse_quality_targets(
    raw: dict, where: str, errors: _Collector
) -> dict[OperationLevel, QualityTarget]:
    def build(value: dict) -> QualityTarget:
        if "lambda_star_hz" in value:
            lam = float(value["lambda_star_hz"])
        elif "t_alpha_star_s" in value:
            lam = 1.0 / float(value["t_alpha_star_s"])
        else:
            raise ValueError("quality target needs 'lambda_star_hz' or 't_alpha_star_s'")
        return QualityTarget(lam, int(value["n_active_star"]))

    targets = _parse_level_keyed(raw, where, errors, build)
    if len(targets) == len(OperationLevel):
        ordered = [targets[level] for level in sorted(OperationLevel)]
        for lower, higher in zip(ordered, ordered[1:]):
            if higher.lambda_star_hz <= lower.lambda_star_hz:
                errors.add(where, "lambda_star_hz must strictly increase with criticality")
            if higher.n_active_star <= lower.n_active_star:
                errors.add(where, "n_active_star must strictly increase with criticality")
    else:
        errors.add(where, "quality targets must cover Low, Moderate and High")
    return targets


def _parse_policy(raw: dict, where: str, errors: _Collector) -> CooperationPolicy | None:
    def build() -> CooperationPolicy:
        signs = {
            NetworkCategory(cat): parse_sign(sign)
            for cat, sign in raw.get("expected_signs", {}).items()
        }
        return CooperationPolicy(
            d_max_km=float(raw["d_max_km"]),
            compatible_categories=frozenset(
                NetworkCategory(c) for c in raw.get("compatible_categories", [])
            ),
            trust_max=float(raw.get("trust_max", 10.0)),
            correlation_threshold=float(raw.get("correlation_threshold", 0.7)),
            expected_signs=signs,
            trust_bonus=float(raw.get("trust_bonus", 0.5)),
            min_history=int(raw.get("min_history", 10)),
            history_capacity=int(raw.get("history_capacity", 256)),
        )

    return errors.guard(where, build)


def _parse_network(raw: dict, index: int, errors: _Collector) -> NetworkSpec | None:
    where = f"networks[{index}]"
    missing = [key for key in ("id", "category", "center", "n_sensors") if key not in raw]
    if missing:
        errors.add(where, f"missing required fields: {', '.join(missing)}")
        return None
    center = _parse_center(raw["center"], f"{where}.center", errors)
    energy = errors.guard(
        f"{where}.energy",
        lambda: EnergyModel(
            e_report=float(raw["energy"]["e_report"]),
            e_query=float(raw["energy"]["e_query"]),
            e_idle_per_s=float(raw["energy"]["e_idle_per_s"]),
        ),
    )
    level_map = None
    level_settings = _parse_level_keyed(
        raw.get("level_map", {}),
        f"{where}.level_map",
        errors,
        lambda v: LevelSetting(float(v["t_alpha_s"]), float(v["active_fraction"])),
    )
    if len(level_settings) == len(OperationLevel):
        level_map = errors.guard(f"{where}.level_map", lambda: LevelMap(level_settings))
    else:
        errors.add(f"{where}.level_map", "level map must cover Low, Moderate and High")
    targets = _parse_quality_targets(
        raw.get("quality_targets", {}), f"{where}.quality_targets", errors
    )
    policy = _parse_policy(raw.get("cooperation", {}), f"{where}.cooperation", errors)
    ruleset = _parse_ruleset(raw.get("rules"), f"{where}.rules", errors)
    initial_level = errors.guard(
        f"{where}.initial_level",
        lambda: OperationLevel.parse(raw.get("initial_level", "Moderate")),
    )
    n_sensors = int(raw["n_sensors"])
    if n_sensors < 1:
        errors.add(where, "n_sensors must be at least 1")
    noise = float(raw.get("noise_stddev", 0.0))
    if noise < 0:
        errors.add(where, "noise_stddev must be non-negative")
    if float(raw.get("trust_min", 1.0)) < 0:
        errors.add(where, "trust_min must be non-negative")
    for key in ("t_stale_s", "eg_update_interval_s"):
        if key in raw and float(raw[key]) <= 0:
            errors.add(where, f"{key} must be positive")
    if None in (center, energy, level_map, policy, ruleset, initial_level) or not targets:
        return None
    return NetworkSpec(
        network_id=str(raw["id"]),
        category=NetworkCategory(raw["category"]),
        center=center,
        n_sensors=n_sensors,
        noise_stddev=noise,
        initial_level=initial_level,
        energy=energy,
        level_map=level_map,
        quality_targets=targets,
        policy=policy,
        ruleset=ruleset,
        trust_min=float(raw.get("trust_min", 1.0)),
        t_stale_s=float(raw.get("t_stale_s", 900.0)),
        eg_update_interval_s=float(raw.get("eg_update_interval_s", 300.0)),
        address=raw.get("address"),
    )


def _parse_environment(raw: dict, errors: _Collector) -> EnvironmentSpec:
    env = EnvironmentSpec(sample_dt_s=float(raw.get("sample_dt_s", 1.0)))
    if env.sample_dt_s <= 0:
        errors.add("environment.sample_dt_s", "must be positive")
    for cat_name, points in raw.get("schedules", {}).items():
        where = f"environment.schedules.{cat_name}"
        category = NetworkCategory(cat_name)
        schedule = errors.guard(
            where,
            lambda: PiecewiseSchedule(
                tuple((float(p["start_s"]), float(p["value"])) for p in points)
            ),
        )
        if schedule is None:
            continue
        if category.key == "humidity":
            bad = [v for _, v in schedule.points if not 0.0 <= v <= 100.0]
            if bad:
                errors.add(where, f"humidity values outside [0, 100]: {bad}")
        env.schedules[category] = schedule
    for i, coupling in enumerate(raw.get("couplings", [])):
        where = f"environment.couplings[{i}]"
        kind = coupling.get("kind")
        if kind == "linear-lag":
            spec = errors.guard(
                where,
                lambda: CouplingSpec(
                    alpha=float(coupling["alpha"]),
                    tau_s=float(coupling["tau_s"]),
                    beta=float(coupling.get("beta", 0.0)),
                    noise_stddev=float(coupling.get("noise_stddev", 0.0)),
                ),
            )
            if spec is not None:
                env.couplings.append(
                    LinearLagCoupling(
                        NetworkCategory(coupling["source"]),
                        NetworkCategory(coupling["target"]),
                        spec,
                    )
                )
        elif kind == "fire-risk":
            built = errors.guard(
                where,
                lambda: FireRiskCoupling(
                    NetworkCategory(coupling["temperature"]),
                    NetworkCategory(coupling["humidity"]),
                    NetworkCategory(coupling["wind"]),
                    NetworkCategory(coupling["target"]),
                ),
            )
            if built is not None:
                env.couplings.append(built)
        else:
            errors.add(where, f"unknown coupling kind {kind!r}")
    for cat_name, bands in raw.get("criticality", {}).items():
        where = f"environment.criticality.{cat_name}"
        built = errors.guard(
            where,
            lambda: CriticalityBands(
                (float(bands["thresholds"][0]), float(bands["thresholds"][1])),
                bands.get("direction", "rising"),
            ),
        )
        if built is not None:
            env.criticality[NetworkCategory(cat_name)] = built
    return env


def _cross_validate(spec: ScenarioSpec, errors: _Collector) -> None:
    ids = [n.network_id for n in spec.networks]
    if len(set(ids)) != len(ids):
        errors.add("networks", "network ids must be unique")
    known = set(ids)

    if spec.networks:
        if spec.overlay.bootstrap is None:
            errors.add("overlay", "exactly one bootstrap network is required")
        elif spec.overlay.bootstrap not in known:
            errors.add("overlay", f"bootstrap {spec.overlay.bootstrap!r} is not a network id")
        order = spec.overlay.join_order or list(ids)
        if sorted(order) != sorted(ids):
            errors.add("overlay.join_order", "must list every network id exactly once")
        elif spec.overlay.bootstrap is not None and order and order[0] != spec.overlay.bootstrap:
            errors.add("overlay.join_order", "the bootstrap network must join first")
        spec.overlay.join_order = order

    # every category a network senses needs truth and criticality bands
    produced = set(spec.environment.schedules)
    for coupling in spec.environment.couplings:
        produced.add(coupling.target)
    for net in spec.networks:
        if net.category not in produced:
            errors.add(
                f"networks[{net.network_id}]",
                f"no environment series produces category {net.category}",
            )
        if net.category not in spec.environment.criticality:
            errors.add(
                f"networks[{net.network_id}]",
                f"no criticality bands for category {net.category}",
            )
    for coupling in spec.environment.couplings:
        if isinstance(coupling, LinearLagCoupling):
            if coupling.source not in spec.environment.schedules:
                errors.add(
                    "environment.couplings",
                    f"linear-lag source {coupling.source} has no schedule",
                )
            if coupling.spec.tau_s >= spec.horizon_s:
                errors.add("environment.couplings", "coupling lag must be below the horizon")
        else:
            for needed in (coupling.temperature, coupling.humidity, coupling.wind):
                if needed not in spec.environment.schedules:
                    errors.add(
                        "environment.couplings",
                        f"fire-risk input {needed} has no schedule",
                    )


def parse_scenario(doc: dict, name_hint: str = "scenario") -> ScenarioSpec:
    """Build and validate a ScenarioSpec from a parsed JSON document."""
    errors = _Collector()
    horizon = float(doc.get("horizon_s", 0))
    if horizon <= 0:
        errors.add("horizon_s", "must be positive")
    metrics_interval = float(doc.get("metrics_interval_s", 60.0))
    if metrics_interval <= 0:
        errors.add("metrics_interval_s", "must be positive")
    delays = errors.guard(
        "delays",
        lambda: LinkDelays(
            sink_to_eg_s=float(doc.get("delays", {}).get("sink_to_eg_s", 1.0)),
            eg_to_eg_s=float(doc.get("delays", {}).get("eg_to_eg_s", 0.2)),
        ),
    ) or LinkDelays()
    overlay_raw = doc.get("overlay", {})
    overlay = OverlaySpec(
        bootstrap=overlay_raw.get("bootstrap"),
        join_order=list(overlay_raw.get("join_order", [])),
    )
    environment = _parse_environment(doc.get("environment", {}), errors)
    networks = []
    for i, raw in enumerate(doc.get("networks", [])):
        net = _parse_network(raw, i, errors)
        if net is not None:
            networks.append(net)
    spec = ScenarioSpec(
        name=str(doc.get("name", name_hint)),
        horizon_s=horizon,
        networks=networks,
        environment=environment,
        overlay=overlay,
        delays=delays,
        metrics_interval_s=metrics_interval,
    )
    if not errors.errors:
        _cross_validate(spec, errors)
    if errors.errors:
        raise ScenarioError(errors.errors)
    return spec


def preset_path(name: str) -> Path:
    ref = resources.files("coopwsn").joinpath(f"presets/{name}.json")
    with resources.as_file(ref) as path:
        return Path(path)


def load_scenario(path_or_name: str | Path) -> ScenarioSpec:
    """Load a scenario from a file path or a shipped preset name."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in PRESET_NAMES:
        path = preset_path(str(path_or_name))
    if not path.exists():
        raise ScenarioError([f"scenario file not found: {path_or_name}"])
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: invalid JSON: {exc}"]) from exc
    return parse_scenario(doc, name_hint=path.stem)
