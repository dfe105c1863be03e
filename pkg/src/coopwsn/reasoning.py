"""The gateway reasoning loop.

Every update, local or remote, is fused into one estimate per category
(weighted by trust and freshness), run through a first-match rule table
to pick an operation level, and mapped to a concrete network
configuration. A query is emitted only when that configuration differs
from the one already commanded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

from . import cooperation
from .cooperation import CntEntry, CooperationPolicy, staleness_weight
from .overlay import POLLUTION, TRAFFIC, GltEntry, GlobalLookupTable, NetworkCategory, NodeId
from .wsn import NetworkConfig, Query


class OperationLevel(IntEnum):
    LOW = 0
    MODERATE = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "OperationLevel":
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown operation level {text!r}") from None


@dataclass(frozen=True)
class ValueRange:
    """Numeric interval with explicit bounds; None means unbounded."""

    lo: float | None = None
    hi: float | None = None
    lo_inclusive: bool = False
    hi_inclusive: bool = True

    def __post_init__(self) -> None:
        if self.lo is not None and self.hi is not None:
            if self.lo > self.hi:
                raise ValueError(f"empty range: lo {self.lo} > hi {self.hi}")
            if self.lo == self.hi and not (self.lo_inclusive and self.hi_inclusive):
                raise ValueError("degenerate range requires both bounds inclusive")

    def contains(self, x: float) -> bool:
        if self.lo is not None:
            if x < self.lo or (x == self.lo and not self.lo_inclusive):
                return False
        if self.hi is not None:
            if x > self.hi or (x == self.hi and not self.hi_inclusive):
                return False
        return True


@dataclass(frozen=True)
class Rule:
    conditions: tuple[tuple[NetworkCategory, ValueRange], ...]
    level: OperationLevel
    priority: int

    def __post_init__(self) -> None:
        seen = set()
        for category, _ in self.conditions:
            if category in seen:
                raise ValueError(f"category {category} repeated within one rule")
            seen.add(category)
        if not self.conditions:
            raise ValueError("a rule needs at least one condition")


@dataclass(frozen=True)
class RuleSet:
    """Priority-ordered rules with a fail-safe default level."""

    rules: tuple[Rule, ...]
    default_level: OperationLevel

    def __post_init__(self) -> None:
        if not self.rules:
            raise ValueError("ruleset must contain at least one rule")
        priorities = [r.priority for r in self.rules]
        if len(set(priorities)) != len(priorities):
            raise ValueError("rule priorities must be unique")

    @classmethod
    def ordered(
        cls,
        rows: list[tuple[list[tuple[NetworkCategory, ValueRange]], OperationLevel]],
        default_level: OperationLevel,
    ) -> "RuleSet":
        rules = tuple(
            Rule(tuple(conditions), level, priority)
            for priority, (conditions, level) in enumerate(rows)
        )
        return cls(rules, default_level)


def traffic_pollution_ruleset() -> RuleSet:
    """Built-in three-row pollution/traffic table with a High fail-safe.

    Rows overlap on 10 < P <= 20, where the earlier (Moderate) row wins by
    first-match order.
    """
    return RuleSet.ordered(
        [
            (
                [
                    (POLLUTION, ValueRange(hi=10.0)),
                    (TRAFFIC, ValueRange(hi=10.0)),
                ],
                OperationLevel.LOW,
            ),
            (
                [
                    (POLLUTION, ValueRange(lo=10.0, hi=20.0)),
                    (TRAFFIC, ValueRange(lo=10.0, hi=50.0)),
                ],
                OperationLevel.MODERATE,
            ),
            (
                [
                    (POLLUTION, ValueRange(lo=10.0, hi=45.0)),
                    (TRAFFIC, ValueRange(lo=10.0, hi=50.0)),
                ],
                OperationLevel.HIGH,
            ),
        ],
        default_level=OperationLevel.HIGH,
    )


BUILTIN_RULESETS = {
    "traffic-pollution-v1": traffic_pollution_ruleset,
}


@dataclass(frozen=True)
class LevelSetting:
    t_alpha_s: float
    active_fraction: float

    def __post_init__(self) -> None:
        if self.t_alpha_s <= 0:
            raise ValueError("t_alpha_s must be positive")
        if not 0.0 < self.active_fraction <= 1.0:
            raise ValueError("active_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class LevelMap:
    """Configuration per operation level; stricter levels report faster."""

    settings: dict[OperationLevel, LevelSetting]

    def __post_init__(self) -> None:
        for level in OperationLevel:
            if level not in self.settings:
                raise ValueError(f"level map missing {level.label}")
        ordered = [self.settings[level] for level in sorted(OperationLevel)]
        for lower, higher in zip(ordered, ordered[1:]):
            if higher.t_alpha_s >= lower.t_alpha_s:
                raise ValueError("t_alpha_s must strictly decrease with level")
            if higher.active_fraction <= lower.active_fraction:
                raise ValueError("active_fraction must strictly increase with level")


def default_level_map() -> LevelMap:
    return LevelMap(
        {
            OperationLevel.LOW: LevelSetting(600.0, 0.25),
            OperationLevel.MODERATE: LevelSetting(300.0, 0.5),
            OperationLevel.HIGH: LevelSetting(60.0, 1.0),
        }
    )


@dataclass(frozen=True)
class FusedValue:
    value: float
    confidence: float


FusedInputs = dict[NetworkCategory, FusedValue]


def fuse_inputs(
    local_value: float | None,
    local_category: NetworkCategory,
    entries: list[CntEntry],
    now: float,
    *,
    t_stale_s: float,
    trust_min: float,
    trust_max: float,
) -> FusedInputs:
    """Weighted per-category estimates from local and cooperating sources.

    Remote weight is trust times freshness; entries below trust_min or
    fully stale contribute nothing. The local aggregate always enters its
    own category at full weight, since a network trusts itself.
    """
    sums: dict[NetworkCategory, tuple[float, float]] = {}

    def add(category: NetworkCategory, weight: float, value: float) -> None:
        wsum, vsum = sums.get(category, (0.0, 0.0))
        sums[category] = (wsum + weight, vsum + weight * value)

    if local_value is not None:
        add(local_category, trust_max, local_value)
    for entry in sorted(entries, key=lambda e: e.node_id):
        if entry.trust < trust_min or entry.latest_value is None:
            continue
        weight = entry.trust * staleness_weight(entry, now, t_stale_s)
        if weight <= 0.0:
            continue
        add(entry.category, weight, entry.latest_value)

    return {
        category: FusedValue(vsum / wsum, wsum)
        for category, (wsum, vsum) in sums.items()
        if wsum > 0.0
    }


def evaluate_rules(ruleset: RuleSet, inputs: FusedInputs) -> OperationLevel:
    """First rule whose every condition holds wins; none matching fails safe.

    A rule referencing a category absent from the inputs does not match.
    """
    for rule in ruleset.rules:
        matched = True
        for category, interval in rule.conditions:
            fused = inputs.get(category)
            if fused is None or not interval.contains(fused.value):
                matched = False
                break
        if matched:
            return rule.level
    return ruleset.default_level


def level_to_config(level_map: LevelMap, level: OperationLevel, n_total: int) -> NetworkConfig:
    """Map a level to a concrete configuration, never below one active sensor."""
    if n_total < 1:
        raise ValueError("n_total must be at least 1")
    setting = level_map.settings[level]
    n_active = max(1, int(math.floor(setting.active_fraction * n_total + 0.5)))
    return NetworkConfig(setting.t_alpha_s, min(n_active, n_total))


@dataclass
class EgUpdate:
    """Wire payload one gateway pushes to a cooperating peer."""

    sender_id: NodeId
    sender_network: str
    category: NetworkCategory
    value: float
    interval_s: float
    sent_at: float


class EnhancedGateway:
    """Per-network reasoning state: CNT, fused view, and commanded config."""

    def __init__(
        self,
        network_id: str,
        entry: GltEntry,
        n_total: int,
        policy: CooperationPolicy,
        ruleset: RuleSet,
        level_map: LevelMap,
        initial_level: OperationLevel,
        *,
        trust_min: float = 1.0,
        t_stale_s: float = 900.0,
        update_interval_s: float = 300.0,
    ):
        self.network_id = network_id
        self.entry = entry
        self.n_total = n_total
        self.policy = policy
        self.ruleset = ruleset
        self.level_map = level_map
        self.trust_min = trust_min
        self.t_stale_s = t_stale_s
        self.update_interval_s = update_interval_s
        self.cnt: dict[NodeId, CntEntry] = {}
        self.local_value: float | None = None
        self.local_time: float | None = None
        self.current_level = initial_level
        self.commanded_config = level_to_config(level_map, initial_level, n_total)
        self.queries_sent = 0
        self.updates_rx = 0
        self.dropped_updates = 0

    def attach(self, glt: GlobalLookupTable) -> None:
        """Build the CNT from a freshly received GLT replica."""
        for entry in cooperation.build_cnt(self.entry, glt, self.policy):
            self.cnt[entry.node_id] = entry

    def consider_peer(self, entry: GltEntry) -> None:
        """Extend the CNT when a joining network qualifies for cooperation."""
        if entry.node_id in self.cnt:
            return
        if cooperation.qualifies(self.entry, entry, self.policy):
            self.cnt[entry.node_id] = cooperation.make_entry(self.entry, entry, self.policy)

    def cooperator_ids(self) -> list[NodeId]:
        return sorted(self.cnt)

    def process_update(
        self,
        source: NodeId | None,
        value: float,
        now: float,
        interval_s: float | None = None,
    ) -> Query | None:
        """Record an update, re-evaluate the rules, and emit a query on change.

        `source` is None for the local sink; remote sources must already be
        CNT members, otherwise the update is dropped and counted.
        """
        if source is None:
            self.local_value = value
            self.local_time = now
        else:
            entry = self.cnt.get(source)
            if entry is None:
                self.dropped_updates += 1
                return None
            self.updates_rx += 1
            if entry.update_interval_s is None and interval_s is not None:
                entry.update_interval_s = interval_s
            if self.local_value is not None:
                cooperation.record_pair(entry, self.local_value, value, now)
                entry.pairs_since_eval += 1
                if entry.pairs_since_eval >= self.policy.min_history:
                    cooperation.update_trust(entry, self.policy)
                    entry.pairs_since_eval = 0
            else:
                cooperation.touch(entry, value, now)

        inputs = fuse_inputs(
            self.local_value,
            self.entry.category,
            list(self.cnt.values()),
            now,
            t_stale_s=self.t_stale_s,
            trust_min=self.trust_min,
            trust_max=self.policy.trust_max,
        )
        level = evaluate_rules(self.ruleset, inputs)
        self.current_level = level
        config = level_to_config(self.level_map, level, self.n_total)
        if config != self.commanded_config:
            self.commanded_config = config
            self.queries_sent += 1
            return Query(issued_at=now, new_config=config)
        return None
