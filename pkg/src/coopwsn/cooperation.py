"""Cooperating-network selection and trust bookkeeping.

A gateway derives its Cooperating Networks Table (CNT) from the overlay
membership by filtering on distance and category. Trust starts from
proximity (linear between the maximum at distance zero and zero at the
cutoff) and is earned over time when the remote's reports correlate
strongly, with the expected sign, against local measurements.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .geo import haversine_distance
from .overlay import GltEntry, GlobalLookupTable, NetworkCategory, NodeId

POSITIVE = 1
NEGATIVE = -1


class CorrelationError(ValueError):
    """Correlation over a history window could not be computed."""


class InsufficientHistory(CorrelationError):
    """Fewer than three value pairs recorded."""


class UndefinedCorrelation(CorrelationError):
    """At least one series is constant, so the coefficient is undefined."""


def parse_sign(label: str) -> int:
    if label == "positive":
        return POSITIVE
    if label == "negative":
        return NEGATIVE
    raise ValueError(f"expected 'positive' or 'negative', got {label!r}")


@dataclass
class CooperationPolicy:
    """Per-network knobs controlling who qualifies and how trust evolves."""

    d_max_km: float
    compatible_categories: frozenset[NetworkCategory]
    trust_max: float = 10.0
    correlation_threshold: float = 0.7
    expected_signs: dict[NetworkCategory, int] = field(default_factory=dict)
    trust_bonus: float = 0.5
    min_history: int = 10
    history_capacity: int = 256

    def __post_init__(self) -> None:
        if self.d_max_km <= 0:
            raise ValueError("d_max_km must be positive")
        if not 0.0 < self.correlation_threshold < 1.0:
            raise ValueError("correlation_threshold must lie in (0, 1)")
        if self.trust_max <= 0:
            raise ValueError("trust_max must be positive")
        if self.trust_bonus <= 0:
            raise ValueError("trust_bonus must be positive")
        if self.min_history < 3:
            raise ValueError("min_history must be at least 3")
        if self.history_capacity < self.min_history:
            raise ValueError("history_capacity must be at least min_history")
        for sign in self.expected_signs.values():
            if sign not in (POSITIVE, NEGATIVE):
                raise ValueError(f"expected sign must be +1 or -1, got {sign!r}")

    def expected_sign(self, category: NetworkCategory) -> int:
        return self.expected_signs.get(category, POSITIVE)


@dataclass
class CntEntry:
    """State kept per cooperating network: trust, freshness, paired history."""

    node_id: NodeId
    category: NetworkCategory
    trust: float
    distance_km: float
    update_interval_s: float | None = None
    latest_value: float | None = None
    last_update_time: float | None = None
    history: deque[tuple[float, float]] = field(default_factory=deque)
    pairs_since_eval: int = 0


def initial_trust(d_km: float, policy: CooperationPolicy) -> float:
    """Proximity-seeded trust, linear from trust_max at 0 km to 0 at d_max."""
    if d_km < 0 or d_km > policy.d_max_km:
        raise ValueError(f"distance {d_km} outside [0, {policy.d_max_km}]")
    return policy.trust_max * (1.0 - d_km / policy.d_max_km)


def qualifies(self_entry: GltEntry, other: GltEntry, policy: CooperationPolicy) -> bool:
    """Distance filter first, then category match; the cutoff is inclusive."""
    if other.node_id == self_entry.node_id:
        return False
    if other.category not in policy.compatible_categories:
        return False
    return haversine_distance(self_entry.center, other.center) <= policy.d_max_km


def make_entry(self_entry: GltEntry, other: GltEntry, policy: CooperationPolicy) -> CntEntry:
    d = haversine_distance(self_entry.center, other.center)
    return CntEntry(
        node_id=other.node_id,
        category=other.category,
        trust=initial_trust(d, policy),
        distance_km=d,
        history=deque(maxlen=policy.history_capacity),
    )


def build_cnt(
    self_entry: GltEntry, glt: GlobalLookupTable, policy: CooperationPolicy
) -> list[CntEntry]:
    """Select the cooperation partners for one gateway from its GLT replica."""
    return [
        make_entry(self_entry, other, policy)
        for other in glt.entries()
        if qualifies(self_entry, other, policy)
    ]


def pearson_correlation(pairs) -> float:
    """Correlation coefficient of paired (local, remote) values.

    Computed from the raw running sums:

        r = (n*S_xy - S_x*S_y) / (sqrt(n*S_xx - S_x^2) * sqrt(n*S_yy - S_y^2))

    Raises InsufficientHistory for n < 3 and UndefinedCorrelation when a
    series is constant (zero denominator).
    """
    n = len(pairs)
    if n < 3:
        raise InsufficientHistory(f"need at least 3 pairs, have {n}")
    sx = sy = sxy = sxx = syy = 0.0
    for x, y in pairs:
        sx += x
        sy += y
        sxy += x * y
        sxx += x * x
        syy += y * y
    dx = n * sxx - sx * sx
    dy = n * syy - sy * sy
    if dx <= 0.0 or dy <= 0.0:
        raise UndefinedCorrelation("constant series")
    return (n * sxy - sx * sy) / (math.sqrt(dx) * math.sqrt(dy))


def record_pair(entry: CntEntry, local: float, remote: float, now: float) -> CntEntry:
    """Append one (local, remote) observation; oldest drops at capacity."""
    if entry.last_update_time is not None and now < entry.last_update_time:
        raise ValueError("update timestamps must be non-decreasing")
    entry.history.append((local, remote))
    entry.latest_value = remote
    entry.last_update_time = now
    return entry


def touch(entry: CntEntry, remote: float, now: float) -> CntEntry:
    """Record a remote value without a local pairing (no local aggregate yet)."""
    if entry.last_update_time is not None and now < entry.last_update_time:
        raise ValueError("update timestamps must be non-decreasing")
    entry.latest_value = remote
    entry.last_update_time = now
    return entry


def update_trust(entry: CntEntry, policy: CooperationPolicy) -> CntEntry:
    """Earn trust when the history shows a strong, correctly-signed correlation.

    The bonus is additive and clamped at trust_max. Weak or wrong-signed
    correlations leave trust unchanged; there is no decay.
    """
    if len(entry.history) < policy.min_history:
        return entry
    try:
        r = pearson_correlation(list(entry.history))
    except CorrelationError:
        return entry
    if abs(r) > policy.correlation_threshold:
        expected = policy.expected_sign(entry.category)
        if (r > 0) == (expected > 0):
            entry.trust = min(policy.trust_max, entry.trust + policy.trust_bonus)
    return entry


def staleness_weight(entry: CntEntry, now: float, t_stale_s: float) -> float:
    """Linear freshness weight: 1 at age zero, 0 at or beyond t_stale_s."""
    if t_stale_s <= 0:
        raise ValueError("t_stale_s must be positive")
    if entry.last_update_time is None:
        return 0.0
    age = now - entry.last_update_time
    if age < 0:
        raise ValueError("entry is newer than 'now'")
    return max(0.0, 1.0 - age / t_stale_s)
