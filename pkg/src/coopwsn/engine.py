"""Deterministic discrete-event core.

A single-threaded loop drives a global clock over a priority queue of
events ordered by (fire time, insertion sequence). All randomness flows
through one seeded generator, so identical (scenario, seed, mode) inputs
reproduce identical metric streams byte for byte.

Event flow per network: sensor report rounds feed the sink aggregate to
the gateway after a fixed link delay; gateways periodically push their
latest aggregate to cooperating peers (cooperative mode only); any update
may make a gateway command a new configuration, delivered back to the
sensors as a query after another link delay.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from . import wsn
from .environment import (
    EnvironmentTrace,
    derive_fire_risk,
    derive_lagged_linear,
    sample_schedule,
    true_criticality,
)
from .overlay import GltEntry, NodeId, OverlayNetwork, generate_node_id
from .reasoning import EnhancedGateway, OperationLevel, level_to_config
from .scenario import (
    FireRiskCoupling,
    LinearLagCoupling,
    NetworkSpec,
    ScenarioSpec,
)
from .wsn import Query, SensorNetwork, accrue_idle, apply_query, sample_and_report, sensing_quality


class EventKind(Enum):
    SENSOR_REPORT_ROUND = "sensor-report-round"
    SINK_TO_EG_UPDATE = "sink-to-eg-update"
    EG_UPDATE_ROUND = "eg-update-round"
    EG_TO_EG_UPDATE = "eg-to-eg-update"
    QUERY_DELIVERY = "query-delivery"
    OVERLAY_JOIN = "overlay-join"
    METRICS_SAMPLE = "metrics-sample"


@dataclass(frozen=True)
class Event:
    fire_at: float
    seq: int
    kind: EventKind
    payload: Any


class SchedulingError(RuntimeError):
    """An event was scheduled in the past; that is always a programming bug."""


class EventQueue:
    """Priority queue over (fire_at, seq); seq breaks ties by insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._next_seq = 0
        self.now = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, fire_at: float, kind: EventKind, payload: Any = None) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at {fire_at} before clock {self.now}"
            )
        event = Event(fire_at, self._next_seq, kind, payload)
        self._next_seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.seq, event))
        return event

    def pop(self) -> Event:
        _, _, event = heapq.heappop(self._heap)
        self.now = event.fire_at
        return event

    def peek_time(self) -> float:
        return self._heap[0][0]


@dataclass(frozen=True)
class MetricsRecord:
    t: float
    network_id: str
    level: OperationLevel
    t_alpha_s: float
    n_active: int
    q: float
    energy_cum: float
    queries_sent: int
    updates_rx: int


@dataclass
class RunCounters:
    updates_sent: int = 0
    updates_delivered: int = 0
    updates_suppressed: int = 0


@dataclass
class _NetRuntime:
    spec: NetworkSpec
    net: SensorNetwork
    eg: EnhancedGateway | None
    level: OperationLevel
    epoch: int = 0
    report_times: list[float] = field(default_factory=list)


# payloads ------------------------------------------------------------------


@dataclass(frozen=True)
class _ReportRound:
    network_id: str
    epoch: int


@dataclass(frozen=True)
class _SinkUpdate:
    network_id: str
    value: float


@dataclass(frozen=True)
class _EgRound:
    network_id: str


@dataclass(frozen=True)
class _EgDelivery:
    target_network: str
    sender_id: NodeId
    value: float
    interval_s: float


@dataclass(frozen=True)
class _QueryDelivery:
    network_id: str
    query: Query
    level: OperationLevel


@dataclass(frozen=True)
class _Join:
    network_id: str


def build_trace(spec: ScenarioSpec, seed: int | str) -> EnvironmentTrace:
    """Materialize the ground truth for every category a scenario references."""
    env = spec.environment
    trace = EnvironmentTrace(spec.horizon_s, env.sample_dt_s)
    for category, schedule in env.schedules.items():
        trace.series[category] = sample_schedule(schedule, spec.horizon_s, env.sample_dt_s)
    for coupling in env.couplings:
        if isinstance(coupling, LinearLagCoupling):
            rng = random.Random(f"{seed}/env/{coupling.target.key}")
            trace.series[coupling.target] = derive_lagged_linear(
                env.schedules[coupling.source],
                coupling.spec,
                spec.horizon_s,
                env.sample_dt_s,
                rng,
            )
        elif isinstance(coupling, FireRiskCoupling):
            trace.series[coupling.target] = derive_fire_risk(
                trace.series[coupling.temperature],
                trace.series[coupling.humidity],
                trace.series[coupling.wind],
            )
    trace.criticality.update(env.criticality)
    return trace


class Simulation:
    """One run of a scenario under a mode and control policy."""

    def __init__(
        self,
        scenario: ScenarioSpec,
        seed: int,
        mode: str,
        control: str | OperationLevel = "adaptive",
    ):
        if mode not in ("cooperative", "isolated"):
            raise ValueError(f"mode must be 'cooperative' or 'isolated', got {mode!r}")
        self.scenario = scenario
        self.seed = seed
        self.mode = mode
        self.control = control
        self.adaptive = control == "adaptive"
        if not self.adaptive and not isinstance(control, OperationLevel):
            raise ValueError("control must be 'adaptive' or an OperationLevel")
        self.trace = build_trace(scenario, seed)
        self.rng = random.Random(f"{seed}/sim")
        self.queue = EventQueue()
        self.overlay = OverlayNetwork()
        self.counters = RunCounters()
        self.records: list[MetricsRecord] = []
        self._record_criticality: list[OperationLevel] = []
        self.runtimes: dict[str, _NetRuntime] = {}
        self._node_to_network: dict[NodeId, str] = {}
        self._bootstrap_node: NodeId | None = None
        self._join_index = 0

    # setup ------------------------------------------------------------

    def _initial_level(self, spec: NetworkSpec) -> OperationLevel:
        return spec.initial_level if self.adaptive else self.control

    def _setup(self) -> None:
        self.queue.schedule(0.0, EventKind.METRICS_SAMPLE)
        for spec in self.scenario.networks:
            level = self._initial_level(spec)
            config = level_to_config(spec.level_map, level, spec.n_sensors)
            net = SensorNetwork(
                spec.network_id,
                spec.category,
                spec.center,
                spec.n_sensors,
                spec.noise_stddev,
                spec.energy,
                config,
            )
            self.runtimes[spec.network_id] = _NetRuntime(spec, net, None, level)
            self.queue.schedule(
                config.t_alpha_s,
                EventKind.SENSOR_REPORT_ROUND,
                _ReportRound(spec.network_id, 0),
            )
            if self.adaptive:
                # stagger gateway pushes off the report grid
                self.queue.schedule(
                    spec.eg_update_interval_s / 2.0,
                    EventKind.EG_UPDATE_ROUND,
                    _EgRound(spec.network_id),
                )
        if self.adaptive:
            for network_id in self.scenario.overlay.join_order:
                self.queue.schedule(0.0, EventKind.OVERLAY_JOIN, _Join(network_id))

    # handlers -----------------------------------------------------------

    def _handle_join(self, payload: _Join) -> None:
        runtime = self.runtimes[payload.network_id]
        spec = runtime.spec
        node_id = generate_node_id(self.rng, set(self._node_to_network))
        self._join_index += 1
        address = spec.address or f"10.0.{self._join_index // 256}.{self._join_index % 256}"
        entry = GltEntry(node_id, address, spec.center, spec.category)
        bootstrap = self._bootstrap_node if self._bootstrap_node is not None else node_id
        result = self.overlay.join(entry, bootstrap)
        if not result.accepted:
            raise RuntimeError(f"overlay join failed for {spec.network_id}: {result.reason}")
        if self._bootstrap_node is None:
            self._bootstrap_node = node_id
        self._node_to_network[node_id] = spec.network_id
        eg = EnhancedGateway(
            spec.network_id,
            entry,
            spec.n_sensors,
            spec.policy,
            spec.ruleset,
            spec.level_map,
            runtime.level,
            trust_min=spec.trust_min,
            t_stale_s=spec.t_stale_s,
            update_interval_s=spec.eg_update_interval_s,
        )
        eg.attach(result.glt)
        runtime.eg = eg
        for other in self.runtimes.values():
            if other.eg is not None and other.eg is not eg:
                other.eg.consider_peer(entry)

    def _handle_report_round(self, payload: _ReportRound) -> None:
        runtime = self.runtimes[payload.network_id]
        if payload.epoch != runtime.epoch:
            return  # superseded by a query that rescheduled the cadence
        net = runtime.net
        accrue_idle(net, self.queue.now)
        env_value = self.trace.value(net.category, self.queue.now)
        aggregate = sample_and_report(net, env_value, self.rng, self.queue.now)
        runtime.report_times.append(self.queue.now)
        if runtime.eg is not None:
            self.queue.schedule(
                self.queue.now + self.scenario.delays.sink_to_eg_s,
                EventKind.SINK_TO_EG_UPDATE,
                _SinkUpdate(payload.network_id, aggregate),
            )
        self.queue.schedule(
            self.queue.now + net.config.t_alpha_s,
            EventKind.SENSOR_REPORT_ROUND,
            _ReportRound(payload.network_id, payload.epoch),
        )

    def _handle_sink_update(self, payload: _SinkUpdate) -> None:
        runtime = self.runtimes[payload.network_id]
        if runtime.eg is None:
            return
        query = runtime.eg.process_update(None, payload.value, self.queue.now)
        self._maybe_deliver_query(runtime, query)

    def _handle_eg_round(self, payload: _EgRound) -> None:
        runtime = self.runtimes[payload.network_id]
        eg = runtime.eg
        self.queue.schedule(
            self.queue.now + runtime.spec.eg_update_interval_s,
            EventKind.EG_UPDATE_ROUND,
            payload,
        )
        if eg is None or eg.local_value is None:
            return
        for peer_id in eg.cooperator_ids():
            if self.mode == "isolated":
                self.counters.updates_suppressed += 1
                continue
            target = self._node_to_network.get(peer_id)
            if target is None:
                continue
            self.counters.updates_sent += 1
            self.queue.schedule(
                self.queue.now + self.scenario.delays.eg_to_eg_s,
                EventKind.EG_TO_EG_UPDATE,
                _EgDelivery(target, eg.entry.node_id, eg.local_value, eg.update_interval_s),
            )

    def _handle_eg_delivery(self, payload: _EgDelivery) -> None:
        runtime = self.runtimes[payload.target_network]
        if runtime.eg is None:
            return
        self.counters.updates_delivered += 1
        query = runtime.eg.process_update(
            payload.sender_id, payload.value, self.queue.now, payload.interval_s
        )
        self._maybe_deliver_query(runtime, query)

    def _maybe_deliver_query(self, runtime: _NetRuntime, query: Query | None) -> None:
        if query is None or runtime.eg is None:
            return
        self.queue.schedule(
            self.queue.now + self.scenario.delays.sink_to_eg_s,
            EventKind.QUERY_DELIVERY,
            _QueryDelivery(runtime.spec.network_id, query, runtime.eg.current_level),
        )

    def _handle_query_delivery(self, payload: _QueryDelivery) -> None:
        runtime = self.runtimes[payload.network_id]
        net = runtime.net
        accrue_idle(net, self.queue.now)
        apply_query(net, payload.query)
        runtime.level = payload.level
        runtime.epoch += 1
        self.queue.schedule(
            self.queue.now + net.config.t_alpha_s,
            EventKind.SENSOR_REPORT_ROUND,
            _ReportRound(payload.network_id, runtime.epoch),
        )

    def _handle_metrics_sample(self) -> None:
        now = self.queue.now
        for spec in self.scenario.networks:
            runtime = self.runtimes[spec.network_id]
            net = runtime.net
            accrue_idle(net, now)
            criticality = true_criticality(self.trace, net.category, now)
            target = spec.quality_targets[criticality]
            q = sensing_quality(net.config, target)
            eg = runtime.eg
            self.records.append(
                MetricsRecord(
                    t=now,
                    network_id=spec.network_id,
                    level=runtime.level,
                    t_alpha_s=net.config.t_alpha_s,
                    n_active=net.config.n_active,
                    q=q,
                    energy_cum=net.energy_cum,
                    queries_sent=eg.queries_sent if eg else 0,
                    updates_rx=eg.updates_rx if eg else 0,
                )
            )
            self._record_criticality.append(criticality)
        next_t = now + self.scenario.metrics_interval_s
        if next_t <= self.scenario.horizon_s:
            self.queue.schedule(next_t, EventKind.METRICS_SAMPLE)

    # main loop ----------------------------------------------------------

    def run(self) -> "RunResult":
        self._setup()
        horizon = self.scenario.horizon_s
        while len(self.queue) and self.queue.peek_time() <= horizon:
            event = self.queue.pop()
            kind = event.kind
            if kind is EventKind.SENSOR_REPORT_ROUND:
                self._handle_report_round(event.payload)
            elif kind is EventKind.SINK_TO_EG_UPDATE:
                self._handle_sink_update(event.payload)
            elif kind is EventKind.EG_UPDATE_ROUND:
                self._handle_eg_round(event.payload)
            elif kind is EventKind.EG_TO_EG_UPDATE:
                self._handle_eg_delivery(event.payload)
            elif kind is EventKind.QUERY_DELIVERY:
                self._handle_query_delivery(event.payload)
            elif kind is EventKind.OVERLAY_JOIN:
                self._handle_join(event.payload)
            elif kind is EventKind.METRICS_SAMPLE:
                self._handle_metrics_sample()
        for runtime in self.runtimes.values():
            accrue_idle(runtime.net, horizon)
        return RunResult(
            scenario_name=self.scenario.name,
            seed=self.seed,
            mode=self.mode,
            control=self.control if isinstance(self.control, str) else self.control.label,
            records=self.records,
            record_criticality=self._record_criticality,
            counters=self.counters,
            runtimes=self.runtimes,
            overlay=self.overlay,
            node_to_network=dict(self._node_to_network),
            trace=self.trace,
        )


@dataclass
class RunResult:
    scenario_name: str
    seed: int
    mode: str
    control: str
    records: list[MetricsRecord]
    record_criticality: list[OperationLevel]
    counters: RunCounters
    runtimes: dict[str, _NetRuntime]
    overlay: OverlayNetwork
    node_to_network: dict[NodeId, str]
    trace: EnvironmentTrace

    def network_records(self, network_id: str) -> list[MetricsRecord]:
        return [r for r in self.records if r.network_id == network_id]

    def summary(self) -> dict:
        networks = {}
        for network_id, runtime in self.runtimes.items():
            rows = [
                (record, crit)
                for record, crit in zip(self.records, self.record_criticality)
                if record.network_id == network_id
            ]
            qs = [record.q for record, _ in rows]
            critical_qs = [
                record.q for record, crit in rows if crit is OperationLevel.HIGH
            ]
            eg = runtime.eg
            networks[network_id] = {
                "energy_total": runtime.net.energy_cum,
                "mean_Q": sum(qs) / len(qs) if qs else None,
                "mean_Q_during_critical": (
                    sum(critical_qs) / len(critical_qs) if critical_qs else None
                ),
                "query_count": eg.queries_sent if eg else 0,
                "updates_rx": eg.updates_rx if eg else 0,
                "dropped_updates": eg.dropped_updates if eg else 0,
            }
        return {
            "scenario": self.scenario_name,
            "seed": self.seed,
            "mode": self.mode,
            "control": self.control,
            "networks": networks,
            "totals": {
                "energy_total": sum(r.net.energy_cum for r in self.runtimes.values()),
                "query_count": sum(
                    r.eg.queries_sent if r.eg else 0 for r in self.runtimes.values()
                ),
                "updates_sent": self.counters.updates_sent,
                "updates_delivered": self.counters.updates_delivered,
                "updates_suppressed": self.counters.updates_suppressed,
            },
        }


def run(
    scenario: ScenarioSpec,
    seed: int,
    mode: str,
    control: str | OperationLevel = "adaptive",
) -> RunResult:
    """Execute one deterministic run and return its records and summary."""
    return Simulation(scenario, seed, mode, control).run()


# comparison helpers ---------------------------------------------------------


def criticality_transitions(trace: EnvironmentTrace, category) -> list[tuple[float, OperationLevel]]:
    """Times where the true criticality of a category steps upward."""
    bands = trace.criticality[category]
    series = trace.series[category]
    transitions = []
    previous = bands.level_for(series[0])
    for i in range(1, len(series)):
        level = bands.level_for(series[i])
        if level > previous:
            transitions.append((i * trace.dt_s, level))
        previous = level
    return transitions


def detection_lags(
    records: list[MetricsRecord],
    transitions: list[tuple[float, OperationLevel]],
    horizon_s: float,
) -> list[dict]:
    """Lag of installed level reaching each upward criticality transition.

    Negative lags mean the network anticipated the transition. None means
    the level never reached the transition's criticality in its window.
    """
    out = []
    for i, (t_transition, to_level) in enumerate(transitions):
        window_start = transitions[i - 1][0] if i > 0 else 0.0
        window_end = transitions[i + 1][0] if i + 1 < len(transitions) else horizon_s
        lag = None
        for record in records:
            if window_start <= record.t < window_end and record.level >= to_level:
                lag = record.t - t_transition
                break
        out.append(
            {
                "transition_t": t_transition,
                "to_level": to_level.label,
                "lag_s": lag,
            }
        )
    return out


def compare_runs(
    scenario: ScenarioSpec,
    seed: int,
    baseline_control: str | OperationLevel = "adaptive",
) -> dict:
    """Cooperative run against an isolated baseline, summarized per network."""
    cooperative = run(scenario, seed, "cooperative")
    baseline = run(scenario, seed, "isolated", baseline_control)

    def ratio(a: float | None, b: float | None) -> float | None:
        if a is None or b is None or b == 0:
            return None
        return a / b

    coop_summary = cooperative.summary()["networks"]
    base_summary = baseline.summary()["networks"]
    networks = {}
    for spec in scenario.networks:
        nid = spec.network_id
        transitions = criticality_transitions(cooperative.trace, spec.category)
        networks[nid] = {
            "energy_cooperative": coop_summary[nid]["energy_total"],
            "energy_baseline": base_summary[nid]["energy_total"],
            "energy_ratio": ratio(
                coop_summary[nid]["energy_total"], base_summary[nid]["energy_total"]
            ),
            "mean_Q_cooperative": coop_summary[nid]["mean_Q"],
            "mean_Q_baseline": base_summary[nid]["mean_Q"],
            "mean_Q_ratio": ratio(
                coop_summary[nid]["mean_Q"], base_summary[nid]["mean_Q"]
            ),
            "mean_Q_critical_cooperative": coop_summary[nid]["mean_Q_during_critical"],
            "mean_Q_critical_baseline": base_summary[nid]["mean_Q_during_critical"],
            "mean_Q_critical_ratio": ratio(
                coop_summary[nid]["mean_Q_during_critical"],
                base_summary[nid]["mean_Q_during_critical"],
            ),
            "detection_cooperative": detection_lags(
                cooperative.network_records(nid), transitions, scenario.horizon_s
            ),
            "detection_baseline": detection_lags(
                baseline.network_records(nid), transitions, scenario.horizon_s
            ),
        }
    coop_total = sum(v["energy_total"] for v in coop_summary.values())
    base_total = sum(v["energy_total"] for v in base_summary.values())
    return {
        "scenario": scenario.name,
        "seed": seed,
        "baseline": (
            baseline_control
            if isinstance(baseline_control, str)
            else f"static:{baseline_control.label}"
        ),
        "networks": networks,
        "totals": {
            "energy_cooperative": coop_total,
            "energy_baseline": base_total,
            "energy_ratio": ratio(coop_total, base_total),
        },
    }
