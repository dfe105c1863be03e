"""Metrics and table emission: CSV streams, summary JSON, membership dumps.

All file writes are whole-file atomic (write to a sibling temp file, then
rename), so a crashed run never leaves a truncated output behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from .engine import MetricsRecord, RunResult
from .geo import format_dms

METRICS_HEADER = "t,network_id,level,t_alpha_s,n_active,Q,energy_cum,queries_sent,updates_rx"


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def metrics_csv_text(records: list[MetricsRecord]) -> str:
    lines = [METRICS_HEADER]
    for r in records:
        lines.append(
            ",".join(
                (
                    _fmt(r.t),
                    r.network_id,
                    r.level.label,
                    _fmt(r.t_alpha_s),
                    str(r.n_active),
                    _fmt(r.q),
                    _fmt(r.energy_cum),
                    str(r.queries_sent),
                    str(r.updates_rx),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_metrics_csv(path: str | Path, records: list[MetricsRecord]) -> None:
    atomic_write_text(path, metrics_csv_text(records))


def write_json(path: str | Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def glt_csv_text(result: RunResult) -> str:
    """GLT dump, one row per member: node, address, id, DMS position, category."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["node", "ip_address", "node_id", "coordinate", "network_category"])
    if result.node_to_network:
        any_member = sorted(result.node_to_network)[0]
        for entry in result.overlay.replica(any_member).entries():
            writer.writerow(
                [
                    result.node_to_network.get(entry.node_id, str(entry.node_id)),
                    entry.address,
                    str(entry.node_id),
                    format_dms(entry.center),
                    str(entry.category),
                ]
            )
    return buffer.getvalue()


def write_glt_csv(path: str | Path, result: RunResult) -> None:
    atomic_write_text(path, glt_csv_text(result))


def cnt_csv_text(result: RunResult, network_id: str) -> str:
    """One gateway's cooperation table: trust, interval, last value, timestamp."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["node", "trust_value", "time_interval_s", "latest_value", "timestamp"])
    eg = result.runtimes[network_id].eg
    if eg is not None:
        for node_id in eg.cooperator_ids():
            entry = eg.cnt[node_id]
            writer.writerow(
                [
                    result.node_to_network.get(node_id, str(node_id)),
                    _fmt(entry.trust),
                    "" if entry.update_interval_s is None else _fmt(entry.update_interval_s),
                    "" if entry.latest_value is None else _fmt(entry.latest_value),
                    "" if entry.last_update_time is None else _fmt(entry.last_update_time),
                ]
            )
    return buffer.getvalue()


def write_cnt_csvs(directory: str | Path, result: RunResult) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for network_id in result.runtimes:
        path = directory / f"{network_id}_cnt.csv"
        atomic_write_text(path, cnt_csv_text(result, network_id))
        written.append(path)
    return written
