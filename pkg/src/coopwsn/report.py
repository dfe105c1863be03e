"""Figure rendering for finished runs.

Reads the metrics CSV a run produced and draws one timeline figure per
network (operation level, sensing quality, cumulative energy) plus an
optional comparison chart from a compare JSON. Figures land next to the
delimited outputs; nothing here feeds back into simulation.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_LEVEL_ORDER = {"Low": 0, "Moderate": 1, "High": 2}


def load_metrics(path: str | Path) -> dict[str, dict[str, list]]:
    """Metrics CSV parsed into per-network column lists."""
    networks: dict[str, dict[str, list]] = {}
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            columns = networks.setdefault(
                row["network_id"],
                {"t": [], "level": [], "t_alpha_s": [], "n_active": [], "Q": [], "energy_cum": []},
            )
            columns["t"].append(float(row["t"]))
            columns["level"].append(_LEVEL_ORDER[row["level"]])
            columns["t_alpha_s"].append(float(row["t_alpha_s"]))
            columns["n_active"].append(int(row["n_active"]))
            columns["Q"].append(float(row["Q"]))
            columns["energy_cum"].append(float(row["energy_cum"]))
    return networks


def render_timelines(
    metrics_path: str | Path, out_dir: str | Path, formats: tuple[str, ...] = ("png",)
) -> list[Path]:
    """One stacked level/quality/energy figure per network in the CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for network_id, cols in load_metrics(metrics_path).items():
        hours = [t / 3600.0 for t in cols["t"]]
        fig, (ax_level, ax_q, ax_energy) = plt.subplots(
            3, 1, sharex=True, figsize=(8, 6)
        )
        ax_level.step(hours, cols["level"], where="post", color="tab:red")
        ax_level.set_yticks([0, 1, 2], ["Low", "Moderate", "High"])
        ax_level.set_ylabel("level")
        ax_level.set_ylim(-0.3, 2.3)
        ax_q.step(hours, cols["Q"], where="post", color="tab:blue")
        ax_q.set_ylabel("Q")
        ax_q.set_ylim(-0.05, 1.05)
        ax_energy.plot(hours, cols["energy_cum"], color="tab:green")
        ax_energy.set_ylabel("energy")
        ax_energy.set_xlabel("time [h]")
        fig.suptitle(network_id)
        fig.tight_layout()
        for fmt in formats:
            path = out_dir / f"{network_id}_timeline.{fmt}"
            fig.savefig(path)
            written.append(path)
        plt.close(fig)
    return written


def render_comparison(
    compare_path: str | Path, out_dir: str | Path, formats: tuple[str, ...] = ("png",)
) -> list[Path]:
    """Per-network energy and quality ratios from a compare JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.loads(Path(compare_path).read_text())
    names = list(payload["networks"])
    energy = [payload["networks"][n]["energy_ratio"] or 0.0 for n in names]
    quality = [payload["networks"][n]["mean_Q_ratio"] or 0.0 for n in names]
    positions = range(len(names))
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.38
    ax.bar([p - width / 2 for p in positions], energy, width, label="energy coop/base")
    ax.bar([p + width / 2 for p in positions], quality, width, label="mean Q coop/base")
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xticks(list(positions), names, rotation=15)
    ax.set_ylabel("ratio")
    ax.set_title(f"cooperative vs {payload['baseline']}")
    ax.legend()
    fig.tight_layout()
    written = []
    for fmt in formats:
        path = out_dir / f"comparison.{fmt}"
        fig.savefig(path)
        written.append(path)
    plt.close(fig)
    return written
