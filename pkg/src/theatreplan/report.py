"""Delimited reports and the figures rendered alongside them.

Every CLI path that emits tabular KPI output can also render the
matching matplotlib figure next to the file: Gantt boards per room,
buffer-policy KPI curves, GA convergence and operator-probability
bars.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Patch

from .analysis import BufferOutcome
from .core import Instance, Schedule
from .money import money_str

KPI_COLUMNS = (
    "instance",
    "kind",
    "method",
    "status",
    "total",
    "postponement",
    "or_opening",
    "overtime",
    "delta_pct",
)


def write_kpi_csv(rows: Sequence[dict], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=KPI_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def kpi_summary_line(method: str, schedule: Schedule) -> str:
    b = schedule.cost_breakdown
    return (
        f"{method}: total={money_str(b.total)} postponement={money_str(b.postponement)} "
        f"or_opening={money_str(b.or_opening)} overtime={money_str(b.overtime)} "
        f"postponed={len(schedule.postponed)} rooms={sum(schedule.rooms_open.values())}"
    )


def plot_gantt(schedule: Schedule, instance: Instance, path) -> None:
    """Rooms-by-day lanes; the overtime region is shaded."""
    days = instance.num_days
    fig_height = max(2.0, 0.6 * sum(max(schedule.rooms_open.get(d, 0), 1) for d in range(1, days + 1)))
    fig, axes = plt.subplots(
        days, 1, figsize=(10, fig_height), squeeze=False, sharex=True
    )
    minute = instance.slot_minutes
    t1 = instance.regular_slots * minute
    t_end = instance.total_slots * minute
    cmap = plt.get_cmap("tab20")
    for d in range(1, days + 1):
        ax = axes[d - 1][0]
        rooms = max(schedule.rooms_open.get(d, 0), 1)
        ax.axvspan(t1, t_end, color="0.92")
        for sid, a in sorted(schedule.assignments.items()):
            if a.day != d:
                continue
            s = instance.surgery(sid)
            room = a.room or 1
            ax.barh(
                room,
                s.duration * minute,
                left=a.start * minute,
                height=0.8,
                color=cmap(s.surgeon % 20),
                edgecolor="black",
                linewidth=0.5,
            )
            ax.text(
                (a.start + s.duration / 2) * minute,
                room,
                str(sid),
                ha="center",
                va="center",
                fontsize=7,
            )
        ax.set_ylabel(f"day {d}")
        ax.set_ylim(0.4, rooms + 0.6)
        ax.set_yticks(range(1, rooms + 1))
        ax.invert_yaxis()
    axes[-1][0].set_xlabel("minutes (shaded region is overtime)")
    surgeons = sorted({s.surgeon for s in instance.surgeries})
    fig.legend(
        handles=[Patch(color=cmap(l % 20), label=f"surgeon {l}") for l in surgeons],
        loc="upper right",
        fontsize=7,
    )
    fig.suptitle("surgery schedule")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_buffer_curves(outcomes: Sequence[BufferOutcome], path) -> None:
    buffers = [o.buffer_minutes for o in outcomes]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    series = [
        ("total", "total cost"),
        ("or_opening", "OR opening cost"),
        ("postponement", "postponement cost"),
        ("overtime", "realized overtime cost"),
    ]
    for ax, (attr, title) in zip(axes.flat, series):
        ax.plot(buffers, [float(getattr(o.kpi, attr)) for o in outcomes], marker="o")
        ax.set_title(title, fontsize=9)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("buffer (minutes)")
    fig.suptitle("buffer policy impact")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(generation_records: Sequence[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    for phase in (1, 2):
        recs = [r for r in generation_records if r["phase"] == phase]
        if not recs:
            continue
        xs = list(range(len(recs)))
        offset = 0 if phase == 1 else len(
            [r for r in generation_records if r["phase"] == 1]
        )
        ax.plot(
            [x + offset for x in xs],
            [r["best"] for r in recs],
            label=f"phase {phase} best",
        )
        ax.plot(
            [x + offset for x in xs],
            [r["mean"] for r in recs],
            linestyle=":",
            label=f"phase {phase} mean",
        )
    ax.set_xlabel("generation")
    ax.set_ylabel("objective")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_operator_stats(nmcb: dict[str, dict[str, float]], path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, cat in zip(axes, ("crossover", "mutation")):
        values = nmcb.get(cat, {})
        ops = list(values)
        ax.bar(ops, [values[o] for o in ops], color="steelblue")
        ax.set_title(f"{cat} operator selection probability", fontsize=9)
        ax.set_ylim(bottom=min(0, *values.values()) if values else 0)
        ax.tick_params(axis="x", rotation=20, labelsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
