"""Line-delimited trace/report serialization and figure rendering.

Traces and evaluation reports are written as JSON lines so they can be
tailed, diffed, and re-plotted.  Figures (cost convergence, per-source
scores) render to files through the Agg backend; nothing here opens a
window.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import EvalReport  # noqa: E402
from .separation import TraceRecord  # noqa: E402

__all__ = [
    "trace_to_lines",
    "write_trace",
    "read_trace",
    "report_to_lines",
    "write_report",
    "render_trace_figure",
    "render_eval_figure",
]


def trace_to_lines(trace: list[TraceRecord]) -> list[str]:
    return [
        json.dumps(
            {"round": r.round, "sweep": r.sweep, "cost": r.cost, "wall_ms": r.wall_ms}
        )
        for r in trace
    ]


def write_trace(path, trace: list[TraceRecord]) -> None:
    Path(path).write_text("".join(line + "\n" for line in trace_to_lines(trace)))


def read_trace(path) -> list[TraceRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        records.append(
            TraceRecord(
                round=int(doc["round"]),
                sweep=int(doc["sweep"]),
                cost=float(doc["cost"]),
                wall_ms=float(doc["wall_ms"]),
            )
        )
    return records


def report_to_lines(report: EvalReport) -> list[str]:
    """One line per source plus a summary line, in assignment order."""
    lines = []
    for n in range(len(report.si_sdr)):
        lines.append(
            json.dumps(
                {
                    "source": n,
                    "estimate": report.permutation[n],
                    "si_sdr": report.si_sdr[n],
                    "baseline": report.baseline[n],
                    "improvement": report.improvement[n],
                }
            )
        )
    lines.append(
        json.dumps(
            {
                "summary": True,
                "mean_si_sdr": report.mean_si_sdr,
                "mean_improvement": report.mean_improvement,
                "wall_ms": report.wall_ms,
            }
        )
    )
    return lines


def write_report(path, report: EvalReport) -> None:
    Path(path).write_text("".join(line + "\n" for line in report_to_lines(report)))


def render_trace_figure(trace: list[TraceRecord], path) -> None:
    """Cost after each spatial sweep, with round boundaries marked."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    costs = [r.cost for r in trace]
    ax.plot(range(1, len(costs) + 1), costs, marker=".", lw=1.0)
    previous_round = None
    for k, record in enumerate(trace):
        if previous_round is not None and record.round != previous_round:
            ax.axvline(k + 0.5, color="0.8", lw=0.8, zorder=0)
        previous_round = record.round
    ax.set_xlabel("spatial sweep")
    ax.set_ylabel("cost")
    ax.set_title("separation cost per sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_eval_figure(report: EvalReport, path) -> None:
    """Per-source SI-SDR and improvement as grouped bars."""
    n = len(report.si_sdr)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positions = range(n)
    ax.bar([p - 0.2 for p in positions], report.si_sdr, width=0.4, label="SI-SDR")
    ax.bar(
        [p + 0.2 for p in positions],
        report.improvement,
        width=0.4,
        label="improvement",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels([f"source {p + 1}" for p in positions])
    ax.set_ylabel("dB")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
