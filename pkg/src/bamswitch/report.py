"""Report files and comparison tables.

Simulation reports serialize to sorted-key JSON so identical runs produce
byte-identical files.  Comparisons line up one row per run (or one row per
repetition of a single run) over the four headline metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .sim import SimulationReport


class ComparabilityError(ValueError):
    """Reports cannot be compared (different schedules/seeds, or too few)."""


METRIC_COLUMNS = ("preempted", "devolved", "blocked", "unbroken")
COLUMN_TITLES = {"preempted": "Preemption", "devolved": "Devolution",
                 "blocked": "Blocking", "unbroken": "Unbroken"}


def save_report(report: SimulationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_payload(report))


def report_payload(report: SimulationReport) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=1) + "\n"


def load_report(path: str | Path) -> SimulationReport:
    with open(path, "r", encoding="utf-8") as fh:
        return SimulationReport.from_dict(json.load(fh))


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    preempted: int
    devolved: int
    blocked: int
    unbroken: int


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    schedule_hash: str
    seed: int

    def as_dict(self) -> dict:
        return {
            "schedule_hash": self.schedule_hash,
            "seed": self.seed,
            "columns": [COLUMN_TITLES[c] for c in METRIC_COLUMNS],
            "rows": [
                {"label": r.label, **{c: getattr(r, c) for c in METRIC_COLUMNS}}
                for r in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        rows = tuple(
            ComparisonRow(r["label"], r["preempted"], r["devolved"], r["blocked"], r["unbroken"])
            for r in data["rows"]
        )
        return cls(rows, data["schedule_hash"], data["seed"])


def _row_from_totals(label: str, totals: dict) -> ComparisonRow:
    return ComparisonRow(
        label=label,
        preempted=totals["preempted"],
        devolved=totals["devolved"],
        blocked=totals["blocked"],
        unbroken=totals["unbroken"],
    )


def compare_reports(reports: list[SimulationReport]) -> ComparisonReport:
    """One row per run; runs must share the same arrival stream."""
    if len(reports) < 2:
        raise ComparabilityError("comparison needs at least two reports")
    reference = reports[0]
    for other in reports[1:]:
        if other.schedule_hash != reference.schedule_hash:
            raise ComparabilityError(
                f"schedule mismatch: {other.label!r} ({other.schedule_hash}) vs "
                f"{reference.label!r} ({reference.schedule_hash})"
            )
    rows = tuple(_row_from_totals(r.label, r.totals) for r in reports)
    return ComparisonReport(rows, reference.schedule_hash, reference.seed)


def split_by_repetition(report: SimulationReport) -> ComparisonReport:
    """One row per schedule repetition of a single run (learning view)."""
    reps = report.repetitions
    sums = [{c: 0 for c in METRIC_COLUMNS} for _ in range(reps)]
    for window in report.windows:
        rep = window["repetition"]
        for column in METRIC_COLUMNS:
            sums[rep][column] += window[column]
    rows = tuple(
        ComparisonRow(f"{report.label} {k + 1}/{reps}", s["preempted"], s["devolved"],
                      s["blocked"], s["unbroken"])
        for k, s in enumerate(sums)
    )
    return ComparisonReport(rows, report.schedule_hash, report.seed)


def repetition_timeline(report: SimulationReport, repetition: int) -> list[tuple[float, str]]:
    """The applied-model timeline of one repetition, in repetition-relative time.

    The first entry is the model active when the repetition starts, so two
    repetitions compare equal exactly when the link behaves identically.
    """
    start = repetition * report.repetition_seconds
    end = start + report.repetition_seconds
    current = report.initial_model
    inside: list[tuple[float, str]] = []
    for t, model in report.timeline:
        if t <= start:
            current = model
        elif t < end:
            inside.append((t - start, model))
    return [(0.0, current)] + inside


def retained_in_repetition(report: SimulationReport, repetition: int) -> int:
    return report.cbr["retained_by_repetition"][repetition]


def render_human(comparison: ComparisonReport) -> str:
    titles = ["Run"] + [COLUMN_TITLES[c] for c in METRIC_COLUMNS]
    rows = [
        [r.label] + [str(getattr(r, c)) for c in METRIC_COLUMNS]
        for r in comparison.rows
    ]
    widths = [max(len(row[i]) for row in [titles] + rows) for i in range(len(titles))]
    lines = [
        "  ".join(title.ljust(widths[i]) for i, title in enumerate(titles)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    lines.append(f"(seed {comparison.seed}, schedule {comparison.schedule_hash})")
    return "\n".join(lines)


def render_machine(comparison: ComparisonReport) -> str:
    return json.dumps(comparison.as_dict(), sort_keys=True, indent=1) + "\n"
