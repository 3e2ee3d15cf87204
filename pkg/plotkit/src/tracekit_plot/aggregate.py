"""CSV loading and the aggregation behind every figure.

The input schema is the benchmark CSV: one row per trial with columns
``dataset,algorithm,m,epsilon,estimate,reference_trace,failed,wall_time,
seed,trial_index`` (wall_time may be absent when timing was suppressed).
Rows are grouped into repeats of ``trials_per_repeat`` trials; each figure
kind reduces a repeat to one number and plots its mean with a +/- 1
standard deviation band across repeats.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

__all__ = ["KINDS", "SchemaError", "AggregateRow", "load_rows", "aggregate", "summary_table"]

KINDS = ("failures", "timing", "moments")

_REQUIRED_COLUMNS = {
    "failures": ("dataset", "algorithm", "m", "failed", "trial_index"),
    "timing": ("dataset", "algorithm", "m", "wall_time", "trial_index"),
    "moments": ("dataset", "algorithm", "m", "estimate", "trial_index"),
}


class SchemaError(ValueError):
    """The CSV is empty or lacks a column the figure kind needs."""


@dataclass(frozen=True)
class AggregateRow:
    dataset: str
    algorithm: str
    m: int
    mean: float
    std: float
    repeats: int


def load_rows(csv_path) -> list[dict]:
    with open(csv_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{csv_path}: empty CSV, nothing to plot")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{csv_path}: CSV has a header but no data rows")
    return rows


def check_schema(rows: list[dict], kind: str) -> None:
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; expected one of {KINDS}")
    present = rows[0].keys()
    missing = [c for c in _REQUIRED_COLUMNS[kind] if c not in present]
    if missing:
        raise SchemaError(
            f"CSV is missing column(s) {', '.join(missing)} required by the {kind} figure"
        )


def _repeat_metric(kind: str, repeat_rows: list[dict]) -> float:
    if kind == "failures":
        return float(sum(1 for r in repeat_rows if r["failed"] == "True"))
    if kind == "timing":
        return sum(float(r["wall_time"]) for r in repeat_rows)
    return sum(float(r["estimate"]) for r in repeat_rows) / len(repeat_rows)


def aggregate(rows: list[dict], kind: str, trials_per_repeat: int = 100) -> list[AggregateRow]:
    """Mean and sample standard deviation of the per-repeat metric per cell."""
    check_schema(rows, kind)
    if trials_per_repeat < 1:
        raise SchemaError(f"trials_per_repeat must be >= 1, got {trials_per_repeat}")
    cells: dict[tuple[str, str, int], dict[int, list[dict]]] = {}
    for row in rows:
        key = (row["dataset"], row["algorithm"], int(row["m"]))
        repeat = int(row["trial_index"]) // trials_per_repeat
        cells.setdefault(key, {}).setdefault(repeat, []).append(row)
    out = []
    for (dataset, algorithm, m) in sorted(cells):
        repeats = cells[(dataset, algorithm, m)]
        metrics = [_repeat_metric(kind, repeats[rep]) for rep in sorted(repeats)]
        mean = sum(metrics) / len(metrics)
        if len(metrics) > 1:
            var = sum((v - mean) ** 2 for v in metrics) / (len(metrics) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0
        out.append(
            AggregateRow(
                dataset=dataset,
                algorithm=algorithm,
                m=m,
                mean=mean,
                std=std,
                repeats=len(metrics),
            )
        )
    return out


def summary_table(aggregates: list[AggregateRow]) -> str:
    """The exact table a figure plots, as tab-separated text."""
    lines = ["dataset\talgorithm\tm\tmean\tstd\trepeats"]
    for row in aggregates:
        lines.append(
            f"{row.dataset}\t{row.algorithm}\t{row.m}\t{row.mean!r}\t{row.std!r}\t{row.repeats}"
        )
    return "\n".join(lines)
