"""Figure rendering: one line per algorithm with a +/- 1 std band."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .aggregate import AggregateRow, aggregate, load_rows

__all__ = ["PlotSpec", "render", "build_figure"]

_Y_LABELS = {
    "failures": "failed estimates per repeat",
    "timing": "wall-clock seconds per repeat",
    "moments": "estimate",
}

# Stable styling for the three stock algorithms; anything else cycles.
_ALGO_STYLES = {
    "hutch_pp": ("tab:blue", "*"),
    "na_hutch_pp": ("tab:orange", "^"),
    "hutchinson": ("tab:green", "o"),
}
_FALLBACK_COLORS = ("tab:red", "tab:purple", "tab:brown", "tab:pink", "tab:gray")


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    kind: str
    out_path: Optional[str]
    trials_per_repeat: int = 100
    group_by: tuple = ("dataset", "algorithm")


def build_figure(aggregates: list[AggregateRow], kind: str) -> Figure:
    fig = Figure(figsize=(7.0, 4.5), dpi=150)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)

    datasets = sorted({row.dataset for row in aggregates})
    series: dict[tuple[str, str], list[AggregateRow]] = {}
    for row in aggregates:
        series.setdefault((row.dataset, row.algorithm), []).append(row)

    fallback = 0
    for (dataset, algorithm) in sorted(series):
        points = sorted(series[(dataset, algorithm)], key=lambda r: r.m)
        xs = [p.m for p in points]
        means = [p.mean for p in points]
        lo = [p.mean - p.std for p in points]
        hi = [p.mean + p.std for p in points]
        if algorithm in _ALGO_STYLES:
            color, marker = _ALGO_STYLES[algorithm]
        else:
            color = _FALLBACK_COLORS[fallback % len(_FALLBACK_COLORS)]
            marker = "s"
            fallback += 1
        label = algorithm if len(datasets) == 1 else f"{dataset}: {algorithm}"
        ax.plot(xs, means, marker=marker, color=color, label=label)
        ax.fill_between(xs, lo, hi, color=color, alpha=0.2, linewidth=0)

    ax.set_xlabel("matrix-vector queries m")
    ax.set_ylabel(_Y_LABELS[kind])
    if len(datasets) == 1:
        ax.set_title(datasets[0])
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> tuple[Figure, list[AggregateRow]]:
    """Aggregate the CSV, draw the figure, and save it if an output is set.

    Output is deterministic for fixed input: the aggregation is pure and the
    PNG writer embeds no timestamps.
    """
    rows = load_rows(spec.csv_path)
    aggregates = aggregate(rows, spec.kind, spec.trials_per_repeat)
    fig = build_figure(aggregates, spec.kind)
    if spec.out_path:
        fig.savefig(spec.out_path)
    return fig, aggregates
