"""Aggregation tables and CSV/SVG emitters"""
from .emit import (
    ChartSpec, Series, bar_chart, cluster_charts, emit_csv, emit_svg, render_svg, roc_chart, survival_chart,
)
from .tables import (
    FrequencyTable, activity_series, frequency_table, latest_snapshots, nearest_rank,
    playtime_percentiles,
)

__all__ = [
    "ChartSpec", "Series", "bar_chart", "cluster_charts", "emit_csv", "emit_svg", "render_svg",
    "roc_chart", "survival_chart",
    "FrequencyTable", "activity_series", "frequency_table", "latest_snapshots", "nearest_rank",
    "playtime_percentiles",
]
