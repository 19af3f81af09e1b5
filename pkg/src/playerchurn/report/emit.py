"""CSV and SVG writers shared by every subcommand"""
import csv
import io
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Union

import matplotlib
from matplotlib.figure import Figure
import numpy as np
import pandas as pd

from ..schemas import SvgSettings

CHART_KINDS = ("bar", "step", "line", "scatter")
DPI = 100

# Fixed salt and no Date metadata: identical specs give identical bytes
SVG_RC = {"svg.hashsalt": "playerchurn", "svg.fonttype": "none"}


def _as_frame(table: Any, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    if isinstance(table, pd.DataFrame):
        return table
    if hasattr(table, "to_frame"):
        return table.to_frame()
    rows = list(table)
    if not rows:
        return pd.DataFrame(columns=list(columns or []))
    return pd.DataFrame(rows, columns=list(columns) if columns else None)


def emit_csv(table: Any, path: Union[str, Path], columns: Optional[Sequence[str]] = None) -> Path:
    """Header plus rows, minimal RFC 4180 quoting, '\\n' line endings"""
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    frame = _as_frame(table, columns)
    frame.to_csv(path, index=False, quoting=csv.QUOTE_MINIMAL, lineterminator="\n",
                 float_format="%.10g")
    return path


@dataclass
class Series:
    name: str
    x: Sequence[float]
    y: Sequence[float]
    # Step charts: the last level extends to x_end
    x_end: Optional[float] = None


@dataclass
class ChartSpec:
    kind: str
    title: str = ""
    x_label: str = ""
    y_label: str = ""
    series: List[Series] = field(default_factory=list)
    # Bar charts: one bar per category
    categories: List[str] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    y_min: Optional[float] = None
    y_max: Optional[float] = None


def _figure(settings: SvgSettings, panels: int = 1) -> Tuple[Figure, List[Any]]:
    # Panels sit side by side, each settings.width wide
    width = settings.width * panels
    fig = Figure(figsize=(width / DPI, settings.height / DPI), dpi=DPI)
    axes = [fig.add_subplot(1, panels, p + 1) for p in range(panels)]
    mx = min(settings.margin / width, 0.45)
    my = min(settings.margin / settings.height, 0.45)
    fig.subplots_adjust(left=mx, right=1 - mx, bottom=my, top=1 - my, wspace=0.3)
    return fig, axes


def _draw_series(ax, spec: ChartSpec, prefix: str = ""):
    for i, series in enumerate(spec.series):
        x = np.asarray(series.x, dtype=np.float64)
        y = np.asarray(series.y, dtype=np.float64)
        if spec.kind == "step":
            if series.x_end is not None and y.size:
                x, y = np.r_[x, float(series.x_end)], np.r_[y, y[-1]]
            artist, = ax.step(x, y, where="post", label=series.name)
        elif spec.kind == "line":
            artist, = ax.plot(x, y, label=series.name)
        else:
            artist = ax.scatter(x, y, s=6, label=series.name)
        artist.set_gid(f"{prefix}series-{i}")
    if len(spec.series) > 1:
        ax.legend(loc="best", fontsize=8)


def _draw_bars(ax, spec: ChartSpec, prefix: str = ""):
    positions = np.arange(len(spec.values))
    bars = ax.bar(positions, [float(v) for v in spec.values], width=0.8)
    for i, bar in enumerate(bars):
        bar.set_gid(f"{prefix}bar-{i}")
    ax.set_xticks(positions)
    ax.set_xticklabels([str(c) for c in spec.categories], rotation=45, ha="right", fontsize=8)


def _draw(ax, spec: ChartSpec, prefix: str = ""):
    if spec.kind not in CHART_KINDS:
        raise ValueError(f"unknown chart kind '{spec.kind}' (known: {list(CHART_KINDS)})")
    if spec.kind == "bar":
        _draw_bars(ax, spec, prefix)
    else:
        _draw_series(ax, spec, prefix)
    if spec.y_min is not None or spec.y_max is not None:
        ax.set_ylim(bottom=spec.y_min, top=spec.y_max)
    ax.set_title(spec.title)
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.grid(color="grey", linestyle="--", linewidth=0.5)


def render_svg(spec: Union[ChartSpec, Sequence[ChartSpec]], settings: Optional[SvgSettings] = None) -> str:
    """
    One chart, or a row of panels when given a sequence of specs. Panel
    artists get a "panel-<p>-" prefix on their gid so ids stay unique.
    """
    specs = [spec] if isinstance(spec, ChartSpec) else list(spec)
    if not specs:
        raise ValueError("nothing to render")
    settings = settings or SvgSettings()

    with matplotlib.rc_context(SVG_RC):
        fig, axes = _figure(settings, panels=len(specs))
        for p, (ax, panel) in enumerate(zip(axes, specs)):
            _draw(ax, panel, prefix="" if len(specs) == 1 else f"panel-{p}-")

        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def emit_svg(spec: Union[ChartSpec, Sequence[ChartSpec]], path: Union[str, Path],
             settings: Optional[SvgSettings] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_svg(spec, settings))
    return path


def survival_chart(curves: Sequence[Tuple[str, Any]], title: str = "Kaplan-Meier survival") -> ChartSpec:
    """Step chart of (name, SurvivalCurve) pairs; each curve runs to its max follow-up"""
    series = []
    for name, curve in curves:
        frame = curve.to_frame()
        series.append(Series(name=name, x=frame["time_days"].tolist(), y=frame["survival"].tolist(),
                             x_end=curve.max_follow_up))
    return ChartSpec(kind="step", title=title, x_label="days", y_label="survival probability",
                     series=series, y_min=0.0, y_max=1.0)


def roc_chart(curves: Sequence[Tuple[str, Any]], title: str = "ROC") -> ChartSpec:
    series = [Series(name=f"{name} (AUC {roc.auc:.3f})", x=np.asarray(roc.fpr).tolist(),
                     y=np.asarray(roc.tpr).tolist()) for name, roc in curves]
    return ChartSpec(kind="line", title=title, x_label="false positive rate",
                     y_label="true positive rate", series=series, y_min=0.0, y_max=1.0)


def bar_chart(table: pd.DataFrame, category: str, value: str, title: str = "") -> ChartSpec:
    return ChartSpec(kind="bar", title=title, x_label=category, y_label=value,
                     categories=[str(c) for c in table[category]],
                     values=[float(v) for v in table[value]])


def cluster_charts(points, labels, title: str = "Clusters") -> List[ChartSpec]:
    """
    Scatter of projected rows coloured by label, one panel per pair of
    components: a single panel for two components, three for three.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if points.ndim != 2 or points.shape[1] < 2:
        raise ValueError("cluster charts need at least 2 components")
    if points.shape[0] != labels.shape[0]:
        raise ValueError(f"{points.shape[0]} points but {labels.shape[0]} labels")

    charts = []
    for i, j in itertools.combinations(range(points.shape[1]), 2):
        series = [Series(name=name, x=points[mask, i].tolist(), y=points[mask, j].tolist())
                  for name, mask in (("stayed", ~labels), ("churned", labels))]
        charts.append(ChartSpec(kind="scatter", title=f"{title}: PC{i + 1} vs PC{j + 1}",
                                x_label=f"PC{i + 1}", y_label=f"PC{j + 1}", series=series))
    return charts
