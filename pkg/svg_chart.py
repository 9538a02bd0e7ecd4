#!/usr/bin/env python3
"""
Eval-curve line charts rendered with matplotlib
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

Series = Dict[str, Sequence[Tuple[float, float]]]


def _figure(series: Series, title: str, x_label: str, y_label: str,
            figsize: Tuple[float, float]):
    if not any(len(points) for points in series.values()):
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=figsize)
    for i, (name, points) in enumerate(series.items()):
        xs = [float(x) for x, _ in points]
        ys = [float(y) for _, y in points]
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=2, label=name, gid=f"series-{i}")
    ax.set_title(title)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def render_line_chart(series: Series, title: str = "", x_label: str = "epoch",
                      y_label: str = "", figsize: Tuple[float, float] = (8, 5)) -> str:
    """
    Render named (x, y) series as an SVG document

    Args:
        series: name -> points, drawn in insertion order
        title: chart title
        x_label: x axis label
        y_label: y axis label

    Returns:
        SVG text
    """
    fig = _figure(series, title, x_label, y_label, figsize)
    buffer = io.StringIO()
    with plt.rc_context({"svg.fonttype": "none", "svg.hashsalt": "ordinal-feedback"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def write_line_chart(path: Union[str, Path], series: Series, **kwargs) -> Path:
    """Write the chart to path; the suffix picks the format (.svg, .png, .pdf)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".svg":
        path.write_text(render_line_chart(series, **kwargs))
        return path
    fig = _figure(series, kwargs.get("title", ""), kwargs.get("x_label", "epoch"),
                  kwargs.get("y_label", ""), kwargs.get("figsize", (8, 5)))
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path
