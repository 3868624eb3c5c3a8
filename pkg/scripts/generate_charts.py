"""Generate interactive Plotly charts from a run directory.

A run directory holds the CSV tables, ``plots.json`` (one entry per chart:
csv file, x, y, group, labels) and ``manifest.json`` written by the CLI.
Builders return HTML fragments that the report template embeds.
"""
import html
import sys
from pathlib import Path

import pandas as pd
import plotly.graph_objects as go

sys.path.insert(0, str(Path(__file__).parent.parent))
from config.settings import FAMILY_COLORS, load_run_file
from scripts.dsp import PulseShaper

PLOTS_FILE = "plots.json"


def load_plot_specs(run_dir: Path) -> list[dict]:
    """Chart descriptions recorded for a run; empty when the run made none."""
    return load_run_file(run_dir, PLOTS_FILE) or []


def build_line_chart(frame: pd.DataFrame, spec: dict) -> str:
    """One trace per group value, in table order."""
    data = frame.dropna(subset=[spec["x"], spec["y"]])
    if data.empty:
        return "<p>No finite values to plot.</p>"

    fig = go.Figure()
    for label, group in data.groupby(spec["group"], sort=False):
        group = group.sort_values(spec["x"])
        name = str(label)
        line = dict(width=2)
        if name.startswith("Gaussian"):
            line.update(color=FAMILY_COLORS["gaussian"], dash="dash")
        fig.add_trace(go.Scatter(
            x=group[spec["x"]],
            y=group[spec["y"]],
            mode="lines+markers" if spec.get("markers") else "lines",
            name=name,
            line=line,
            hovertemplate=f"{html.escape(name)}<br>{spec['xlabel']}: %{{x:.3g}}<br>{spec['ylabel']}: %{{y:.4g}}<extra></extra>",
        ))

    fig.update_layout(
        title=dict(text=spec["title"], font=dict(size=18)),
        xaxis_title=spec["xlabel"],
        yaxis_title=spec["ylabel"],
        yaxis_type="log" if spec.get("logy") else "linear",
        template="plotly_white",
        hovermode="closest",
        legend=dict(orientation="v", font=dict(size=11)),
        margin=dict(l=60, r=30, t=70, b=60),
        height=480,
        autosize=True,
    )

    return fig.to_html(
        full_html=False,
        include_plotlyjs=False,
        config={"responsive": True, "displayModeBar": False},
        default_width="100%",
    )


def _summary_rows(summary: dict, prefix: str = ""):
    for key, value in summary.items():
        name = f"{prefix}{key}"
        if key == "shaper" and isinstance(value, dict):
            yield name, PulseShaper(**value).label
        elif isinstance(value, dict):
            yield from _summary_rows(value, f"{name}.")
        else:
            yield name, value


def build_summary_table(summary: dict) -> str:
    """Key/value HTML table of a run summary; nested objects become dotted keys."""
    if not summary:
        return ""
    rows = ""
    for key, value in _summary_rows(summary):
        if isinstance(value, float):
            value = f"{value:.4g}"
        rows += f"<tr><td>{html.escape(str(key))}</td><td>{html.escape(str(value))}</td></tr>\n"
    return f'<div class="table-scroll"><table><tr><th>Quantity</th><th>Value</th></tr>\n{rows}</table></div>\n'


def build_charts(run_dir: Path) -> dict[str, str]:
    charts = {}
    for spec in load_plot_specs(run_dir):
        path = run_dir / spec["csv"]
        if not path.exists():
            print(f"  WARNING: {spec['csv']} missing, chart {spec['name']} skipped")
            continue
        charts[spec["name"]] = build_line_chart(pd.read_csv(path), spec)
    return charts

