"""Static SVG plots of result tables (matplotlib, reproducible bytes)."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from config.settings import FAMILY_COLORS  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pcsim"
plt.rcParams["svg.fonttype"] = "none"


def _color(label) -> str | None:
    # reference curves get the fixed reference color, the rest follow the cycle
    if str(label).startswith("Gaussian"):
        return FAMILY_COLORS["gaussian"]
    return None


def render_svg(frame: pd.DataFrame, spec, path: Path) -> Path:
    """Draw ``spec.y`` against ``spec.x``, one line per value of ``spec.group``."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    data = frame.dropna(subset=[spec.x, spec.y])
    for label, group in data.groupby(spec.group, sort=False):
        group = group.sort_values(spec.x)
        ax.plot(
            group[spec.x],
            group[spec.y],
            marker="o" if spec.markers else None,
            markersize=3,
            linewidth=1.4,
            label=str(label),
            color=_color(label),
        )
    if spec.logy:
        ax.set_yscale("log")
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.grid(True, which="both", alpha=0.3)
    if data[spec.group].nunique() > 1:
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
