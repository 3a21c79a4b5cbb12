"""Report-path figures: margin overviews, decay traces, quantile maps.

matplotlib is imported lazily (Agg backend, no display server) so the
library core stays importable without it and batch runs can switch figures
off entirely. Figures are a convenience render of the same numbers the CSV
carries; the delimited outputs remain the ground truth for byte-level
comparison.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

STYLE: dict[str, Any] = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 130,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "legend.framealpha": 0.85,
    "lines.linewidth": 1.4,
    "font.size": 9,
}

PASS_COLOR = "#2a7d4f"
FAIL_COLOR = "#b03a2e"
VACUOUS_COLOR = "#8a8a8a"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def margins_figure(records: Sequence[Mapping[str, Any]], suite: str, path: str | Path) -> Path:
    """Horizontal bar chart of signed margins for one suite, one bar per
    report, colored by verdict. Symmetric log scale keeps tiny and huge
    margins on one axis."""
    plt = _pyplot()
    rows = [r for r in records if r["suite"] == suite]
    rows = sorted(rows, key=lambda r: (r["id"], r["context"]))
    labels = [f'{r["id"]} | {r["context"]}' for r in rows]
    margins = [0.0 if r["margin"] != r["margin"] else float(r["margin"]) for r in rows]
    colors = [
        VACUOUS_COLOR if r["verdict"] == "vacuous"
        else (PASS_COLOR if r["verdict"] == "pass" else FAIL_COLOR)
        for r in rows
    ]
    height = max(2.0, 0.22 * len(rows) + 0.8)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8.0, height))
        y = np.arange(len(rows))
        ax.barh(y, margins, color=colors, height=0.7)
        ax.set_yticks(y, labels=labels, fontsize=6)
        ax.invert_yaxis()
        ax.axvline(0.0, color="black", linewidth=0.8)
        ax.set_xscale("symlog", linthresh=1e-6)
        ax.set_xlabel("margin (rhs - lhs)")
        ax.set_title(f"suite {suite}: report margins")
        out = Path(path)
        fig.savefig(out)
        plt.close(fig)
    return out


def decay_figure(
    times: np.ndarray,
    observed: Mapping[str, np.ndarray],
    bounds: Mapping[str, np.ndarray],
    path: str | Path,
    title: str,
) -> Path:
    """Semilog overlay of observed decay curves against their exponential
    bounds; every observed curve should sit on or below its bound."""
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, series in sorted(observed.items()):
            ax.semilogy(times, np.maximum(series, 1e-300), marker="o", label=name)
        for name, series in sorted(bounds.items()):
            ax.semilogy(times, np.maximum(series, 1e-300), linestyle="--", label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("value")
        ax.set_title(title)
        ax.legend(loc="best")
        out = Path(path)
        fig.savefig(out)
        plt.close(fig)
    return out


def quantile_map_figure(
    map_source: np.ndarray, map_target: np.ndarray, path: str | Path, title: str
) -> Path:
    """The two inverse CDFs over the quadrature grid plus their gap; the
    squared distance is the mean of the squared gap."""
    plt = _pyplot()
    u = (np.arange(map_source.size) + 0.5) / map_source.size
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        ax1.plot(u, map_source, label="source")
        ax1.plot(u, map_target, label="target")
        ax1.set_xlabel("u")
        ax1.set_ylabel("inverse CDF")
        ax1.legend(loc="best")
        ax2.plot(u, map_target - map_source, color=FAIL_COLOR)
        ax2.set_xlabel("u")
        ax2.set_ylabel("target - source")
        fig.suptitle(title)
        out = Path(path)
        fig.savefig(out)
        plt.close(fig)
    return out


def render_suite_figures(
    records: Sequence[Mapping[str, Any]],
    suites: Iterable[str],
    out_dir: str | Path,
    extras: Mapping[str, Mapping[str, Any]] | None = None,
) -> list[Path]:
    """One margins chart per suite, plus any suite-specific extras prepared
    by the runner (decay traces, quantile maps)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for suite in sorted(set(suites)):
        written.append(margins_figure(records, suite, out_dir / f"fig_{suite}_margins.png"))
    extras = extras or {}
    if "decay" in extras:
        e = extras["decay"]
        written.append(
            decay_figure(e["times"], e["observed"], e["bounds"],
                         out_dir / "fig_decay_trace.png", e["title"])
        )
    if "transport" in extras:
        e = extras["transport"]
        written.append(
            quantile_map_figure(e["map_source"], e["map_target"],
                                out_dir / "fig_transport_quantiles.png", e["title"])
        )
    return written
