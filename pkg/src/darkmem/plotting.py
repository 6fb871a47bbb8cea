"""SVG renderings of the CSV results.

The CSV files are the contract; these plots are a convenience.  SVG output
is made reproducible by fixing matplotlib's hash salt and dropping the
date from the metadata.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "darkmem", "svg.fonttype": "none", "font.size": 9}


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def scatter_with_frontier(cloud, frontier, xlabel: str, ylabel: str, title: str = "",
                          hull=None, logx: bool = False, logy: bool = True) -> str:
    """Point cloud in grey, Pareto frontier highlighted, optional hull as a line.

    Each of ``cloud``, ``frontier`` and ``hull`` is a pair of sequences (xs, ys).
    """
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        if cloud is not None and len(cloud[0]):
            ax.scatter(cloud[0], cloud[1], s=6, c="0.7", label="designs")
        ax.scatter(frontier[0], frontier[1], s=14, c="tab:red", label="Pareto frontier")
        if hull is not None:
            ax.plot(hull[0], hull[1], "-", c="tab:blue", lw=1, label="convex hull")
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _render(fig)


def grouped_lines(groups: dict, xlabel: str, ylabel: str, title: str = "",
                  logy: bool = True) -> str:
    """One marker series per group key, e.g. frontier points by level count."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        for key in sorted(groups):
            xs, ys = groups[key]
            ax.plot(xs, ys, "o", ms=3, label=str(key))
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _render(fig)


def bars(labels, series: dict, ylabel: str, title: str = "", logy: bool = True) -> str:
    """Grouped bar chart; ``series`` maps a legend name to one value per label."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        width = 0.8 / max(len(series), 1)
        for i, name in enumerate(series):
            xs = [j + i * width for j in range(len(labels))]
            ax.bar(xs, series[name], width=width, label=name)
        ax.set_xticks([j + 0.4 - width / 2 for j in range(len(labels))])
        ax.set_xticklabels(labels)
        if logy:
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _render(fig)
