"""SVG figures from result tables.

Output is byte-identical for identical tables: the SVG id salt is fixed and
no creation date is written.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ParameterError  # noqa: E402
from .experiments import TABLE_COLUMNS, ResultTable  # noqa: E402

__all__ = ["PlotSpec", "emit_svg_plot", "plot_signal_pair"]

_RC = {"svg.hashsalt": "sparsity-sketch", "svg.fonttype": "path", "font.family": "DejaVu Sans"}


@dataclass
class PlotSpec:
    """What to draw from a :class:`ResultTable`.

    Attributes:
        statistic: rows with this statistic become the y values.
        x: table column on the horizontal axis.
        series: table columns whose values distinguish curves.
        reference: optional statistic drawn as a black dashed curve (one per
            distinct x, taken from the first series).
        aggregate_only: keep only aggregate rows (``trial == -1``).
    """

    statistic: str
    x: str = "n"
    series: Sequence[str] = field(default_factory=lambda: ["p"])
    logx: bool = True
    logy: bool = True
    title: str = ""
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    reference: Optional[str] = None
    aggregate_only: bool = True


def _curves(table: ResultTable, statistic: str, x: str, series: Sequence[str], aggregate_only: bool):
    idx = {c: i for i, c in enumerate(TABLE_COLUMNS)}
    for c in [x, *series]:
        if c not in idx:
            raise ParameterError(f"unknown table column {c!r}")
    groups = {}
    for r in table.sorted_rows():
        if r[7] != statistic or (aggregate_only and r[6] != -1):
            continue
        key = tuple(r[idx[c]] for c in series)
        groups.setdefault(key, []).append((float(r[idx[x]]), float(r[8])))
    return {k: sorted(v) for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}


def emit_svg_plot(table: ResultTable, spec: PlotSpec, path) -> str:
    """Draw one line per series and write an SVG to ``path``.

    Raises:
        ParameterError: if no rows match ``spec.statistic``.
    """
    if not len(table):
        raise ParameterError("cannot plot an empty table")
    curves = _curves(table, spec.statistic, spec.x, spec.series, spec.aggregate_only)
    if not curves:
        raise ParameterError(f"no rows with statistic {spec.statistic!r}")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for key, pts in curves.items():
            xs, ys = zip(*pts)
            label = ", ".join(f"{c}={_fmt(v)}" for c, v in zip(spec.series, key))
            ax.plot(xs, ys, marker="o", ms=3, lw=1.2, label=label)
        if spec.reference:
            ref = _curves(table, spec.reference, spec.x, spec.series, True)
            if ref:
                xs, ys = zip(*next(iter(ref.values())))
                ax.plot(xs, ys, "k--", lw=1.0, label=spec.reference)
        if spec.logx:
            ax.set_xscale("log")
        if spec.logy:
            ax.set_yscale("log")
        ax.set_xlabel(spec.xlabel or spec.x)
        ax.set_ylabel(spec.ylabel or spec.statistic)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return str(path)


def plot_signal_pair(x, x_hat, path, title: str = "") -> str:
    """Overlay a signal and its reconstruction against coordinate index."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        idx = np.arange(1, x.size + 1)
        ax.plot(idx, x_hat, lw=0.8, color="tab:red", label="reconstruction")
        ax.plot(idx, x, lw=1.2, color="k", label="signal")
        ax.set_xlabel("coordinate")
        ax.set_ylabel("value")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return str(path)


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return f"{v:g}" if isinstance(v, float) else str(v)
