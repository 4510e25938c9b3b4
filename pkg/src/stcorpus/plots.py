"""Report figures. Uses the Agg backend so nothing needs a display."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .segmenter import FrameTrace, TimeSpan  # noqa: E402

STYLE = {
    "font.size": 9.0,
    "axes.titlesize": 10.0,
    "axes.labelsize": 9.0,
    "xtick.labelsize": 8.0,
    "ytick.labelsize": 8.0,
    "legend.fontsize": 8.0,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# fixed metadata keeps PNG bytes stable between runs
PNG_METADATA = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)


def plot_trace_segments(
    trace: FrameTrace,
    spans: Sequence[TimeSpan],
    path,
    p_on: Optional[float] = None,
    p_off: Optional[float] = None,
    title: str = "",
) -> None:
    """Activation over time with the final segments shaded."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 2.6))
        t = trace.start_s + np.arange(len(trace)) / trace.frame_rate_hz
        ax.plot(t, trace.values, lw=0.6, color="0.25", label="activation")
        for i, s in enumerate(spans):
            ax.axvspan(s.start_s, s.end_s, color=("tab:blue" if i % 2 == 0 else "tab:cyan"), alpha=0.25, lw=0)
        if p_on is not None:
            ax.axhline(p_on, color="tab:green", ls="--", lw=0.8, label="onset")
        if p_off is not None:
            ax.axhline(p_off, color="tab:red", ls=":", lw=0.8, label="offset")
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("activation")
        ax.set_title(title or f"{len(spans)} segments")
        ax.legend(loc="upper right", frameon=False, ncol=3)
        _save(fig, path)


def plot_histogram(
    values: Sequence[float],
    path,
    xlabel: str,
    title: str = "",
    marker: Optional[float] = None,
    bins: int = 30,
) -> None:
    """Histogram with an optional vertical reference line (a cap or cut-off)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        values = np.asarray(values, dtype=float)
        if len(values):
            ax.hist(values, bins=bins, color="tab:blue", alpha=0.8)
        if marker is not None:
            ax.axvline(marker, color="tab:red", ls="--", lw=1.0)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        ax.set_title(title)
        _save(fig, path)
