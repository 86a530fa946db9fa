"""PNG figures for CLI outputs (non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, *, title: str = "",
              logx: bool = False, logy: bool = False, markers: bool = False) -> Path:
    """One figure with a line per entry of ``series`` (label -> y)."""
    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    for label, y in series.items():
        ax.plot(x, np.asarray(y), "o-" if markers else "-", ms=3, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def spectrum_fit_plot(path, f, X, model, fit_window=None) -> Path:
    """Real and imaginary parts of a spectrum with the fitted line."""
    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    ax.plot(f, X.real, ".", ms=3, label="Re data")
    ax.plot(f, X.imag, ".", ms=3, label="Im data")
    ax.plot(f, model.real, "-", label="Re fit")
    ax.plot(f, model.imag, "-", label="Im fit")
    if fit_window is not None:
        ax.set_xlim(*fit_window)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("spectrum (a.u.)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
