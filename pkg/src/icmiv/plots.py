"""Figure rendering for the diagnostic reports.

Both diagnostics ship as CSV; these helpers draw the matching picture next to
the delimited output so a report run leaves something a human can read.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_kernel_sd_figure", "save_gmdc_figure"]


def _series(rows, value_key):
    by_kernel = {}
    for row in rows:
        by_kernel.setdefault(row["kernel"], []).append((row["p_z"], row[value_key]))
    return {k: sorted(pts) for k, pts in sorted(by_kernel.items())}


def save_kernel_sd_figure(rows, path) -> None:
    """Kernel standard deviation against instrument dimension, log scale."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for kernel, pts in _series(rows, "sd_estimate").items():
        ax.plot([p for p, _ in pts], [v for _, v in pts], marker="o", markersize=3, label=kernel)
    ax.set_yscale("log")
    ax.set_xlabel("instrument dimension $p_z$")
    ax.set_ylabel("sd of kernel")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_gmdc_figure(rows, path) -> None:
    """Dependence-correlation of each kernel against instrument dimension."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for kernel, pts in _series(rows, "gmdc").items():
        ax.plot([p for p, _ in pts], [v for _, v in pts], marker="o", markersize=3, label=kernel)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("instrument dimension $p_z$")
    ax.set_ylabel("GMDC")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
