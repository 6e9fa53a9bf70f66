"""Figure rendering for the CLI report paths.

Each command writes its figures next to the delimited output.  The Agg
backend keeps everything headless; figures carry no timestamps so reruns
with the same seed reproduce the output files byte for byte.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["loss_summary_figure", "price_figure", "bond_surface_figure",
           "drift_figure"]

_SAVE_KW = dict(dpi=120, metadata={"Software": None})


def _save(fig, path: Path) -> Path:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def loss_summary_figure(out: Path, dates, mean_A, q10, q90, survival,
                        levels) -> Path:
    """Mean loss with a 10-90% band, plus survival fractions per level."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(dates, mean_A, marker="o", color="C3", label="mean loss")
    ax1.fill_between(dates, q10, q90, alpha=0.25, color="C3",
                     label="10-90% band")
    ax1.set_xlabel("tenor date (y)")
    ax1.set_ylabel("aggregate loss")
    ax1.legend(frameon=False)
    if survival is not None and len(levels):
        for i, x in enumerate(levels):
            if x >= 1.0:
                continue
            ax2.plot(dates, survival[:, i], marker=".", label=f"x = {x:g}")
        ax2.set_xlabel("tenor date (y)")
        ax2.set_ylabel("P(loss <= x)")
        ax2.set_ylim(0.0, 1.02)
        ax2.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, out)


def price_figure(out: Path, periods, e_values, premium, default) -> Path:
    """Per-period crossing values and the leg decomposition."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.bar([str(p) for p in periods], e_values, color="C0")
    ax1.set_xlabel("period end")
    ax1.set_ylabel("tranche loss value")
    ax2.bar(["premium", "default"], [premium, default], color=["C2", "C3"])
    ax2.set_ylabel("leg value")
    fig.tight_layout()
    return _save(fig, out)


def bond_surface_figure(out: Path, maturities, bands, values) -> Path:
    """Heatmap of the band-integrated defaultable bond surface."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    im = ax.imshow(np.asarray(values).T, aspect="auto", origin="lower",
                   cmap="viridis")
    ax.set_xticks(range(len(maturities)),
                  [f"{m:g}" for m in maturities])
    ax.set_yticks(range(len(bands)),
                  [f"({lo:g},{hi:g}]" for lo, hi in bands])
    ax.set_xlabel("maturity (y)")
    ax.set_ylabel("loss band")
    fig.colorbar(im, ax=ax, label="band-integrated price")
    fig.tight_layout()
    return _save(fig, out)


def drift_figure(out: Path, rows) -> Path:
    """Mean forward bond price across tenor dates with 3-SE bands; flat
    lines mean the no-arbitrage drift does its job."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, row in enumerate(rows):
        dates = np.arange(len(row.mean_F))
        color = f"C{i % 10}"
        ax.errorbar(dates, row.mean_F, yerr=3.0 * row.se_F, marker="o",
                    ms=3, lw=1, capsize=2, color=color,
                    label=f"k={row.k}, x={row.x:g}")
        ax.axhline(row.F0, color=color, lw=0.6, ls=":")
    ax.set_xlabel("tenor date index")
    ax.set_ylabel("mean F(T_j, T_k, x)")
    ax.legend(frameon=False, fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, out)
