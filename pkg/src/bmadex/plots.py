"""Figure rendering for the benchmark reports.

Figures are written next to the CSV curve data; the CSVs stay the primary
artifact and carry the same numbers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

_STYLE = {
    "sm1": dict(color="tab:red", ls="--"),
    "sm2": dict(color="tab:orange", ls="-."),
    "mm": dict(color="black", ls=":"),
    "bma-empirical": dict(color="tab:blue", ls="-"),
    "bma-uniform": dict(color="tab:cyan", ls="-"),
    "bma-oracle": dict(color="tab:green", ls="-"),
}


def _style(name: str) -> dict:
    return _STYLE.get(name, dict(ls="-"))


def plot_sensitivity_curves(curves: dict[str, pd.DataFrame], path,
                            fdr_max: float = 0.3, title: str | None = None):
    """Sensitivity against true FDR, one line per method."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for name, df in curves.items():
        mask = df["true_fdr"] <= fdr_max
        ax.plot(df.loc[mask, "true_fdr"], df.loc[mask, "sensitivity"],
                label=name, **_style(name))
    ax.set_xlabel("true FDR")
    ax.set_ylabel("sensitivity")
    ax.set_xlim(0, fdr_max)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def plot_fdr_calibration(calib: dict[str, pd.DataFrame], path,
                         fdr_max: float = 0.3, title: str | None = None):
    """Estimated against true FDR with the identity line."""
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.plot([0, fdr_max], [0, fdr_max], color="0.6", lw=0.8)
    for name, df in calib.items():
        mask = df["true_fdr"] <= fdr_max
        ax.plot(df.loc[mask, "true_fdr"], df.loc[mask, "estimated_fdr"],
                label=name, **_style(name))
    ax.set_xlabel("true FDR")
    ax.set_ylabel("estimated FDR")
    ax.set_xlim(0, fdr_max)
    ax.set_ylim(0, fdr_max)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
