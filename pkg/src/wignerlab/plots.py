"""Matplotlib figure rendering for the report path.

Figures are written next to the delimited output with fixed size, dpi and
metadata so reruns produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import semicircle
from .experiments import ScalingFit

_SAVE_KW = dict(dpi=110, metadata={"Software": "wignerlab"})


def fit_figure(fit: ScalingFit, path: Path, xlabel: str, ylabel: str, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.loglog(fit.predictors, fit.responses, "o", color="#1f77b4", label="measured")
    xs = np.geomspace(min(fit.predictors), max(fit.predictors), 64)
    ax.loglog(
        xs,
        np.exp(fit.intercept) * xs ** fit.slope,
        "-",
        color="#d62728",
        label=f"slope {fit.slope:+.3f} (r$^2$={fit.r_squared:.3f})",
    )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)


def spectrum_figure(eigenvalues: np.ndarray, path: Path, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.hist(eigenvalues, bins=max(10, len(eigenvalues) // 12), density=True,
            color="#1f77b4", alpha=0.6, label="ESD")
    xs = np.linspace(-2.2, 2.2, 400)
    ax.plot(xs, semicircle.density(xs), "-", color="#d62728", label="semicircle")
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)


def trend_figure(ns, medians, path: Path, ylabel: str, title: str) -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.loglog(ns, medians, "o-", color="#1f77b4")
    ax.set_xlabel("n")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return Path(path)
