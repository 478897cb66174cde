"""Static figures rendered next to the CSV outputs.

Uses the non-interactive Agg backend; PNG metadata is stripped so reruns
write identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .equity_share import EquityShareSeries  # noqa: E402
from .particle_filter import CalibrationCurve, FilterSummary  # noqa: E402
from .simplex_lsq import BaselineResult  # noqa: E402

_SAVE = {"dpi": 120, "metadata": {"Software": None}}


def _xs(quarters) -> np.ndarray:
    return np.array([q.year + (q.q - 1) / 4.0 for q in quarters])


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def _grid(n: int, width: float = 3.2, height: float = 2.4):
    cols = min(n, 3)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(width * cols, height * rows),
                             squeeze=False, sharex=True)
    for ax in axes.ravel()[n:]:
        ax.set_visible(False)
    return fig, axes.ravel()[:n]


def fan_chart(summary: FilterSummary, path, reported=None, truth=None) -> Path:
    """Median and central bands per currency, with optional reported or true shares."""
    x = _xs(summary.quarters)
    fig, axes = _grid(len(summary.currencies))
    outer = (min(summary.probs), max(summary.probs))
    for j, (ax, c) in enumerate(zip(axes, summary.currencies)):
        ax.fill_between(x, 100 * summary.quantile(outer[0])[:, j],
                        100 * summary.quantile(outer[1])[:, j], color="C0", alpha=0.2, lw=0)
        if 0.25 in summary.probs and 0.75 in summary.probs:
            ax.fill_between(x, 100 * summary.quantile(0.25)[:, j],
                            100 * summary.quantile(0.75)[:, j], color="C0", alpha=0.35, lw=0)
        ax.plot(x, 100 * summary.median[:, j], color="C0", lw=1.2)
        if truth is not None:
            ax.plot(x, 100 * np.asarray(truth)[:, j], color="k", lw=0.8, ls="--")
        if reported and c in reported:
            pts = sorted(reported[c].items())
            ax.plot(_xs([q for q, _ in pts]), [100 * s for _, s in pts], "o",
                    color="C3", ms=3)
        ax.set_title(c, fontsize=9)
        ax.set_ylabel("share (%)", fontsize=8)
        ax.tick_params(labelsize=7)
    fig.tight_layout()
    return _save(fig, path)


def goodness_plot(summary: FilterSummary, path) -> Path:
    x = _xs(summary.quarters)
    fig, (ax, ax2) = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True,
                                  gridspec_kw={"height_ratios": (3, 1)})
    ax.fill_between(x, 100 * (summary.y_pred - summary.sigma_obs),
                    100 * (summary.y_pred + summary.sigma_obs), color="C1", alpha=0.2, lw=0)
    ax.plot(x, 100 * summary.y_obs, "k.", ms=3, label="observed")
    ax.plot(x, 100 * summary.y_pred, color="C1", lw=1, label="predicted at median")
    ax.set_ylabel("non-purchase rate (%)")
    ax.legend(fontsize=8, frameon=False)
    ax2.plot(x, summary.ess, color="C2", lw=1)
    ax2.set_ylabel("ESS")
    fig.tight_layout()
    return _save(fig, path)


def calibration_plot(curve: CalibrationCurve, path) -> Path:
    fig, ax = plt.subplots(figsize=(4, 4))
    lv = np.asarray(curve.levels)
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
    for j, c in enumerate(curve.currencies):
        ax.plot(lv, curve.coverage[:, j], marker="o", ms=3, lw=1, label=c)
    ax.set_xlabel("interval level")
    ax.set_ylabel("coverage of reported shares")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def baseline_plot(result: BaselineResult, path) -> Path:
    x = _xs(result.quarters)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for j, c in enumerate(result.currencies):
        ax.plot(x, 100 * result.shares[:, j], lw=1, label=c)
    flagged = np.flatnonzero(result.nonunique)
    if flagged.size:
        ax.plot(x[flagged], np.zeros(flagged.size), "x", color="k", ms=4, label="non-unique")
    ax.set_ylabel("share (%)")
    ax.legend(fontsize=7, frameon=False, ncol=4)
    fig.tight_layout()
    return _save(fig, path)


def equity_plot(series: EquityShareSeries, path) -> Path:
    x = _xs(series.quarters)
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(x, 100 * series.x, color="C4", lw=1.2)
    bad = np.flatnonzero(series.degenerate)
    if bad.size:
        ax.plot(x[bad], 100 * series.x[bad], "x", color="k", ms=4)
    ax.set_ylabel("equity share (%)")
    fig.tight_layout()
    return _save(fig, path)


def sweep_plot(axis: str, results, path, currency_index: int = 0) -> Path:
    """Median and interquartile band of one currency at every sweep value."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for k, (value, summary) in enumerate(results):
        x = _xs(summary.quarters)
        label = value if isinstance(value, str) else f"{float(value):g}"
        ax.plot(x, 100 * summary.median[:, currency_index], color=f"C{k}", lw=1,
                label=f"{axis}={label}")
        if 0.25 in summary.probs and 0.75 in summary.probs:
            ax.fill_between(x, 100 * summary.quantile(0.25)[:, currency_index],
                            100 * summary.quantile(0.75)[:, currency_index],
                            color=f"C{k}", alpha=0.15, lw=0)
    if results:
        ax.set_ylabel(f"{results[0][1].currencies[currency_index]} share (%)")
    ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _save(fig, path)
