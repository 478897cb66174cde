"""Tidy CSV outputs and run metadata.

Floats are written with ``repr`` so files are exact and byte-stable across
runs. One writer per output; each returns the path it wrote.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .equity_share import EquityShareSeries
from .particle_filter import DEFAULT_PROBS, CalibrationCurve, FilterSummary
from .simplex_lsq import BaselineResult


def _fmt(x) -> str:
    x = float(x)
    return "" if np.isnan(x) else repr(x)


def _pct_label(p: float) -> str:
    return f"p{round(100 * p):02d}" if abs(100 * p - round(100 * p)) < 1e-9 else f"p{100 * p:g}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _summary_rows(summary: FilterSummary, probs, prefix=()):
    idx = [summary.prob_index(p) for p in probs]
    for t, q in enumerate(summary.quarters):
        for j, c in enumerate(summary.currencies):
            yield (*prefix, str(q), c, *(_fmt(summary.quantiles[t, j, k]) for k in idx))


def write_summary(path, summary: FilterSummary, probs=DEFAULT_PROBS) -> Path:
    header = ("quarter", "currency", *(_pct_label(p) for p in probs))
    return write_csv(path, header, _summary_rows(summary, probs))


def write_goodness(path, summary: FilterSummary) -> Path:
    rows = ((str(q), _fmt(summary.y_obs[t]), _fmt(summary.y_pred[t]),
             _fmt(summary.sigma_obs[t]), _fmt(summary.ess[t]))
            for t, q in enumerate(summary.quarters))
    return write_csv(path, ("quarter", "y_observed", "y_predicted_median", "sigma_obs", "ess"),
                     rows)


def write_calibration(path, curve: CalibrationCurve) -> Path:
    rows = ((f"{lv:g}", c, _fmt(curve.coverage[i, j]), int(curve.n_reports[j]))
            for i, lv in enumerate(curve.levels) for j, c in enumerate(curve.currencies))
    return write_csv(path, ("level", "currency", "coverage", "n_reports"), rows)


def write_baseline(path, result: BaselineResult) -> Path:
    rows = ((str(q), c, _fmt(result.shares[t, j]), int(result.nonunique[t]), _fmt(result.sse[t]))
            for t, q in enumerate(result.quarters) for j, c in enumerate(result.currencies))
    return write_csv(path, ("quarter", "currency", "share", "nonunique_flag", "sse"), rows)


def write_equity(path, series: EquityShareSeries) -> Path:
    rows = ((str(q), _fmt(series.x[t]), int(series.degenerate[t]))
            for t, q in enumerate(series.quarters))
    return write_csv(path, ("quarter", "equity_share", "degenerate_flag"), rows)


def write_sweep(path, axis: str, results, probs=DEFAULT_PROBS) -> Path:
    header = ("axis", "value", "quarter", "currency", *(_pct_label(p) for p in probs))

    def rows():
        for value, summary in results:
            label = value if isinstance(value, str) else f"{float(value):g}"
            yield from _summary_rows(summary, probs, prefix=(axis, label))

    return write_csv(path, header, rows())


def write_metadata(path, command: str, config_dict: dict, digests: dict, extra: dict | None = None) -> Path:
    """JSON echo of the resolved config, seed, version and input digests.

    Contains no timestamps so repeated runs give identical bytes.
    """
    from . import __version__

    meta = {
        "command": command,
        "version": __version__,
        "seed": config_dict.get("seed"),
        "config": config_dict,
        "input_sha256": dict(sorted(digests.items())),
    }
    if extra:
        meta.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def final_quarter_table(summary: FilterSummary) -> str:
    """Plain-text medians and interquartile ranges for the last quarter."""
    t = len(summary.quarters) - 1
    med = summary.median[t]
    iqr = summary.quantile(0.75)[t] - summary.quantile(0.25)[t]
    lines = [f"{summary.quarters[t]}  median   IQR"]
    for j, c in enumerate(summary.currencies):
        lines.append(f"{c:<6}  {100 * med[j]:6.1f}%  {100 * iqr[j]:5.1f}pp")
    return "\n".join(lines)
