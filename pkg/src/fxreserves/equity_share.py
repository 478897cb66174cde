"""Rolling-window estimate of the equity share of a reserve portfolio.

For each quarter the equity share is the value in [0, 1] that best blends an
all-equity and an all-bond prediction of the non-purchase rate, fitted by
weighted least squares over a centred window. World-average currency shares
stand in for the unknown composition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accounting import ObservationSeries, Quarter, ReturnPanel


@dataclass
class EquityShareSeries:
    quarters: list[Quarter]
    x: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.degenerate = np.asarray(self.degenerate, dtype=bool)
        if np.any((self.x < 0) | (self.x > 1)):
            raise ValueError("equity shares must lie in [0, 1]")

    @classmethod
    def constant(cls, quarters, value: float) -> "EquityShareSeries":
        n = len(quarters)
        return cls(list(quarters), np.full(n, float(value)), np.zeros(n, dtype=bool))


def predicted_component(beta, r, de):
    """``sum_i b_i (1 + r_i) de_i + sum_i b_i r_i``; rows of ``beta`` broadcast."""
    b = np.asarray(beta, dtype=float)
    r = np.asarray(r, dtype=float)
    de = np.asarray(de, dtype=float)
    out = np.sum(b * ((1.0 + r) * de + r), axis=-1)
    return out if np.ndim(out) else float(out)


def estimate_equity_share(obs: ObservationSeries, weights, returns: ReturnPanel,
                          half_window: int = 10, rtol: float = 1e-12) -> EquityShareSeries:
    """Equity share per quarter from a centred window of ``2 * half_window + 1`` quarters.

    ``weights`` is a ``(T, N)`` array of currency shares held at the start of
    each observed quarter (world averages, already restricted to the model's
    currencies). The per-window problem is a scalar weighted regression of
    ``y - P_bd`` on ``P_eq - P_bd`` with weights ``1 / sigma_obs**2``,
    clamped to [0, 1]. A window where the two predictions coincide gets
    ``x = 0`` and a degeneracy flag.
    """
    if half_window < 1:
        raise ValueError("half_window must be at least 1")
    w_cur = np.asarray(weights, dtype=float)
    T = len(obs)
    if w_cur.shape != returns.de.shape or len(returns) != T:
        raise ValueError("observations, weights and returns are not aligned")
    p_eq = predicted_component(w_cur, returns.r_eq, returns.de)
    p_bd = predicted_component(w_cur, returns.r_bd, returns.de)
    d = p_eq - p_bd
    a = obs.y - p_bd
    inv_var = 1.0 / obs.sigma_obs ** 2

    x = np.zeros(T)
    flag = np.zeros(T, dtype=bool)
    for t in range(T):
        lo, hi = max(t - half_window, 0), min(t + half_window, T - 1)
        sl = slice(lo, hi + 1)
        sxx = np.sum(inv_var[sl] * d[sl] ** 2)
        scale = np.sum(inv_var[sl] * (a[sl] ** 2 + p_bd[sl] ** 2 + p_eq[sl] ** 2))
        if not sxx > rtol * max(scale, np.finfo(float).tiny):
            flag[t] = True
            continue
        x[t] = min(max(np.sum(inv_var[sl] * a[sl] * d[sl]) / sxx, 0.0), 1.0)
    return EquityShareSeries(list(obs.quarters), x, flag)
