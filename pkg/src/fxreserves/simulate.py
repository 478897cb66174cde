"""Synthetic panels drawn from the model itself.

Used as a generative oracle in tests and by the ``synth`` CLI command to
produce a complete, self-consistent input dataset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accounting import (
    BOND_MATURITIES,
    CurrencySet,
    MarketPanel,
    ObservationSeries,
    Quarter,
    ReservePanel,
    ReturnPanel,
    build_return_panel,
    nonpurchase_rate,
    quarter_range,
    sdr_quarterly_vol,
)
from .state_model import (
    DirichletParams,
    ModelParams,
    predict_observation,
    sample_dirichlet,
    transition_sample,
)


@dataclass
class NoiseSpec:
    dist: str = "laplace"
    sigma: float | np.ndarray = 0.002

    def draw(self, T: int, rng: np.random.Generator) -> np.ndarray:
        s = np.broadcast_to(np.asarray(self.sigma, dtype=float), (T,))
        if self.dist == "laplace":
            return rng.laplace(0.0, 1.0, T) * s
        if self.dist == "normal":
            return rng.normal(0.0, 1.0, T) * s
        if self.dist == "cauchy":
            return rng.standard_cauchy(T) * s
        if self.dist == "none":
            return np.zeros(T)
        raise ValueError(f"unknown noise distribution {self.dist!r}")


@dataclass
class SyntheticPanel:
    reserves: ReservePanel
    observations: ObservationSeries
    true_beta: np.ndarray
    mu: np.ndarray
    eps: np.ndarray


def simulate_beta_path(start, T: int, params: ModelParams | None, rng: np.random.Generator,
                       usd_index: int = 0) -> np.ndarray:
    """``(T, N)`` path of compositions; row ``t`` is held during quarter ``t``.

    ``start`` is either a composition or a ``DirichletParams`` prior to draw
    the first row from. ``params=None`` (or a zero variance) keeps the path
    constant.
    """
    if isinstance(start, DirichletParams):
        b = sample_dirichlet(start.a, rng)
    else:
        b = np.asarray(start, dtype=float)
    path = np.empty((T, b.size))
    path[0] = b
    for t in range(1, T):
        if params is None:
            path[t] = path[t - 1]
        else:
            path[t], _ = transition_sample(path[t - 1], params, rng, usd_index)
    return path


def simulate_panel(returns: ReturnPanel, equity_share, beta_source, noise: NoiseSpec,
                   rng: np.random.Generator, params: ModelParams | None = None,
                   w0: float = 1.0e12, purchase_rate=None) -> SyntheticPanel:
    """Reserve panel whose non-purchase rates follow the observation equation.

    ``beta_source`` is a ``(T, N)`` share path, a starting composition, or a
    prior; the latter two are propagated with ``params`` (``gamma=0`` or
    ``params=None`` keeps shares fixed). ``purchase_rate`` gives ``C_t /
    W_{t-1}`` per quarter; by default it is drawn around 1% a quarter.
    """
    T, N = returns.de.shape
    src = beta_source
    if isinstance(src, np.ndarray) and src.ndim == 2:
        beta = np.asarray(src, dtype=float)
        if beta.shape != (T, N):
            raise ValueError(f"share path must have shape {(T, N)}")
    else:
        beta = simulate_beta_path(src, T, params, rng, returns.currencies.usd_index)
    x = np.broadcast_to(np.asarray(getattr(equity_share, "x", equity_share), dtype=float), (T,))
    mu = np.array([predict_observation(beta[t], float(x[t]), returns.r_eq[t],
                                       returns.r_bd[t], returns.de[t]) for t in range(T)])
    eps = noise.draw(T, rng)
    if purchase_rate is None:
        purchase_rate = rng.normal(0.01, 0.02, T)
    pr = np.broadcast_to(np.asarray(purchase_rate, dtype=float), (T,))

    W = np.empty(T + 1)
    C = np.zeros(T + 1)
    W[0] = w0
    for t in range(T):
        C[t + 1] = pr[t] * W[t]
        W[t + 1] = W[t] * (1.0 + mu[t] + eps[t]) + C[t + 1]
        if not W[t + 1] > 0:
            raise ValueError(f"simulated reserves turned nonpositive in quarter {t + 1}")
    quarters = [returns.quarters[0] - 1] + list(returns.quarters)
    reserves = ReservePanel(quarters, W, C)
    sigma = np.broadcast_to(np.asarray(noise.sigma, dtype=float), (T,)).copy()
    if noise.dist == "none" and not np.all(sigma > 0):
        sigma = np.full(T, 1e-3)
    obs = ObservationSeries(list(returns.quarters), nonpurchase_rate(reserves), sigma)
    return SyntheticPanel(reserves, obs, beta, mu, eps)


def random_returns(currencies: CurrencySet, quarters, rng: np.random.Generator,
                   fx_vol: float = 0.04, bond_mean: float = 0.006, bond_vol: float = 0.01,
                   eq_mean: float = 0.015, eq_vol: float = 0.08) -> ReturnPanel:
    """Independent Gaussian quarterly returns; the USD exchange rate stays fixed."""
    T, N = len(quarters), len(currencies)
    usd = currencies.usd_index
    factor = rng.normal(0.0, fx_vol * 0.6, (T, 1))
    de = factor + rng.normal(0.0, fx_vol * 0.8, (T, N))
    de[:, usd] = 0.0
    r_bd = bond_mean + rng.normal(0.0, bond_vol, (T, N))
    r_eq = eq_mean + rng.normal(0.0, eq_vol, (T, N))
    return ReturnPanel(list(quarters), currencies, r_bd, r_eq, de)


def _business_days(q: Quarter) -> np.ndarray:
    days = np.arange(np.datetime64(q.first_day), np.datetime64(q.last_day) + 1)
    return days[np.is_busday(days)]


@dataclass
class SyntheticMarket:
    market: MarketPanel
    cofer_shares: np.ndarray
    cofer_other: np.ndarray


def simulate_market(currencies: CurrencySet, start: Quarter, end: Quarter,
                    rng: np.random.Generator) -> SyntheticMarket:
    """Plausible exchange rates, zero curves, equity indices, daily SDR and COFER shares."""
    quarters = quarter_range(start, end)
    T1, N = len(quarters), len(currencies)
    usd = currencies.usd_index

    # exchange rates: common dollar factor plus idiosyncratic noise
    shocks = rng.normal(0.0, 0.025, (T1, 1)) + rng.normal(0.0, 0.03, (T1, N))
    shocks[0] = 0.0
    log_e = np.cumsum(shocks, axis=0) + np.log(rng.uniform(0.005, 1.5, N))
    log_e[:, usd] = 0.0
    e = np.exp(log_e)

    # zero curves: a slowly moving level per currency plus a term slope
    level = np.clip(0.025 + np.cumsum(rng.normal(0.0, 0.002, (T1, N)), axis=0), -0.005, 0.09)
    slope = 0.002 + 0.001 * rng.random(N)
    yields = {m: level + slope * np.log1p(m) for m in BOND_MATURITIES}

    eq = 100.0 * np.exp(np.cumsum(rng.normal(0.015, 0.07, (T1, N)), axis=0))

    # daily SDR with quarter-specific volatility
    dates, levels = [], []
    x = 1.5
    for q in quarters:
        days = _business_days(q)
        vol = 0.003 * np.exp(0.35 * rng.normal())
        steps = np.exp(rng.normal(0.0, vol, days.size))
        lv = x * np.cumprod(steps)
        x = lv[-1]
        dates.append(days)
        levels.append(lv)
    market = MarketPanel(quarters, currencies, e, yields, eq,
                         np.concatenate(dates), np.concatenate(levels))

    base = np.full(N, 0.05 / max(N - 1, 1))
    base[usd] = 0.65
    for code, share in {"EUR": 0.2, "GBP": 0.045, "JPY": 0.045}.items():
        if code in currencies:
            base[currencies.index(code)] = share
    base = 0.95 * base / base.sum()
    drift = np.cumsum(rng.normal(0.0, 0.002, (T1, N)), axis=0)
    cofer = np.clip(base + drift, 0.005, None)
    other = np.clip(0.05 + np.cumsum(rng.normal(0.0, 0.001, T1)), 0.01, 0.15)
    cofer = cofer / cofer.sum(axis=1, keepdims=True) * (1.0 - other)[:, None]
    return SyntheticMarket(market, cofer, other)


@dataclass
class SyntheticDataset:
    market: MarketPanel
    reserves: ReservePanel
    cofer_shares: np.ndarray
    cofer_other: np.ndarray
    true_beta: np.ndarray
    true_equity_share: float
    reported: dict[str, dict[Quarter, float]]


def make_synthetic_dataset(currencies: CurrencySet, start: Quarter, end: Quarter,
                           prior: DirichletParams | float, params: ModelParams,
                           rng: np.random.Generator, maturity_years: float = 7.0,
                           equity_share: float = 0.05, noise_mean: float = 0.004,
                           report_quarter: int = 4) -> SyntheticDataset:
    """A complete synthetic country: market data, reserves and self-reports.

    The noise scale tracks the SDR volatility index with mean ``noise_mean``.
    Self-reported shares (the true composition) are issued once a year in
    quarter ``report_quarter``. A float ``prior`` is a concentration around
    the simulated COFER shares of the base quarter.
    """
    sm = simulate_market(currencies, start, end, rng)
    if not isinstance(prior, DirichletParams):
        base = sm.cofer_shares[0] / sm.cofer_shares[0].sum()
        prior = DirichletParams(float(prior) * base, tuple(currencies.codes))
    returns = build_return_panel(sm.market, maturity_years)
    vol = sdr_quarterly_vol(sm.market.sdr_dates, sm.market.sdr_usd, returns.quarters)
    sigma = vol * (noise_mean / vol.mean())
    panel = simulate_panel(returns, equity_share, prior, NoiseSpec(params.obs_dist, sigma),
                           rng, params)
    reported = {c: {} for c in currencies}
    for t, q in enumerate(returns.quarters):
        if q.q == report_quarter:
            for j, c in enumerate(currencies):
                reported[c][q] = float(panel.true_beta[t, j])
    return SyntheticDataset(sm.market, panel.reserves, sm.cofer_shares, sm.cofer_other,
                            panel.true_beta, equity_share, reported)
