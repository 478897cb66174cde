"""Portfolio accounting: from raw reserve and market panels to model inputs.

Timing convention used throughout the package
---------------------------------------------
Level series (reserve stock ``W``, exchange rates, yields, index levels) are
end-of-quarter values on a grid ``q_0, q_1, ..., q_T``. Everything derived
from a *change* between two levels is labelled by the later quarter, so the
observation, returns and exchange-rate growth for quarter ``q_t`` all describe
the holding period ``(q_{t-1}, q_t]``. The base quarter ``q_0`` carries levels
only.

With this labelling the non-purchase rate of change obeys

    y_t = sum_i b_i * ((1 + r_i,t) * de_i,t + r_i,t) + eps_t

where ``b`` is the composition held at the start of quarter ``t``.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

QUARTER_YEARS = 0.25
BOND_MATURITIES = (2.0, 5.0, 7.0, 10.0)

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*[-_ ]?\s*[Qq]([1-4])\s*$")


@total_ordering
@dataclass(frozen=True)
class Quarter:
    year: int
    q: int

    def __post_init__(self):
        if not 1 <= self.q <= 4:
            raise ValueError(f"quarter number must be in 1..4, got {self.q}")

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        """Parse ``"2004Q1"`` (also tolerates ``"2004-Q1"`` and lower case)."""
        m = _QUARTER_RE.match(str(text))
        if m is None:
            raise ValueError(f"not a quarter key: {text!r} (expected YYYYQn)")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_date(cls, d: _dt.date) -> "Quarter":
        return cls(d.year, (d.month - 1) // 3 + 1)

    def _ordinal(self) -> int:
        return self.year * 4 + (self.q - 1)

    @classmethod
    def _from_ordinal(cls, n: int) -> "Quarter":
        return cls(n // 4, n % 4 + 1)

    def __lt__(self, other: "Quarter") -> bool:
        return self._ordinal() < other._ordinal()

    def __add__(self, k: int) -> "Quarter":
        return Quarter._from_ordinal(self._ordinal() + int(k))

    def __sub__(self, other):
        if isinstance(other, Quarter):
            return self._ordinal() - other._ordinal()
        return Quarter._from_ordinal(self._ordinal() - int(other))

    def next(self) -> "Quarter":
        return self + 1

    def prev(self) -> "Quarter":
        return self - 1

    @property
    def first_day(self) -> _dt.date:
        return _dt.date(self.year, 3 * self.q - 2, 1)

    @property
    def last_day(self) -> _dt.date:
        return (self + 1).first_day - _dt.timedelta(days=1)

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"


def quarter_range(start: Quarter, end: Quarter) -> list[Quarter]:
    """All quarters from ``start`` to ``end`` inclusive."""
    if end < start:
        raise ValueError(f"empty quarter range {start}..{end}")
    return [start + k for k in range(end - start + 1)]


@dataclass(frozen=True)
class CurrencySet:
    codes: tuple[str, ...]
    usd_code: str = "USD"

    def __post_init__(self):
        codes = tuple(str(c).strip().upper() for c in self.codes)
        object.__setattr__(self, "codes", codes)
        if len(set(codes)) != len(codes):
            raise ValueError(f"duplicate currency codes in {codes}")
        if self.usd_code not in codes:
            raise ValueError(f"currency set must contain {self.usd_code}: {codes}")

    @property
    def usd_index(self) -> int:
        return self.codes.index(self.usd_code)

    def index(self, code: str) -> int:
        return self.codes.index(code.upper())

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self):
        return iter(self.codes)

    def __contains__(self, code) -> bool:
        return str(code).upper() in self.codes


def _check_contiguous(quarters: Sequence[Quarter]) -> None:
    for a, b in zip(quarters, quarters[1:]):
        if b != a + 1:
            raise DataError(f"quarters not contiguous: {a} followed by {b}")


@dataclass
class ReservePanel:
    """End-of-quarter reserve stock ``W`` and net purchases ``C`` (USD).

    ``C[t]`` is the flow during quarter ``t``; the value on the base quarter
    is never used.
    """

    quarters: list[Quarter]
    W: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        if not (len(self.quarters) == self.W.size == self.C.size):
            raise DataError("reserve panel columns have different lengths")
        if np.any(~np.isfinite(self.W)) or np.any(self.W <= 0):
            bad = int(np.flatnonzero(~(self.W > 0))[0])
            raise DataError(f"reserve stock must be positive, got {self.W[bad]} "
                            f"in {self.quarters[bad]}", field="W")
        _check_contiguous(self.quarters)


@dataclass
class MarketPanel:
    """Market data on the level grid.

    ``e`` is USD per unit of currency. ``yields`` maps a maturity in years to
    a ``(T+1, N)`` array of annualized zero-coupon yields; NaN marks a
    currency without a curve at that maturity. ``sdr_dates`` / ``sdr_usd``
    hold the daily SDR series.
    """

    quarters: list[Quarter]
    currencies: CurrencySet
    e: np.ndarray
    yields: dict[float, np.ndarray]
    equity: np.ndarray
    sdr_dates: np.ndarray
    sdr_usd: np.ndarray

    def __post_init__(self):
        shape = (len(self.quarters), len(self.currencies))
        self.e = np.asarray(self.e, dtype=float)
        self.equity = np.asarray(self.equity, dtype=float)
        self.sdr_dates = np.asarray(self.sdr_dates, dtype="datetime64[D]")
        self.sdr_usd = np.asarray(self.sdr_usd, dtype=float)
        if self.e.shape != shape or self.equity.shape != shape:
            raise DataError(f"market panel arrays must have shape {shape}")
        if np.any(~(self.e > 0)):
            raise DataError("exchange rates must be positive", field="e")
        if np.any(~(self.equity > 0)):
            raise DataError("equity index levels must be positive", field="index_level")
        for m, arr in self.yields.items():
            if arr.shape != shape:
                raise DataError(f"yield array for maturity {m} must have shape {shape}")
            if np.any(arr[np.isfinite(arr)] <= -1):
                raise DataError(f"yields must exceed -1 (maturity {m})", field="yield")
        _check_contiguous(self.quarters)

    def has_curve(self, maturity: float, currency: str) -> bool:
        arr = self.yields.get(float(maturity))
        if arr is None:
            return False
        return bool(np.all(np.isfinite(arr[:, self.currencies.index(currency)])))


@dataclass
class ReturnPanel:
    """Per-quarter local-currency returns and exchange-rate growth, ``(T, N)``."""

    quarters: list[Quarter]
    currencies: CurrencySet
    r_bd: np.ndarray
    r_eq: np.ndarray
    de: np.ndarray

    def __post_init__(self):
        shape = (len(self.quarters), len(self.currencies))
        for name in ("r_bd", "r_eq", "de"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            if np.any(~(1.0 + arr > 0)):
                raise ValueError(f"{name}: 1 + value must be positive")
            setattr(self, name, arr)

    def __len__(self) -> int:
        return len(self.quarters)

    def mixed_return(self, x_eq) -> np.ndarray:
        """Blend of equity and bond returns, ``x * r_eq + (1 - x) * r_bd``."""
        x = np.asarray(x_eq, dtype=float).reshape(-1, 1)
        return x * self.r_eq + (1.0 - x) * self.r_bd


@dataclass
class ObservationSeries:
    quarters: list[Quarter]
    y: np.ndarray
    sigma_obs: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.sigma_obs = np.asarray(self.sigma_obs, dtype=float)
        if not (len(self.quarters) == self.y.size == self.sigma_obs.size):
            raise ValueError("observation series columns have different lengths")
        if np.any(~(self.sigma_obs > 0)):
            raise ValueError("sigma_obs must be positive")

    def __len__(self) -> int:
        return len(self.quarters)

    def scaled(self, factor: float) -> "ObservationSeries":
        return ObservationSeries(list(self.quarters), self.y.copy(), self.sigma_obs * factor)


def growth_rate(series) -> np.ndarray:
    """Period-on-period growth ``(s_t - s_{t-1}) / s_{t-1}``."""
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("growth_rate needs a 1-d series of length >= 2")
    if np.any(~(s > 0)):
        raise ValueError("growth_rate needs strictly positive levels")
    return np.diff(s) / s[:-1]


def nonpurchase_rate(panel: ReservePanel) -> np.ndarray:
    """Reserve growth net of the purchase rate ``C_t / W_{t-1}``."""
    W, C = panel.W, panel.C
    if W.size < 2:
        raise ValueError("need at least two quarters of reserves")
    return growth_rate(W) - C[1:] / W[:-1]


def zero_coupon_quarterly_return(y_start, y_end, maturity_years):
    """Holding return of a constant-maturity zero-coupon bond over one quarter.

    Buy an ``M``-year zero at the start-of-quarter yield, sell it a quarter
    later as an ``M - 0.25``-year zero at the end-of-quarter yield. Annual
    compounding. Broadcasts over array inputs.
    """
    M = np.asarray(maturity_years, dtype=float)
    if np.any(M < QUARTER_YEARS):
        raise ValueError(f"maturity must be at least {QUARTER_YEARS} years")
    y0 = np.asarray(y_start, dtype=float)
    y1 = np.asarray(y_end, dtype=float)
    if np.any(~(y0 > -1)) or np.any(~(y1 > -1)):
        raise ValueError("yields must exceed -1")
    out = np.exp(M * np.log1p(y0) - (M - QUARTER_YEARS) * np.log1p(y1)) - 1.0
    return out if out.ndim else float(out)


def equity_quarterly_return(index_start, index_end):
    a = np.asarray(index_start, dtype=float)
    b = np.asarray(index_end, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("index levels must be positive")
    out = b / a - 1.0
    return out if out.ndim else float(out)


def drifted_shares(beta, de) -> np.ndarray:
    """Shares after exchange-rate moves ``de`` with no rebalancing."""
    b = np.asarray(beta, dtype=float)
    g = 1.0 + np.asarray(de, dtype=float)
    if np.any(b < 0) or not np.isclose(b.sum(), 1.0, atol=1e-10):
        raise ValueError("beta must lie on the simplex")
    if np.any(~(g > 0)):
        raise ValueError("1 + de must be positive")
    v = b * g
    return v / v.sum()


def _date_quarters(dates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    years = dates.astype("datetime64[Y]").astype(int) + 1970
    months = dates.astype("datetime64[M]").astype(int) % 12 + 1
    return years, (months - 1) // 3 + 1


def sdr_quarterly_vol(dates, levels, quarters: Iterable[Quarter],
                      min_obs: int = 10) -> np.ndarray:
    """Sample std of daily proportional SDR/USD changes within each quarter.

    Only changes between consecutive observations inside the same quarter
    are used, so no change straddles a quarter boundary.
    """
    d = np.asarray(dates, dtype="datetime64[D]")
    v = np.asarray(levels, dtype=float)
    if d.shape != v.shape:
        raise ValueError("dates and levels differ in length")
    if np.any(~(v > 0)):
        raise ValueError("SDR levels must be positive")
    order = np.argsort(d, kind="stable")
    d, v = d[order], v[order]
    years, qs = _date_quarters(d)
    out = []
    for quarter in quarters:
        sel = v[(years == quarter.year) & (qs == quarter.q)]
        if sel.size < max(min_obs, 3):
            raise DataError(f"quarter {quarter} has {sel.size} daily SDR observations, "
                            f"need at least {min_obs}", field="sdr_usd")
        out.append(np.std(sel[1:] / sel[:-1] - 1.0, ddof=1))
    return np.array(out)


def half_iqr_abs(y) -> float:
    """Half the interquartile range of ``|y|`` (linear-interpolation quantiles)."""
    q25, q75 = np.percentile(np.abs(np.asarray(y, dtype=float)), [25, 75])
    return 0.5 * (q75 - q25)


def scale_obs_vol(quarterly_vol, y, floor: float = 0.0) -> np.ndarray:
    """Rescale a volatility index so its mean equals half the IQR of ``|y|``.

    ``floor`` is a lower bound applied after scaling; it is the escape hatch
    for quarters whose index is zero.
    """
    vol = np.asarray(quarterly_vol, dtype=float)
    if vol.size == 0 or np.asarray(y).size == 0:
        raise ValueError("scale_obs_vol needs nonempty inputs")
    if np.any(vol < 0) or not np.any(vol > 0):
        raise ValueError("volatility index must be nonnegative and positive somewhere")
    target = half_iqr_abs(y)
    if not target > 0:
        raise ValueError("IQR of |y| is zero; set sigma_obs.constant or "
                         "sigma_obs.floor in the run config")
    sigma = vol * (target / vol.mean())
    if floor > 0:
        sigma = np.maximum(sigma, floor)
    if np.any(~(sigma > 0)):
        raise ValueError("scaled sigma_obs has nonpositive entries; set sigma_obs.floor")
    return sigma


def build_return_panel(market: MarketPanel, maturity_years: float,
                       fallback: Mapping[str, float] | None = None) -> ReturnPanel:
    """Per-quarter bond returns, equity returns and FX growth from levels.

    Currencies without a yield curve at ``maturity_years`` take the constant
    quarterly return in ``fallback``; if none is given the call fails naming
    the currency.
    """
    fallback = {k.upper(): float(v) for k, v in (fallback or {}).items()}
    cur = market.currencies
    T1, N = market.e.shape
    curve = market.yields.get(float(maturity_years))
    r_bd = np.empty((T1 - 1, N))
    for j, code in enumerate(cur):
        if curve is not None and np.all(np.isfinite(curve[:, j])):
            r_bd[:, j] = zero_coupon_quarterly_return(curve[:-1, j], curve[1:, j],
                                                      maturity_years)
        elif code in fallback:
            r_bd[:, j] = fallback[code]
        else:
            raise DataError(f"no {maturity_years:g}-year yields for {code} and no "
                            f"fallback return configured", field=code)
    r_eq = equity_quarterly_return(market.equity[:-1], market.equity[1:])
    de = market.e[1:] / market.e[:-1] - 1.0
    return ReturnPanel(list(market.quarters[1:]), cur, r_bd, r_eq, de)


def build_observations(reserves: ReservePanel, market: MarketPanel,
                       sigma_floor: float = 0.0,
                       sigma_constant: float | None = None) -> ObservationSeries:
    """Non-purchase rates and time-varying observation scale per quarter."""
    if reserves.quarters != market.quarters:
        raise DataError("reserve and market panels are not aligned")
    y = nonpurchase_rate(reserves)
    quarters = list(reserves.quarters[1:])
    if sigma_constant is not None:
        sigma = np.full(y.size, float(sigma_constant))
    else:
        vol = sdr_quarterly_vol(market.sdr_dates, market.sdr_usd, quarters)
        sigma = scale_obs_vol(vol, y, floor=sigma_floor)
    return ObservationSeries(quarters, y, sigma)
