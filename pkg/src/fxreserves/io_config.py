"""Run configuration and CSV ingestion.

Config files are flat ``key = value`` text; ``#`` starts a comment. Lists are
comma separated and per-currency values are written ``USD:34, EUR:13``.

Recognised keys::

    currencies            USD, EUR, GBP, JPY, CAD, AUD
    start, end            base and final quarter, e.g. 2004Q1 / 2022Q3
    n_particles           10000
    seed                  0
    gamma                 0.000225
    floor                 0.01
    alpha_min             1.0
    distribution          laplace | normal | cauchy
    maturity_years        2 | 5 | 7 | 10
    workers               1
    prior.table           china | singapore | brazil | switzerland
    prior.params          USD:34, EUR:13, ...
    prior.mean            USD:0.6, EUR:0.25, ...   (with prior.usd_std)
    prior.usd_std         0.0025
    prior.concentration   50    (prior centred on COFER shares, the default)
    equity_share.mode     estimate | fixed
    equity_share.value    0.0
    equity_share.half_window  10
    sigma_obs.floor       0.0
    sigma_obs.constant    (unset: scale the SDR volatility index)
    sigma_obs.scale       1.0
    returns.fallback.RMB  0.005  (quarterly return for a currency without a curve)
    baseline.window       (unset: number of currencies)
    baseline.smoothing    0.0
    data.reserves, data.rates, data.yields, data.equity, data.sdr,
    data.cofer, data.reported   paths, relative to the config file
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import datetime as _dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .accounting import (
    BOND_MATURITIES,
    CurrencySet,
    MarketPanel,
    Quarter,
    ReservePanel,
    quarter_range,
)
from .errors import ConfigError, DataError
from .state_model import DEFAULT_ALPHA_MIN, DEFAULT_FLOOR, DEFAULT_GAMMA, DISTRIBUTIONS, ModelParams

DEFAULT_CURRENCIES = ("USD", "EUR", "GBP", "JPY", "CAD", "AUD")
DATA_KEYS = ("reserves", "rates", "yields", "equity", "sdr", "cofer", "reported")
DEFAULT_PRIOR_USD_STD = 0.0025
DEFAULT_PRIOR_CONCENTRATION = 50.0

_SCALAR_KEYS = {
    "currencies", "start", "end", "n_particles", "seed", "gamma", "floor", "alpha_min",
    "distribution", "maturity_years", "workers",
    "prior.table", "prior.params", "prior.mean", "prior.usd_std", "prior.concentration",
    "equity_share.mode", "equity_share.value", "equity_share.half_window",
    "sigma_obs.floor", "sigma_obs.constant", "sigma_obs.scale",
    "baseline.window", "baseline.smoothing",
} | {f"data.{k}" for k in DATA_KEYS}


@dataclass(frozen=True)
class PriorSpec:
    kind: str = "cofer"  # table | params | mean_std | cofer
    table: str | None = None
    values: tuple[tuple[str, float], ...] | None = None
    usd_std: float | None = None
    concentration: float = DEFAULT_PRIOR_CONCENTRATION

    def as_dict(self) -> dict:
        return {"kind": self.kind, "table": self.table,
                "values": dict(self.values) if self.values else None,
                "usd_std": self.usd_std, "concentration": self.concentration}


@dataclass(frozen=True)
class RunConfig:
    currencies: CurrencySet = CurrencySet(DEFAULT_CURRENCIES)
    start: Quarter | None = None
    end: Quarter | None = None
    n_particles: int = 10_000
    seed: int = 0
    model: ModelParams = ModelParams()
    maturity_years: float = 7.0
    prior: PriorSpec = PriorSpec()
    equity_mode: str = "estimate"
    equity_value: float = 0.0
    equity_half_window: int = 10
    sigma_floor: float = 0.0
    sigma_constant: float | None = None
    sigma_scale: float = 1.0
    return_fallback: tuple[tuple[str, float], ...] = ()
    baseline_window: int | None = None
    baseline_smoothing: float = 0.0
    workers: int = 1
    data: tuple[tuple[str, str], ...] = ()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def data_path(self, key: str) -> Path | None:
        value = dict(self.data).get(key)
        return Path(value) if value else None

    def as_dict(self) -> dict:
        """Plain, JSON-ready echo of every resolved setting."""
        return {
            "currencies": list(self.currencies.codes),
            "start": str(self.start) if self.start else None,
            "end": str(self.end) if self.end else None,
            "n_particles": self.n_particles,
            "seed": self.seed,
            "gamma": self.model.gamma,
            "floor": self.model.floor,
            "alpha_min": self.model.alpha_min,
            "distribution": self.model.obs_dist,
            "maturity_years": self.maturity_years,
            "prior": self.prior.as_dict(),
            "equity_share": {"mode": self.equity_mode, "value": self.equity_value,
                             "half_window": self.equity_half_window},
            "sigma_obs": {"floor": self.sigma_floor, "constant": self.sigma_constant,
                          "scale": self.sigma_scale},
            "returns_fallback": dict(self.return_fallback),
            "baseline": {"window": self.baseline_window, "smoothing": self.baseline_smoothing},
            "workers": self.workers,
            "data": dict(self.data),
        }


def _num(raw: Mapping[str, str], key: str, default, kind=float):
    if key not in raw or raw[key].strip() == "":
        return default
    text = raw[key].strip()
    try:
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a {'whole number' if kind is int else 'number'}, "
                          f"got {text!r}", key) from None


def _pairs(text: str, key: str) -> tuple[tuple[str, float], ...]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        code, sep, value = item.partition(":")
        if not sep:
            raise ConfigError(f"expected CODE:value entries, got {item!r}", key)
        try:
            out.append((code.strip().upper(), float(value)))
        except ValueError:
            raise ConfigError(f"bad number in {item!r}", key) from None
    if not out:
        raise ConfigError("empty list", key)
    return tuple(out)


def _quarter(raw, key):
    if not raw.get(key, "").strip():
        return None
    try:
        return Quarter.parse(raw[key])
    except ValueError as exc:
        raise ConfigError(str(exc), key) from None


def parse_config_text(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#", ";"), delimiters=("=", ":"))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if len(parser.sections()) != 1:
        raise ConfigError("config must be flat key = value lines without sections")
    return {k.strip(): v for k, v in parser["run"].items()}


def validate_config(text: str, base_dir: str | Path | None = None) -> RunConfig:
    """Parse and range-check a config, filling in defaults."""
    raw = parse_config_text(text)
    fallback_keys = {k for k in raw if k.startswith("returns.fallback.")}
    unknown = sorted(set(raw) - _SCALAR_KEYS - fallback_keys)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])

    try:
        cur = CurrencySet(tuple(c.strip() for c in raw["currencies"].split(",") if c.strip())
                          if raw.get("currencies", "").strip() else DEFAULT_CURRENCIES)
    except ValueError as exc:
        raise ConfigError(str(exc), "currencies") from None

    start, end = _quarter(raw, "start"), _quarter(raw, "end")
    if start and end and not start < end:
        raise ConfigError(f"start {start} must precede end {end}", "end")

    gamma = _num(raw, "gamma", DEFAULT_GAMMA)
    if not 0.0 < gamma < 0.25:
        raise ConfigError(f"must lie in (0, 0.25), got {gamma}", "gamma")
    floor = _num(raw, "floor", DEFAULT_FLOOR)
    if not 0.0 <= floor < 1.0 / len(cur):
        raise ConfigError(f"must lie in [0, 1/{len(cur)}), got {floor}", "floor")
    alpha_min = _num(raw, "alpha_min", DEFAULT_ALPHA_MIN)
    if not alpha_min > 0:
        raise ConfigError("must be positive", "alpha_min")
    dist = raw.get("distribution", "laplace").strip().lower() or "laplace"
    if dist not in DISTRIBUTIONS:
        raise ConfigError(f"must be one of {', '.join(DISTRIBUTIONS)}", "distribution")
    model = ModelParams(gamma=gamma, floor=floor, obs_dist=dist, alpha_min=alpha_min)

    n_particles = _num(raw, "n_particles", 10_000, int)
    if n_particles < 2:
        raise ConfigError("must be at least 2", "n_particles")
    seed = _num(raw, "seed", 0, int)
    if seed < 0:
        raise ConfigError("must be nonnegative", "seed")
    workers = _num(raw, "workers", 1, int)
    if workers < 1:
        raise ConfigError("must be at least 1", "workers")
    maturity = _num(raw, "maturity_years", 7.0)
    if maturity < 0.25:
        raise ConfigError("must be at least one quarter (0.25)", "maturity_years")

    prior = _prior_spec(raw, cur)

    mode = raw.get("equity_share.mode", "estimate").strip().lower() or "estimate"
    if mode not in ("estimate", "fixed"):
        raise ConfigError("must be 'estimate' or 'fixed'", "equity_share.mode")
    eq_value = _num(raw, "equity_share.value", 0.0)
    if not 0.0 <= eq_value <= 1.0:
        raise ConfigError("must lie in [0, 1]", "equity_share.value")
    half_window = _num(raw, "equity_share.half_window", 10, int)
    if half_window < 1:
        raise ConfigError("must be at least 1", "equity_share.half_window")

    sigma_floor = _num(raw, "sigma_obs.floor", 0.0)
    if sigma_floor < 0:
        raise ConfigError("must be nonnegative", "sigma_obs.floor")
    sigma_constant = _num(raw, "sigma_obs.constant", None)
    if sigma_constant is not None and not sigma_constant > 0:
        raise ConfigError("must be positive", "sigma_obs.constant")
    sigma_scale = _num(raw, "sigma_obs.scale", 1.0)
    if not sigma_scale > 0:
        raise ConfigError("must be positive", "sigma_obs.scale")

    fallback = []
    for key in sorted(fallback_keys):
        code = key.rsplit(".", 1)[1].upper()
        if code not in cur:
            raise ConfigError(f"{code} is not a model currency", key)
        value = _num(raw, key, None)
        if value is None or not value > -1:
            raise ConfigError("must be a return above -1", key)
        fallback.append((code, value))

    window = _num(raw, "baseline.window", None, int)
    if window is not None and window < 1:
        raise ConfigError("must be at least 1", "baseline.window")
    smoothing = _num(raw, "baseline.smoothing", 0.0)
    if smoothing < 0:
        raise ConfigError("must be nonnegative", "baseline.smoothing")

    base = Path(base_dir) if base_dir is not None else None
    data = []
    for k in DATA_KEYS:
        value = raw.get(f"data.{k}", "").strip()
        if value:
            p = Path(value)
            if base is not None and not p.is_absolute():
                p = base / p
            data.append((k, str(p)))

    return RunConfig(
        currencies=cur, start=start, end=end, n_particles=n_particles, seed=seed,
        model=model, maturity_years=maturity, prior=prior, equity_mode=mode,
        equity_value=eq_value, equity_half_window=half_window, sigma_floor=sigma_floor,
        sigma_constant=sigma_constant, sigma_scale=sigma_scale,
        return_fallback=tuple(fallback), baseline_window=window,
        baseline_smoothing=smoothing, workers=workers, data=tuple(data),
    )


def _prior_spec(raw, cur: CurrencySet) -> PriorSpec:
    given = [k for k in ("prior.table", "prior.params", "prior.mean") if raw.get(k, "").strip()]
    if len(given) > 1:
        raise ConfigError(f"conflicting prior keys: {', '.join(given)}", given[1])
    conc = _num(raw, "prior.concentration", DEFAULT_PRIOR_CONCENTRATION)
    if not conc > 0:
        raise ConfigError("must be positive", "prior.concentration")
    usd_std = _num(raw, "prior.usd_std", None)
    if not given:
        return PriorSpec("cofer", concentration=conc)
    key = given[0]
    if key == "prior.table":
        from .state_model import PRIOR_TABLES

        name = raw[key].strip().lower()
        if name not in PRIOR_TABLES:
            raise ConfigError(f"unknown table {name!r}; known: {', '.join(sorted(PRIOR_TABLES))}", key)
        if set(PRIOR_TABLES[name]) != set(cur.codes):
            raise ConfigError(f"table {name!r} covers {sorted(PRIOR_TABLES[name])}, "
                              f"not the configured currencies", key)
        return PriorSpec("table", table=name)
    values = _pairs(raw[key], key)
    codes = [c for c, _ in values]
    if sorted(codes) != sorted(cur.codes):
        raise ConfigError(f"must give exactly one value per currency {list(cur.codes)}", key)
    if any(v <= 0 for _, v in values):
        raise ConfigError("all values must be positive", key)
    if key == "prior.params":
        return PriorSpec("params", values=values)
    total = sum(v for _, v in values)
    if abs(total - 1.0) > 1e-6:
        raise ConfigError(f"means must sum to 1, got {total}", key)
    std = DEFAULT_PRIOR_USD_STD if usd_std is None else usd_std
    mu = dict(values)[cur.usd_code]
    if not 0 < std ** 2 < mu * (1 - mu):
        raise ConfigError(f"{std} is infeasible for a USD mean of {mu}", "prior.usd_std")
    return PriorSpec("mean_std", values=values, usd_std=std)


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    config = validate_config(text, base_dir=path.parent)
    return config.replace(seed=seed) if seed is not None else config


# ---------------------------------------------------------------- ingestion

@dataclass
class CoferShares:
    quarters: list[Quarter]
    currencies: CurrencySet
    shares: np.ndarray  # renormalized over the model currencies
    residual: np.ndarray  # share of currencies outside the model
    raw: np.ndarray | None = None  # shares as read, for lossless re-serialization
    raw_other: np.ndarray | None = None  # explicit residual rows as read, if any

    @property
    def renormalization(self) -> np.ndarray:
        return 1.0 / (1.0 - self.residual)


@dataclass
class CountryDataset:
    quarters: list[Quarter]
    currencies: CurrencySet
    reserves: ReservePanel
    market: MarketPanel
    cofer: CoferShares | None = None
    reported: dict[str, dict[Quarter, float]] | None = None
    notes: list[str] = field(default_factory=list)
    digests: dict[str, str] = field(default_factory=dict)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _rows(path: Path, columns: tuple[str, ...]) -> Iterator[tuple[int, dict[str, str]]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"missing column(s) {missing}; header is {header}", path, 1)
        reader.fieldnames = header
        for i, rec in enumerate(reader, start=2):
            if not any((v or "").strip() for v in rec.values()):
                continue
            yield i, {k: (rec.get(k) or "").strip() for k in columns}


def _float(rec, key, path, row) -> float:
    text = rec[key]
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"not a number: {text!r}", path, row, key) from None
    if not np.isfinite(value):
        raise DataError(f"not a finite number: {text!r}", path, row, key)
    return value


def _qkey(rec, path, row) -> Quarter:
    try:
        return Quarter.parse(rec["quarter"])
    except ValueError as exc:
        raise DataError(str(exc), path, row, "quarter") from None


def read_reserves(path) -> dict[Quarter, tuple[float, float, int]]:
    path = Path(path)
    out = {}
    for row, rec in _rows(path, ("quarter", "W", "C")):
        q = _qkey(rec, path, row)
        if q in out:
            raise DataError(f"duplicate quarter {q}", path, row, "quarter")
        W = _float(rec, "W", path, row)
        if not W > 0:
            raise DataError(f"reserve stock must be positive, got {W}", path, row, "W")
        out[q] = (W, _float(rec, "C", path, row), row)
    if not out:
        raise DataError("no records", path)
    return out


def _read_keyed(path: Path, columns, value_col, extra_key=None, positive=False):
    out = {}
    for row, rec in _rows(path, columns):
        q = _qkey(rec, path, row)
        code = rec["currency"].upper()
        if not code:
            raise DataError("empty currency", path, row, "currency")
        key = (q, code)
        if extra_key is not None:
            key = key + (_float(rec, extra_key, path, row),)
        if key in out:
            raise DataError(f"duplicate record for {' '.join(map(str, key))}", path, row)
        v = _float(rec, value_col, path, row)
        if positive and not v > 0:
            raise DataError(f"must be positive, got {v}", path, row, value_col)
        out[key] = (v, row)
    return out


def read_sdr(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    dates, levels, seen = [], [], set()
    for row, rec in _rows(path, ("date", "sdr_usd")):
        try:
            d = _dt.date.fromisoformat(rec["date"])
        except ValueError:
            raise DataError(f"not an ISO date: {rec['date']!r}", path, row, "date") from None
        if d in seen:
            raise DataError(f"duplicate date {d}", path, row, "date")
        seen.add(d)
        v = _float(rec, "sdr_usd", path, row)
        if not v > 0:
            raise DataError(f"must be positive, got {v}", path, row, "sdr_usd")
        dates.append(d)
        levels.append(v)
    if not dates:
        raise DataError("no records", path)
    return np.array(dates, dtype="datetime64[D]"), np.array(levels)


def read_reported(path, currencies: CurrencySet | None = None) -> dict[str, dict[Quarter, float]]:
    path = Path(path)
    out: dict[str, dict[Quarter, float]] = {}
    for (q, code), (v, row) in _read_keyed(path, ("quarter", "currency", "share"), "share").items():
        if not 0.0 <= v <= 1.0:
            raise DataError(f"share must lie in [0, 1], got {v}", path, row, "share")
        if currencies is None or code in currencies:
            out.setdefault(code, {})[q] = v
    if not out:
        raise DataError("no reported shares for the model currencies", path)
    return out


def _require(config: RunConfig, key: str) -> Path:
    p = config.data_path(key)
    if p is None:
        raise ConfigError("path not configured", f"data.{key}")
    return p


def load_dataset(config: RunConfig, need_cofer: bool | None = None) -> CountryDataset:
    """Read every configured input file and align it on one quarter grid.

    The grid runs from ``config.start`` (the base quarter) to ``config.end``;
    when unset they default to the first and last quarter of the reserves
    file. Every panel must cover every grid quarter.
    """
    cur = config.currencies
    digests, notes = {}, []

    p_res = _require(config, "reserves")
    res = read_reserves(p_res)
    digests["reserves"] = file_digest(p_res)
    start = config.start or min(res)
    end = config.end or max(res)
    if not start < end:
        raise ConfigError(f"need at least two quarters, got {start}..{end}", "end")
    grid = quarter_range(start, end)
    for q in grid:
        if q not in res:
            raise DataError(f"gap: quarter {q} missing", p_res, field="quarter")
    reserves = ReservePanel(grid, [res[q][0] for q in grid], [res[q][1] for q in grid])

    T1, N = len(grid), len(cur)

    p_rates = _require(config, "rates")
    rates = _read_keyed(p_rates, ("quarter", "currency", "e"), "e", positive=True)
    digests["rates"] = file_digest(p_rates)
    e = np.empty((T1, N))
    for t, q in enumerate(grid):
        for j, code in enumerate(cur):
            hit = rates.get((q, code))
            if hit is None:
                if code == cur.usd_code:
                    e[t, j] = 1.0
                    continue
                raise DataError(f"gap: no exchange rate for {code} in {q}", p_rates, field="e")
            e[t, j] = hit[0]

    p_yields = _require(config, "yields")
    ylds = _read_keyed(p_yields, ("quarter", "currency", "maturity_years", "yield"),
                       "yield", extra_key="maturity_years")
    digests["yields"] = file_digest(p_yields)
    maturities = sorted({k[2] for k in ylds} | set(BOND_MATURITIES))
    yields = {m: np.full((T1, N), np.nan) for m in maturities}
    for (q, code, m), (v, row) in ylds.items():
        if code in cur and start <= q <= end:
            if not v > -1:
                raise DataError(f"yield must exceed -1, got {v}", p_yields, row, "yield")
            yields[m][grid.index(q), cur.index(code)] = v
    fallback = dict(config.return_fallback)
    m = float(config.maturity_years)
    for j, code in enumerate(cur):
        col = yields.get(m, np.full((T1, N), np.nan))[:, j]
        have = np.isfinite(col)
        if not have.any():
            if code not in fallback:
                raise ConfigError(f"no {m:g}-year yields for {code} in {p_yields} and no "
                                  f"returns.fallback.{code} set", "maturity_years")
            notes.append(f"{code}: constant bond return {fallback[code]} (no {m:g}-year curve)")
        elif not have.all():
            q = grid[int(np.flatnonzero(~have)[0])]
            raise DataError(f"gap: no {m:g}-year yield for {code} in {q}", p_yields,
                            field="yield")

    p_eq = _require(config, "equity")
    eqs = _read_keyed(p_eq, ("quarter", "currency", "index_level"), "index_level", positive=True)
    digests["equity"] = file_digest(p_eq)
    eq = np.empty((T1, N))
    for t, q in enumerate(grid):
        for j, code in enumerate(cur):
            hit = eqs.get((q, code))
            if hit is None:
                raise DataError(f"gap: no equity index for {code} in {q}", p_eq,
                                field="index_level")
            eq[t, j] = hit[0]

    p_sdr = config.data_path("sdr")
    if p_sdr is not None:
        sdr_dates, sdr_levels = read_sdr(p_sdr)
        digests["sdr"] = file_digest(p_sdr)
    elif config.sigma_constant is None:
        raise ConfigError("path not configured (or set sigma_obs.constant)", "data.sdr")
    else:
        sdr_dates, sdr_levels = np.array([], dtype="datetime64[D]"), np.array([])

    market = MarketPanel(grid, cur, e, yields, eq, sdr_dates, sdr_levels)

    if need_cofer is None:
        need_cofer = config.equity_mode == "estimate" or config.prior.kind == "cofer"
    cofer = None
    p_cofer = config.data_path("cofer")
    if p_cofer is not None:
        cofer = read_cofer(p_cofer, grid, cur)
        digests["cofer"] = file_digest(p_cofer)
        top = float(cofer.residual.max())
        notes.append(f"COFER residual currencies dropped; renormalization factor up to "
                     f"{1.0 / (1.0 - top):.6g} (residual share up to {top:.4g})")
    elif need_cofer:
        raise ConfigError("path not configured (needed for equity-share estimation "
                          "or the default prior)", "data.cofer")

    reported = None
    p_rep = config.data_path("reported")
    if p_rep is not None:
        reported = read_reported(p_rep, cur)
        digests["reported"] = file_digest(p_rep)

    return CountryDataset(grid, cur, reserves, market, cofer, reported, notes, digests)


def read_cofer(path, grid: list[Quarter], cur: CurrencySet) -> CoferShares:
    """World-average shares over ``cur``; all other currencies form the residual."""
    path = Path(path)
    recs = _read_keyed(path, ("quarter", "currency", "share"), "share")
    T1, N = len(grid), len(cur)
    shares = np.full((T1, N), np.nan)
    listed_other = np.zeros(T1)
    have_other = np.zeros(T1, dtype=bool)
    pos = {q: t for t, q in enumerate(grid)}
    for (q, code), (v, row) in recs.items():
        if q not in pos:
            continue
        if not 0.0 <= v <= 1.0:
            raise DataError(f"share must lie in [0, 1], got {v}", path, row, "share")
        if code in cur:
            shares[pos[q], cur.index(code)] = v
        else:
            listed_other[pos[q]] += v
            have_other[pos[q]] = True
    for t, q in enumerate(grid):
        if np.any(np.isnan(shares[t])):
            code = cur.codes[int(np.flatnonzero(np.isnan(shares[t]))[0])]
            raise DataError(f"gap: no COFER share for {code} in {q}", path, field="share")
    inside = shares.sum(axis=1)
    if np.any(inside <= 0):
        raise DataError("COFER shares of the model currencies sum to zero", path)
    # residual: explicit rows if present, else whatever is missing from 1
    residual = np.where(have_other, listed_other, np.clip(1.0 - inside, 0.0, None))
    total = inside + residual
    if np.any(np.abs(total - 1.0) > 0.02):
        t = int(np.argmax(np.abs(total - 1.0)))
        raise DataError(f"COFER shares for {grid[t]} sum to {total[t]:.4f}, expected 1",
                        path, field="share")
    return CoferShares(grid, cur, shares / inside[:, None], residual / total, shares,
                       listed_other if have_other.all() else None)


# ---------------------------------------------------------------- writers

def _fmt(x: float) -> str:
    return repr(float(x))


def _write(path: Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_reserves(path, reserves: ReservePanel) -> Path:
    return _write(path, ("quarter", "W", "C"),
                  ((str(q), _fmt(w), _fmt(c))
                   for q, w, c in zip(reserves.quarters, reserves.W, reserves.C)))


def write_market(out_dir, market: MarketPanel, names: Mapping[str, str] | None = None) -> dict[str, Path]:
    names = {"rates": "rates.csv", "yields": "yields.csv", "equity": "equity.csv",
             "sdr": "sdr_daily.csv", **(names or {})}
    out_dir = Path(out_dir)
    cur = market.currencies
    paths = {}
    paths["rates"] = _write(out_dir / names["rates"], ("quarter", "currency", "e"),
                            ((str(q), c, _fmt(market.e[t, j]))
                             for t, q in enumerate(market.quarters) for j, c in enumerate(cur)))
    paths["yields"] = _write(
        out_dir / names["yields"], ("quarter", "currency", "maturity_years", "yield"),
        ((str(q), c, _fmt(m), _fmt(arr[t, j]))
         for m, arr in sorted(market.yields.items())
         for t, q in enumerate(market.quarters) for j, c in enumerate(cur)
         if np.isfinite(arr[t, j])))
    paths["equity"] = _write(out_dir / names["equity"], ("quarter", "currency", "index_level"),
                             ((str(q), c, _fmt(market.equity[t, j]))
                              for t, q in enumerate(market.quarters) for j, c in enumerate(cur)))
    paths["sdr"] = _write(out_dir / names["sdr"], ("date", "sdr_usd"),
                          ((str(d), _fmt(v)) for d, v in zip(market.sdr_dates, market.sdr_usd)))
    return paths


def write_cofer(path, quarters, currencies: CurrencySet, shares, other=None) -> Path:
    """COFER file; ``other`` adds an explicit ``OTHER`` row per quarter."""
    rows = []
    for t, q in enumerate(quarters):
        rows.extend((str(q), c, _fmt(shares[t, j])) for j, c in enumerate(currencies))
        if other is not None:
            rows.append((str(q), "OTHER", _fmt(other[t])))
    return _write(path, ("quarter", "currency", "share"), rows)


def write_reported(path, reported: Mapping[str, Mapping[Quarter, float]]) -> Path:
    rows = [(str(q), c, _fmt(v)) for c in reported for q, v in sorted(reported[c].items())]
    return _write(path, ("quarter", "currency", "share"), rows)


def write_dataset(dataset: CountryDataset, out_dir) -> dict[str, Path]:
    """Serialize an aligned dataset back to the input schemas."""
    out_dir = Path(out_dir)
    paths = {"reserves": write_reserves(out_dir / "reserves.csv", dataset.reserves)}
    paths.update(write_market(out_dir, dataset.market))
    if dataset.cofer is not None:
        c = dataset.cofer
        raw = c.raw if c.raw is not None else c.shares * (1.0 - c.residual)[:, None]
        paths["cofer"] = write_cofer(out_dir / "cofer.csv", c.quarters, c.currencies, raw,
                                     c.raw_other)
    if dataset.reported:
        paths["reported"] = write_reported(out_dir / "reported.csv", dataset.reported)
    return paths


def render_config(config: RunConfig, data: Mapping[str, str | Path]) -> str:
    """Config text reproducing ``config`` with the given data paths."""
    lines = [
        f"currencies = {', '.join(config.currencies.codes)}",
        *( [f"start = {config.start}"] if config.start else [] ),
        *( [f"end = {config.end}"] if config.end else [] ),
        f"n_particles = {config.n_particles}",
        f"seed = {config.seed}",
        f"gamma = {config.model.gamma!r}",
        f"floor = {config.model.floor!r}",
        f"distribution = {config.model.obs_dist}",
        f"maturity_years = {config.maturity_years:g}",
        f"equity_share.mode = {config.equity_mode}",
    ]
    p = config.prior
    if p.kind == "table":
        lines.append(f"prior.table = {p.table}")
    elif p.kind == "params":
        lines.append("prior.params = " + ", ".join(f"{c}:{v!r}" for c, v in p.values))
    elif p.kind == "mean_std":
        lines.append("prior.mean = " + ", ".join(f"{c}:{v!r}" for c, v in p.values))
        lines.append(f"prior.usd_std = {p.usd_std!r}")
    else:
        lines.append(f"prior.concentration = {p.concentration!r}")
    for key, value in data.items():
        lines.append(f"data.{key} = {value}")
    return "\n".join(lines) + "\n"
