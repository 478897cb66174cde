"""End-to-end model inputs and runs built from a config and a loaded dataset."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .accounting import ObservationSeries, ReturnPanel, build_observations, build_return_panel
from .equity_share import EquityShareSeries, estimate_equity_share
from .errors import ConfigError, DataError
from .io_config import CountryDataset, RunConfig
from .particle_filter import DEFAULT_PROBS, FilterSummary, run_filter
from .simplex_lsq import BaselineResult, rolling_optimize
from .state_model import DirichletParams, dirichlet_from_mean_usd_std, prior_from_table

SWEEP_AXES = ("maturity", "prior_width", "distribution")


@dataclass
class ModelInputs:
    observations: ObservationSeries
    returns: ReturnPanel
    equity: EquityShareSeries
    prior: DirichletParams


def resolve_prior(config: RunConfig, dataset: CountryDataset | None = None) -> DirichletParams:
    codes = config.currencies.codes
    spec = config.prior
    if spec.kind == "table":
        return prior_from_table(spec.table).reorder(codes)
    if spec.kind == "params":
        return prior_from_table(dict(spec.values)).reorder(codes)
    if spec.kind == "mean_std":
        means = dict(spec.values)
        return dirichlet_from_mean_usd_std([means[c] for c in codes], spec.usd_std,
                                           config.currencies.usd_index, codes)
    if dataset is None or dataset.cofer is None:
        raise ConfigError("a COFER-centred prior needs data.cofer", "data.cofer")
    mean = dataset.cofer.shares[0]
    return DirichletParams(spec.concentration * mean, codes)


def prepare_inputs(config: RunConfig, dataset: CountryDataset) -> ModelInputs:
    """Observations, returns, equity share and prior for one configuration."""
    try:
        obs = build_observations(dataset.reserves, dataset.market, config.sigma_floor,
                                 config.sigma_constant)
        if config.sigma_scale != 1.0:
            obs = obs.scaled(config.sigma_scale)
        returns = build_return_panel(dataset.market, config.maturity_years,
                                     dict(config.return_fallback))
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if config.equity_mode == "fixed":
        equity = EquityShareSeries.constant(obs.quarters, config.equity_value)
    else:
        if dataset.cofer is None:
            raise ConfigError("equity-share estimation needs data.cofer", "data.cofer")
        # shares held during quarter t are the level at the end of quarter t-1
        weights = dataset.cofer.shares[:-1]
        equity = estimate_equity_share(obs, weights, returns, config.equity_half_window)
    return ModelInputs(obs, returns, equity, resolve_prior(config, dataset))


def estimate(config: RunConfig, inputs: ModelInputs, probs=DEFAULT_PROBS) -> FilterSummary:
    return run_filter(inputs.observations, inputs.returns, inputs.equity, inputs.prior,
                      config.model, n_particles=config.n_particles, seed=config.seed,
                      probs=probs, workers=config.workers)


def baseline(config: RunConfig, inputs: ModelInputs) -> BaselineResult:
    window = config.baseline_window or len(config.currencies)
    if window > len(inputs.observations):
        raise ConfigError(f"window of {window} exceeds the {len(inputs.observations)} "
                          f"observed quarters", "baseline.window")
    return rolling_optimize(inputs.observations, inputs.returns, window, inputs.equity,
                            smoothing=config.baseline_smoothing)


def default_sweep_value(config: RunConfig, axis: str):
    if axis == "maturity":
        return float(config.maturity_years)
    if axis == "prior_width":
        return 1.0
    if axis == "distribution":
        return config.model.obs_dist
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def parse_sweep_values(axis: str, text: str | None, config: RunConfig) -> list:
    """Sweep values from a comma list; defaults cover the usual grid."""
    default_sweep_value(config, axis)
    if not text:
        return {"maturity": [2.0, 5.0, 7.0, 10.0],
                "prior_width": [0.5, 1.0, 2.0],
                "distribution": ["laplace", "normal", "cauchy"]}[axis]
    items = [s.strip() for s in text.split(",") if s.strip()]
    if axis == "distribution":
        return [s.lower() for s in items]
    try:
        values = [float(s) for s in items]
    except ValueError:
        raise ConfigError(f"sweep values for {axis} must be numbers: {text!r}", "values") from None
    if any(not v > 0 for v in values):
        raise ConfigError(f"sweep values for {axis} must be positive", "values")
    return values


def sweep_point(config: RunConfig, dataset: CountryDataset, axis: str, value,
                base_inputs: ModelInputs | None = None) -> FilterSummary:
    """Filter summary with one setting changed; everything else, seed included, fixed."""
    if axis == "maturity":
        cfg = config.replace(maturity_years=float(value))
        inputs = prepare_inputs(cfg, dataset)
    elif axis == "prior_width":
        cfg = config
        inputs = base_inputs or prepare_inputs(cfg, dataset)
        if value != 1.0:
            try:
                prior = inputs.prior.widened(float(value))
            except ValueError as exc:
                raise ConfigError(str(exc), "values") from None
            inputs = ModelInputs(inputs.observations, inputs.returns, inputs.equity, prior)
    elif axis == "distribution":
        try:
            cfg = config.replace(model=dataclasses.replace(config.model, obs_dist=str(value)))
        except ValueError as exc:
            raise ConfigError(str(exc), "values") from None
        inputs = base_inputs or prepare_inputs(cfg, dataset)
    else:
        default_sweep_value(config, axis)
        raise AssertionError("unreachable")
    return estimate(cfg, inputs)


def run_sweep(config: RunConfig, dataset: CountryDataset, axis: str, values,
              max_concurrent: int = 1) -> list[tuple[object, FilterSummary]]:
    """One summary per sweep value, computed concurrently; order follows ``values``."""
    base = None if axis == "maturity" else prepare_inputs(config, dataset)
    # each point owns its own filter state; the filter is worker-count invariant
    point_cfg = config.replace(workers=1) if max_concurrent > 1 else config
    with ThreadPoolExecutor(max_workers=max(1, max_concurrent)) as pool:
        futures = [pool.submit(sweep_point, point_cfg, dataset, axis, v, base) for v in values]
        return [(v, f.result()) for v, f in zip(values, futures)]


def interval_width(summary: FilterSummary, lo: float = 0.25, hi: float = 0.75) -> np.ndarray:
    return summary.quantile(hi) - summary.quantile(lo)
