"""Currency composition of foreign exchange reserves.

A Dirichlet state-space model of reserve currency shares, filtered with a
particle filter against quarterly reserve accounting data, plus a
simplex-constrained least-squares baseline and an equity-share estimator.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .accounting import (
    CurrencySet,
    MarketPanel,
    ObservationSeries,
    Quarter,
    ReservePanel,
    ReturnPanel,
    build_observations,
    build_return_panel,
    drifted_shares,
    nonpurchase_rate,
    quarter_range,
    zero_coupon_quarterly_return,
)
from .equity_share import EquityShareSeries, estimate_equity_share
from .errors import ConfigError, DataError, FxReservesError, NumericalError
from .io_config import CountryDataset, RunConfig, load_config, load_dataset, validate_config
from .particle_filter import (
    CalibrationCurve,
    FilterSummary,
    calibration_curve,
    run_filter,
)
from .simplex_lsq import WindowProblem, rolling_optimize, solve_window
from .state_model import (
    DirichletParams,
    ModelParams,
    alpha_scale,
    prior_from_table,
    transition_moments,
)

__all__ = [
    "CalibrationCurve", "ConfigError", "CountryDataset", "CurrencySet", "DataError",
    "DirichletParams", "EquityShareSeries", "FilterSummary", "FxReservesError",
    "MarketPanel", "ModelParams", "NumericalError", "ObservationSeries", "Quarter",
    "ReservePanel", "ReturnPanel", "RunConfig", "WindowProblem", "alpha_scale",
    "build_observations", "build_return_panel", "calibration_curve", "drifted_shares",
    "estimate_equity_share", "load_config", "load_dataset", "nonpurchase_rate",
    "prior_from_table", "quarter_range", "rolling_optimize", "run_filter", "solve_window",
    "transition_moments", "validate_config", "zero_coupon_quarterly_return",
]
