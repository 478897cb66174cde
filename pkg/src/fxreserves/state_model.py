"""Hidden Markov model for currency shares.

State: a composition on the simplex, evolving as a Dirichlet martingale whose
concentration is tuned so the USD share has a fixed innovation variance.
Observation: the non-purchase rate of change, equal to a share-weighted sum of
currency returns plus heavy-tailed noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

DISTRIBUTIONS = ("laplace", "normal", "cauchy")
DEFAULT_GAMMA = 0.015 ** 2
DEFAULT_FLOOR = 0.01
DEFAULT_ALPHA_MIN = 1.0

_LOG2 = np.log(2.0)
_LOG2PI = np.log(2.0 * np.pi)
_LOGPI = np.log(np.pi)


@dataclass(frozen=True)
class ModelParams:
    gamma: float = DEFAULT_GAMMA
    floor: float = DEFAULT_FLOOR
    obs_dist: str = "laplace"
    alpha_min: float = DEFAULT_ALPHA_MIN

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.25:
            raise ValueError(f"gamma must lie in (0, 0.25), got {self.gamma}")
        if not 0.0 <= self.floor < 0.5:
            raise ValueError(f"floor must lie in [0, 0.5), got {self.floor}")
        if self.obs_dist not in DISTRIBUTIONS:
            raise ValueError(f"obs_dist must be one of {DISTRIBUTIONS}, got {self.obs_dist!r}")
        if not self.alpha_min > 0:
            raise ValueError("alpha_min must be positive")

    def check_dimension(self, n_currencies: int) -> None:
        if self.floor * n_currencies >= 1.0:
            raise ValueError(f"floor {self.floor} too large for {n_currencies} currencies")


@dataclass(frozen=True)
class DirichletParams:
    a: np.ndarray
    currencies: tuple[str, ...] | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        if a.ndim != 1 or a.size < 1:
            raise ValueError("Dirichlet parameters must be a nonempty vector")
        if np.any(~(a > 0)) or np.any(~np.isfinite(a)):
            raise ValueError(f"Dirichlet parameters must be positive and finite: {a}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.currencies is not None:
            cur = tuple(self.currencies)
            if len(cur) != a.size:
                raise ValueError("currency labels do not match parameter count")
            object.__setattr__(self, "currencies", cur)

    @property
    def concentration(self) -> float:
        return float(self.a.sum())

    @property
    def mean(self) -> np.ndarray:
        return self.a / self.a.sum()

    @property
    def std(self) -> np.ndarray:
        m = self.mean
        return np.sqrt(m * (1.0 - m) / (self.concentration + 1.0))

    def reorder(self, codes: Sequence[str]) -> "DirichletParams":
        if self.currencies is None:
            raise ValueError("cannot reorder an unlabelled prior")
        missing = [c for c in codes if c not in self.currencies]
        extra = [c for c in self.currencies if c not in codes]
        if missing or extra:
            raise ValueError(f"prior currencies {self.currencies} do not match {tuple(codes)}")
        idx = [self.currencies.index(c) for c in codes]
        return DirichletParams(self.a[idx], tuple(codes))

    def widened(self, factor: float) -> "DirichletParams":
        """Same mean, standard deviations scaled by ``factor``."""
        if not factor > 0:
            raise ValueError("width factor must be positive")
        s_new = (self.concentration + 1.0) / factor ** 2 - 1.0
        if not s_new > 0:
            raise ValueError(f"width factor {factor} leaves no valid concentration")
        return DirichletParams(self.mean * s_new, self.currencies)


# Parameter rows of the published country priors.
PRIOR_TABLES: dict[str, dict[str, float]] = {
    "china": {"USD": 34.0, "EUR": 13.0, "GBP": 1.0, "JPY": 1.0, "AUD": 0.5, "CAD": 0.5},
    "singapore": {"USD": 22.3, "EUR": 8.7, "GBP": 0.7, "JPY": 0.7, "AUD": 0.3,
                  "CAD": 0.3, "RMB": 0.3},
    "brazil": {"USD": 28.5, "EUR": 15.0, "GBP": 1.5, "JPY": 3.5, "AUD": 0.5,
               "CAD": 0.5, "RMB": 0.5},
    "switzerland": {"USD": 17.0, "EUR": 25.0, "GBP": 5.0, "JPY": 2.5, "CAD": 0.5},
}


def prior_from_table(raw_params) -> DirichletParams:
    """Dirichlet prior from raw parameters (a mapping keeps currency labels)."""
    if isinstance(raw_params, Mapping):
        return DirichletParams(np.array(list(raw_params.values()), dtype=float),
                               tuple(str(k).upper() for k in raw_params))
    if isinstance(raw_params, str):
        key = raw_params.strip().lower()
        if key not in PRIOR_TABLES:
            raise ValueError(f"unknown prior table {raw_params!r}; "
                             f"known: {sorted(PRIOR_TABLES)}")
        return prior_from_table(PRIOR_TABLES[key])
    return DirichletParams(np.asarray(raw_params, dtype=float))


def dirichlet_from_mean_usd_std(mean, usd_std: float, usd_index: int = 0,
                                currencies: Sequence[str] | None = None) -> DirichletParams:
    """Dirichlet with the given mean whose USD component has std ``usd_std``."""
    m = np.asarray(mean, dtype=float)
    if np.any(~(m > 0)) or not np.isclose(m.sum(), 1.0, atol=1e-8):
        raise ValueError("mean must be strictly inside the simplex")
    m = m / m.sum()
    mu = m[usd_index]
    var = float(usd_std) ** 2
    if not 0.0 < var < mu * (1.0 - mu):
        raise ValueError(f"usd_std={usd_std} infeasible for a USD mean of {mu}")
    s = mu * (1.0 - mu) / var - 1.0
    return DirichletParams(s * m, None if currencies is None else tuple(currencies))


def alpha_scale(beta_usd, gamma: float, alpha_min: float = DEFAULT_ALPHA_MIN):
    """Concentration giving the USD share an innovation variance of ``gamma``.

    Returns ``(alpha, clamped)``. Where ``beta_usd * (1 - beta_usd) <= gamma``
    the formula is not positive; alpha is set to ``alpha_min`` and flagged.
    """
    b = np.asarray(beta_usd, dtype=float)
    if np.any(~((b > 0) & (b < 1))):
        raise ValueError("beta_usd must lie strictly inside (0, 1)")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    raw = (b - b * b - gamma) / gamma
    clamped = ~(raw > 0)
    alpha = np.where(clamped, alpha_min, raw)
    if alpha.ndim == 0:
        return float(alpha), bool(clamped)
    return alpha, clamped


def transition_moments(beta, gamma: float, usd_index: int = 0,
                       alpha_min: float = DEFAULT_ALPHA_MIN):
    """Variances and full covariance matrix of next quarter's shares.

    The returned matrix has the variances on its diagonal.
    """
    b = np.asarray(beta, dtype=float)
    alpha, _ = alpha_scale(b[usd_index], gamma, alpha_min)
    cov = -np.outer(b, b) / (alpha + 1.0)
    var = b * (1.0 - b) / (alpha + 1.0)
    np.fill_diagonal(cov, var)
    return var, cov


def sample_dirichlet(conc, rng: np.random.Generator) -> np.ndarray:
    """Row-wise Dirichlet draws for a ``(..., N)`` array of parameters.

    Gamma variates are combined in log space. Shapes below one use
    ``G(a) = G(a + 1) * U**(1/a)`` so tiny parameters do not underflow to an
    all-zero row.
    """
    a = np.asarray(conc, dtype=float)
    small = a < 1.0
    g = rng.standard_gamma(np.where(small, a + 1.0, a))
    u = 1.0 - rng.random(a.shape)  # (0, 1], keeps log finite
    with np.errstate(divide="ignore"):
        logg = np.log(g)
    logg = np.where(small, logg + np.log(u) / a, logg)
    logg -= logg.max(axis=-1, keepdims=True)
    x = np.exp(logg)
    return x / x.sum(axis=-1, keepdims=True)


def transition_params(beta, params: ModelParams, usd_index: int = 0):
    """Dirichlet parameters for the next state and the alpha clamp flags."""
    b = np.asarray(beta, dtype=float)
    floored = np.maximum(b, params.floor)
    usd = np.clip(floored[..., usd_index], 1e-300, 1.0 - 1e-12)
    alpha, clamped = alpha_scale(usd, params.gamma, params.alpha_min)
    return np.asarray(alpha)[..., None] * floored, clamped


def transition_sample(beta, params: ModelParams, rng: np.random.Generator,
                      usd_index: int = 0):
    """Draw next quarter's shares. Returns ``(shares, clamped)``."""
    conc, clamped = transition_params(beta, params, usd_index)
    return sample_dirichlet(conc, rng), clamped


def return_loadings(x_eq, r_eq, r_bd, de) -> np.ndarray:
    """Per-currency contribution to the observation for a unit share."""
    r = x_eq * np.asarray(r_eq, dtype=float) + (1.0 - x_eq) * np.asarray(r_bd, dtype=float)
    return (1.0 + r) * np.asarray(de, dtype=float) + r


def predict_observation(beta, x_eq: float, r_eq, r_bd, de):
    """Expected non-purchase rate for shares ``beta`` (rows of particles ok)."""
    if not 0.0 <= x_eq <= 1.0:
        raise ValueError(f"equity share must lie in [0, 1], got {x_eq}")
    out = np.asarray(beta, dtype=float) @ return_loadings(x_eq, r_eq, r_bd, de)
    return out if np.ndim(out) else float(out)


def obs_loglik(y, mu, sigma, dist: str = "laplace"):
    """Log density of ``y`` given location ``mu`` and scale ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("sigma must be positive")
    z = (np.asarray(y, dtype=float) - np.asarray(mu, dtype=float)) / sigma
    ls = np.log(sigma)
    if dist == "laplace":
        out = -_LOG2 - ls - np.abs(z)
    elif dist == "normal":
        out = -0.5 * _LOG2PI - ls - 0.5 * z * z
    elif dist == "cauchy":
        out = -_LOGPI - ls - np.log1p(z * z)
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    return out if np.ndim(out) else float(out)
