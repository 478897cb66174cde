"""Sequential Monte Carlo filter for the currency-share model.

One filter step per observed quarter: propagate every particle through the
Dirichlet transition (the first quarter uses the prior draws directly), weight
by the observation density, record weighted summaries, then resample
multinomially. Resampling happens every quarter; ESS is diagnostic only.

Random streams are keyed by ``(seed, stage, quarter, block)`` where a block is
a fixed slice of particle indices. Blocks can be processed on any number of
threads and the output does not change.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .accounting import ObservationSeries, Quarter, ReturnPanel
from .errors import DataError, NumericalError
from .state_model import (
    DirichletParams,
    ModelParams,
    obs_loglik,
    return_loadings,
    sample_dirichlet,
    transition_sample,
)

DEFAULT_PROBS = (0.10, 0.25, 0.50, 0.75, 0.90)
DEFAULT_LEVELS = tuple(round(0.1 * k, 1) for k in range(1, 10))
BLOCK_SIZE = 4096

_STAGE_INIT, _STAGE_PREDICT, _STAGE_RESAMPLE = 0, 1, 2


def _stream(seed: int, stage: int, t: int, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(stage, t, block))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ParticleEnsemble:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.particles.shape[0]
        if n < 2 or self.weights.shape != (n,):
            raise ValueError("ensemble needs >= 2 particles and one weight each")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return self.particles.shape[0]


def init_particles(prior: DirichletParams, n: int, rng: np.random.Generator) -> ParticleEnsemble:
    if n < 2:
        raise ValueError("need at least two particles")
    draws = sample_dirichlet(np.broadcast_to(prior.a, (n, prior.a.size)), rng)
    return ParticleEnsemble(draws, np.full(n, 1.0 / n))


def normalize_log_weights(logw) -> np.ndarray:
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw)
    if not np.isfinite(top):
        raise NumericalError("all particle weights are zero or undefined")
    w = np.exp(logw - top)
    return w / w.sum()


def reweight(weights, y: float, mu, sigma: float, dist: str = "laplace") -> np.ndarray:
    """Multiply weights by the observation density and renormalize."""
    with np.errstate(divide="ignore"):
        logw = np.log(np.asarray(weights, dtype=float))
    return normalize_log_weights(logw + obs_loglik(y, mu, sigma, dist))


def ess(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def multinomial_resample(weights, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent categorical draws of particle indices."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("invalid weights")
    cw = np.cumsum(w)
    idx = np.searchsorted(cw, rng.random(n) * cw[-1], side="right")
    return np.minimum(idx, w.size - 1)


def weighted_quantile(values, weights, p):
    """Smallest value whose cumulative weight reaches ``p``."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    order = np.argsort(v, kind="stable")
    return _sorted_quantiles(v[order], np.cumsum(w[order]), p)


def _sorted_quantiles(sorted_values, cum_weights, p):
    pa = np.asarray(p, dtype=float)
    if np.any((pa < 0) | (pa > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    # relative slack so p = 1 is reachable despite rounding in the cumsum
    target = pa * cum_weights[-1] * (1.0 - 1e-12)
    idx = np.minimum(np.searchsorted(cum_weights, target, side="left"),
                     sorted_values.size - 1)
    out = sorted_values[idx]
    return out if out.ndim else float(out)


def _column_quantiles(particles: np.ndarray, weights: np.ndarray, probs) -> np.ndarray:
    order = np.argsort(particles, axis=0, kind="stable")
    sv = np.take_along_axis(particles, order, axis=0)
    cw = np.cumsum(weights[order], axis=0)
    return np.stack([_sorted_quantiles(sv[:, j], cw[:, j], probs)
                     for j in range(particles.shape[1])])


@dataclass
class FilterSummary:
    """Per-quarter posterior summaries.

    ``quantiles`` has shape ``(T, N, P)`` for quarters x currencies x
    ``probs``. ``y_pred`` is the predicted observation at the per-currency
    weighted medians; ``ess`` is measured before resampling.
    """

    quarters: list[Quarter]
    currencies: tuple[str, ...]
    probs: tuple[float, ...]
    quantiles: np.ndarray
    y_obs: np.ndarray
    y_pred: np.ndarray
    sigma_obs: np.ndarray
    ess: np.ndarray
    n_clamped: np.ndarray = field(default=None)

    def prob_index(self, p: float) -> int:
        hits = np.flatnonzero(np.isclose(self.probs, p, atol=1e-9))
        if hits.size == 0:
            raise KeyError(f"probability {p} not in summary {self.probs}")
        return int(hits[0])

    def quantile(self, p: float) -> np.ndarray:
        """``(T, N)`` array of the ``p`` quantile."""
        return self.quantiles[:, :, self.prob_index(p)]

    @property
    def median(self) -> np.ndarray:
        return self.quantile(0.5)


def _with_median(probs) -> tuple[float, ...]:
    ps = sorted({float(p) for p in probs} | {0.5})
    return tuple(ps)


def _equity_array(equity_share, T: int) -> np.ndarray:
    x = getattr(equity_share, "x", equity_share)
    x = np.broadcast_to(np.asarray(x, dtype=float), (T,)).copy()
    if np.any(~((x >= 0) & (x <= 1))):
        raise ValueError("equity share must lie in [0, 1]")
    return x


def _check_inputs(obs: ObservationSeries, returns: ReturnPanel) -> None:
    if list(obs.quarters) != list(returns.quarters):
        raise DataError("observations and returns cover different quarters")
    arrays = (obs.y, obs.sigma_obs, returns.r_bd, returns.r_eq, returns.de)
    for t, q in enumerate(obs.quarters):
        if not all(np.all(np.isfinite(a[t])) for a in arrays):
            raise DataError(f"missing or non-finite input data in quarter {q}")


def run_filter(obs: ObservationSeries, returns: ReturnPanel, equity_share,
               prior: DirichletParams, params: ModelParams | None = None,
               n_particles: int = 10_000, seed: int = 0,
               probs: Sequence[float] = DEFAULT_PROBS, workers: int = 1,
               update: bool = True) -> FilterSummary:
    """Run the particle filter over every quarter of ``obs``.

    ``equity_share`` is a scalar, an array over quarters, or anything with an
    ``x`` attribute. ``update=False`` skips reweighting, which turns the run
    into plain prior propagation with resampling noise.
    """
    params = params or ModelParams()
    _check_inputs(obs, returns)
    T, N = returns.de.shape
    if prior.a.size != N:
        raise ValueError(f"prior has {prior.a.size} components, data has {N} currencies")
    params.check_dimension(N)
    if n_particles < 2:
        raise ValueError("n_particles must be at least 2")
    usd = returns.currencies.usd_index
    x_eq = _equity_array(equity_share, T)
    probs = _with_median(probs)

    blocks = [(s, min(s + BLOCK_SIZE, n_particles))
              for s in range(0, n_particles, BLOCK_SIZE)]
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def run_blocks(fn):
        if pool is None:
            return [fn(b, lo, hi) for b, (lo, hi) in enumerate(blocks)]
        return list(pool.map(lambda a: fn(a[0], *a[1]), enumerate(blocks)))

    quantiles = np.empty((T, N, len(probs)))
    y_pred = np.empty(T)
    ess_out = np.empty(T)
    n_clamped = np.zeros(T, dtype=int)
    particles = None
    try:
        for t in range(T):
            load = return_loadings(x_eq[t], returns.r_eq[t], returns.r_bd[t], returns.de[t])

            def step(b, lo, hi, t=t, load=load):
                if t == 0:
                    rng = _stream(seed, _STAGE_INIT, 0, b)
                    new = sample_dirichlet(np.broadcast_to(prior.a, (hi - lo, N)), rng)
                    clamped = 0
                else:
                    rng = _stream(seed, _STAGE_PREDICT, t, b)
                    new, flags = transition_sample(particles[lo:hi], params, rng, usd)
                    clamped = int(np.count_nonzero(flags))
                mu = new @ load
                ll = obs_loglik(obs.y[t], mu, obs.sigma_obs[t], params.obs_dist)
                return new, ll, clamped

            parts = run_blocks(step)
            particles = np.concatenate([p[0] for p in parts])
            loglik = np.concatenate([p[1] for p in parts])
            n_clamped[t] = sum(p[2] for p in parts)

            if update:
                try:
                    w = normalize_log_weights(loglik)
                except NumericalError as exc:
                    raise NumericalError(f"quarter {obs.quarters[t]}: {exc}; the model "
                                         f"cannot explain y={obs.y[t]:.6g}") from None
            else:
                w = np.full(n_particles, 1.0 / n_particles)
            ess_out[t] = ess(w)
            quantiles[t] = _column_quantiles(particles, w, probs)
            y_pred[t] = quantiles[t][:, probs.index(0.5)] @ load

            idx = multinomial_resample(w, n_particles, _stream(seed, _STAGE_RESAMPLE, t))
            particles = particles[idx]
    finally:
        if pool is not None:
            pool.shutdown()

    return FilterSummary(
        quarters=list(obs.quarters),
        currencies=tuple(returns.currencies.codes),
        probs=probs,
        quantiles=quantiles,
        y_obs=obs.y.copy(),
        y_pred=y_pred,
        sigma_obs=obs.sigma_obs.copy(),
        ess=ess_out,
        n_clamped=n_clamped,
    )


def prior_propagation_quantiles(prior: DirichletParams, params: ModelParams, T: int,
                                n: int, rng: np.random.Generator, probs=DEFAULT_PROBS,
                                usd_index: int = 0) -> np.ndarray:
    """Quantiles of the state under the prior alone, ``(T, N, P)``.

    Each sample path is simulated independently (no weights, no
    resampling), giving the exact marginal law of the state that the filter
    approaches when observations carry no information.
    """
    beta = sample_dirichlet(np.broadcast_to(prior.a, (n, prior.a.size)), rng)
    out = np.empty((T, prior.a.size, len(probs)))
    for t in range(T):
        if t:
            beta, _ = transition_sample(beta, params, rng, usd_index)
        out[t] = np.quantile(beta, probs, axis=0, method="inverted_cdf").T
    return out


def calibration_probs(levels: Sequence[float] = DEFAULT_LEVELS) -> tuple[float, ...]:
    """Quantile probabilities needed for central intervals at ``levels``."""
    ps = set()
    for lv in levels:
        ps.add(round((1.0 - lv) / 2.0, 12))
        ps.add(round((1.0 + lv) / 2.0, 12))
    return tuple(sorted(ps))


@dataclass
class CalibrationCurve:
    levels: tuple[float, ...]
    currencies: tuple[str, ...]
    coverage: np.ndarray
    n_reports: np.ndarray


def calibration_curve(summary: FilterSummary,
                      reported: Mapping[str, Mapping[Quarter, float]],
                      levels: Sequence[float] = DEFAULT_LEVELS) -> CalibrationCurve:
    """Share of reporting quarters whose reported share lies in each central interval.

    ``reported`` maps currency code to ``{quarter: share}``; quarters absent
    from the summary are ignored, as are currencies outside the model.
    """
    qpos = {q: t for t, q in enumerate(summary.quarters)}
    cur = [c for c in summary.currencies
           if any(q in qpos for q in reported.get(c, {}))]
    if not cur:
        raise DataError("no reported shares overlap the filtered quarters")
    cov = np.full((len(levels), len(cur)), np.nan)
    counts = np.zeros(len(cur), dtype=int)
    for j, c in enumerate(cur):
        col = summary.currencies.index(c)
        rows = [(qpos[q], s) for q, s in sorted(reported[c].items()) if q in qpos]
        t_idx = np.array([r[0] for r in rows])
        shares = np.array([r[1] for r in rows])
        counts[j] = len(rows)
        for i, lv in enumerate(levels):
            lo = summary.quantile((1.0 - lv) / 2.0)[t_idx, col]
            hi = summary.quantile((1.0 + lv) / 2.0)[t_idx, col]
            cov[i, j] = np.mean((shares >= lo) & (shares <= hi))
    return CalibrationCurve(tuple(levels), tuple(cur), cov, counts)
